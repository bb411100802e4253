#include <majorana/majorana.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace majorana;

namespace {

ExperimentConfig resolve(const std::string& what) {
    const auto& names = preset_names();
    if (std::find(names.begin(), names.end(), what) != names.end()) return preset(what);
    if (fs::exists(what)) return load_config(what);
    return preset(what);  // rejection lists the valid names
}

std::vector<double> parse_values(const std::string& spec) {
    // "a,b,c" or "start:stop:step"
    std::vector<double> out;
    if (spec.empty()) return out;
    if (spec.find(':') != std::string::npos) {
        double a, b, h;
        char c1, c2;
        std::istringstream is(spec);
        is.imbue(std::locale::classic());
        if (!(is >> a >> c1 >> b >> c2 >> h) || h <= 0) throw Error("range must be start:stop:step with step > 0");
        for (std::size_t i = 0;; ++i) {
            double v = a + h * static_cast<double>(i);
            if (v > b + 1e-9 * h) break;
            out.push_back(v);
        }
        return out;
    }
    std::istringstream is(spec);
    is.imbue(std::locale::classic());
    std::string tok;
    while (std::getline(is, tok, ',')) {
        std::istringstream ts(tok);
        ts.imbue(std::locale::classic());
        double v;
        if (!(ts >> v)) throw Error("bad sweep value '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

void apply_overrides(ExperimentConfig& c, std::optional<double> dt, std::optional<std::uint64_t> seed, bool svg) {
    if (dt) c.grid.dt = *dt;
    if (seed && c.measurement) {
        c.measurement->mode = MeasurementPlan::Mode::sampled;
        c.measurement->seed = *seed;
    }
    if (svg) c.write_svg = true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Majorana-mediated quantum-dot Bell-state preparation"};
    app.require_subcommand(1);

    std::string out_dir = "out";
    std::optional<double> dt;
    std::optional<std::uint64_t> seed;
    bool svg = false;

    auto* run_cmd = app.add_subcommand("run", "run a preset or JSON config");
    std::string target;
    run_cmd->add_option("config", target, "preset name or config path")->required();
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--seed", seed, "sample measurement shots with this seed");
    run_cmd->add_option("--dt", dt, "override the time step");
    run_cmd->add_flag("--svg", svg, "also write an SVG plot");

    auto* sweep_cmd = app.add_subcommand("sweep", "sweep one scalar of a config");
    std::string sweep_target, param, values;
    bool eigen = false;
    sweep_cmd->add_option("config", sweep_target, "preset name or config path")->required();
    sweep_cmd->add_option("--param", param, "config path, e.g. params.epsilon")->required();
    sweep_cmd->add_option("--values", values, "comma list or start:stop:step")->required();
    sweep_cmd->add_flag("--eigen", eigen, "tabulate the two lowest eigenvectors instead of running dynamics");
    sweep_cmd->add_option("--out", out_dir, "output directory");
    sweep_cmd->add_option("--seed", seed, "sample measurement shots with this seed");
    sweep_cmd->add_option("--dt", dt, "override the time step");

    auto* presets_cmd = app.add_subcommand("presets", "list preset names");
    bool show = false;
    presets_cmd->add_flag("--show", show, "print each preset's full config");

    auto* validate_cmd = app.add_subcommand("validate", "check a config");
    std::string validate_target;
    validate_cmd->add_option("config", validate_target, "preset name or config path")->required();

    CLI11_PARSE(app, argc, argv);

    std::string stage = "config";
    try {
        if (*presets_cmd) {
            for (const auto& n : preset_names()) {
                if (show)
                    std::cout << to_json(preset(n)).dump(2) << '\n';
                else
                    std::cout << n << '\n';
            }
            return 0;
        }
        if (*validate_cmd) {
            auto c = resolve(validate_target);
            validate(c);
            std::cout << "ok: " << c.name << " (" << c.scheme << ", " << c.grid.steps() << " steps)\n";
            return 0;
        }
        if (*run_cmd) {
            auto c = resolve(target);
            apply_overrides(c, dt, seed, svg);
            stage = "run";
            auto r = run(c);
            write_artifacts(r, out_dir);
            std::cout << to_json(r.summary).dump(2) << '\n';
            return 0;
        }
        if (*sweep_cmd) {
            auto c = resolve(sweep_target);
            apply_overrides(c, dt, seed, false);
            auto vals = parse_values(values);
            stage = "sweep";
            fs::create_directories(out_dir);
            const auto path = fs::path(out_dir) / (c.name + (eigen ? ".eigen.csv" : ".sweep.csv"));
            std::ofstream os(path, std::ios::binary);
            if (!os) throw Error("cannot write '" + path.string() + "'");
            if (eigen) {
                auto labels = build_scheme(c.scheme, c.params).basis->labels;
                write_eigen_csv(eigen_sweep(c, param, vals), labels, param, os);
            } else {
                write_sweep_csv(vals, sweep(c, param, vals), param, os);
            }
            std::cout << path.string() << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error [" << stage << "]: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
