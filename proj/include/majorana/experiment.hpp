#pragma once

#include "control.hpp"
#include "dynamics.hpp"
#include "schemes.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace majorana {

using json = nlohmann::ordered_json;

struct MeasurementPlan {
    enum class Mode { analytic, forced, sampled };
    std::vector<std::string> modes;  // parity of these modes is measured
    Mode mode = Mode::analytic;
    int outcome = 1;                 // forced mode
    std::size_t shots = 10000;
    std::uint64_t seed = 0;
    std::map<int, std::string> targets;  // outcome -> scheme target label for post-collapse fidelity
};

struct ExperimentConfig {
    std::string name = "run";
    std::string scheme = "teleportation";
    SchemeParams params;
    std::vector<std::string> assumed;
    std::string initial_state;
    std::string target;  // reported target label; empty = scheme default
    std::vector<FieldChannel> fields;
    TimeGrid grid;
    std::optional<StopCriterion> stop = StopCriterion{};
    double passage_threshold = 0.9;
    std::optional<MeasurementPlan> measurement;
    bool write_csv = true;
    bool write_svg = false;
    std::string notes;
};

struct BranchStat {
    int outcome;
    double probability;  // Born probability
    double frequency;    // fraction of shots (equals probability when analytic)
    std::optional<double> fidelity;
    std::string target;
};

struct RunSummary {
    std::string name;
    std::vector<std::string> labels;
    std::vector<double> final_populations;
    double final_fidelity = 0.0;
    std::optional<double> first_passage;  // elapsed time since the grid start
    double v_min = 0.0, v_max = 0.0, max_v_increase = 0.0;
    double norm_drift = 0.0;
    double parity_drift = 0.0;
    std::size_t switch_count = 0;
    std::size_t steps = 0;
    double dt = 0.0;
    std::vector<BranchStat> branches;
};

struct RunResult {
    ExperimentConfig config;
    RunSummary summary;
    Trajectory trajectory;
    ControllerDiagnostics diagnostics;
};

// ---------------------------------------------------------------- config <-> json

namespace detail {

inline const char* kind_name(ControlField::Kind k) {
    switch (k) {
        case ControlField::Kind::constant: return "constant";
        case ControlField::Kind::linear_ramp: return "linear_ramp";
        case ControlField::Kind::lyapunov: return "lyapunov";
        case ControlField::Kind::bang_bang: return "bang_bang";
    }
    return "constant";
}

inline ControlField::Kind kind_from(const std::string& s) {
    if (s == "constant") return ControlField::Kind::constant;
    if (s == "linear_ramp") return ControlField::Kind::linear_ramp;
    if (s == "lyapunov") return ControlField::Kind::lyapunov;
    if (s == "bang_bang") return ControlField::Kind::bang_bang;
    throw Error("unknown field kind '" + s + "'");
}

inline const char* mode_name(MeasurementPlan::Mode m) {
    switch (m) {
        case MeasurementPlan::Mode::analytic: return "analytic";
        case MeasurementPlan::Mode::forced: return "forced";
        case MeasurementPlan::Mode::sampled: return "sampled";
    }
    return "analytic";
}

template <class T>
T get_or(const json& j, const char* key, T def) {
    auto it = j.find(key);
    return (it == j.end() || it->is_null()) ? def : it->get<T>();
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["scheme"] = c.scheme;
    const auto& p = c.params;
    j["params"] = {{"epsilon", p.epsilon},
                   {"epsilon2", p.epsilon2 ? json(*p.epsilon2) : json(nullptr)},
                   {"E_c", p.E_c},
                   {"E_J", p.E_J},
                   {"lambda1", p.lambda1},
                   {"lambda2", p.lambda2},
                   {"lambda3", p.lambda3},
                   {"lambda4", p.lambda4},
                   {"n_g", p.n_g},
                   {"t_flip", p.t_flip}};
    j["assumed"] = c.assumed;
    j["initial_state"] = c.initial_state;
    j["target"] = c.target;
    j["fields"] = json::array();
    for (const auto& ch : c.fields) {
        const auto& f = ch.field;
        json fj{{"controls", ch.controls}, {"kind", detail::kind_name(f.kind)}};
        if (!ch.label.empty()) fj["label"] = ch.label;
        switch (f.kind) {
            case ControlField::Kind::constant: fj["value"] = f.value; break;
            case ControlField::Kind::linear_ramp:
                fj["slope"] = f.slope;
                fj["intercept"] = f.intercept;
                fj["window"] = f.window ? json::array({f.window->first, f.window->second}) : json(nullptr);
                fj["clamp"] = f.clamp;
                break;
            case ControlField::Kind::lyapunov:
                fj["gain"] = f.gain;
                fj["target"] = f.target;
                fj["stationary"] = f.stationary;
                break;
            case ControlField::Kind::bang_bang:
                fj["amplitude"] = f.amplitude;
                fj["deadband"] = f.effective_deadband();
                fj["gain"] = f.gain;
                fj["target"] = f.target;
                fj["stationary"] = f.stationary;
                break;
        }
        j["fields"].push_back(fj);
    }
    j["grid"] = {{"t_start", c.grid.t_start}, {"t_end", c.grid.t_end}, {"dt", c.grid.dt}};
    j["stop"] = c.stop ? json{{"population", c.stop->population}} : json(nullptr);
    j["passage_threshold"] = c.passage_threshold;
    if (c.measurement) {
        const auto& m = *c.measurement;
        json t = json::object();
        for (const auto& [o, l] : m.targets) t[o > 0 ? "+1" : "-1"] = l;
        j["measurement"] = {{"modes", m.modes}, {"mode", detail::mode_name(m.mode)}, {"outcome", m.outcome},
                            {"shots", m.shots},  {"seed", m.seed},                  {"targets", t}};
    } else {
        j["measurement"] = nullptr;
    }
    j["output"] = {{"csv", c.write_csv}, {"svg", c.write_svg}};
    if (!c.notes.empty()) j["notes"] = c.notes;
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw Error("config must be a JSON object");
    static const std::vector<std::string> known{"name", "scheme", "params", "assumed", "initial_state", "target",
                                                "fields", "grid", "stop", "passage_threshold", "measurement",
                                                "output", "notes"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw Error("unknown config key '" + k + "'");
    ExperimentConfig c;
    c.name = detail::get_or<std::string>(j, "name", "run");
    c.scheme = detail::get_or<std::string>(j, "scheme", "");
    if (std::find(scheme_names().begin(), scheme_names().end(), c.scheme) == scheme_names().end())
        throw Error("unknown scheme '" + c.scheme + "'");
    c.params = default_params(c.scheme);
    if (auto it = j.find("params"); it != j.end()) {
        static const std::vector<std::string> pk{"epsilon", "epsilon2", "E_c",     "E_J", "lambda1",
                                                 "lambda2", "lambda3",  "lambda4", "n_g", "t_flip"};
        for (const auto& [k, v] : it->items()) {
            if (std::find(pk.begin(), pk.end(), k) == pk.end()) throw Error("unknown parameter '" + k + "'");
            if (!v.is_null() && !v.is_number()) throw Error("parameter '" + k + "' must be a number");
        }
        auto& p = c.params;
        const json& pj = *it;
        p.epsilon = detail::get_or(pj, "epsilon", p.epsilon);
        if (pj.contains("epsilon2")) p.epsilon2 = pj["epsilon2"].is_null() ? std::nullopt : std::optional<double>(pj["epsilon2"].get<double>());
        p.E_c = detail::get_or(pj, "E_c", p.E_c);
        p.E_J = detail::get_or(pj, "E_J", p.E_J);
        p.lambda1 = detail::get_or(pj, "lambda1", p.lambda1);
        p.lambda2 = detail::get_or(pj, "lambda2", p.lambda2);
        p.lambda3 = detail::get_or(pj, "lambda3", p.lambda3);
        p.lambda4 = detail::get_or(pj, "lambda4", p.lambda4);
        p.n_g = detail::get_or(pj, "n_g", p.n_g);
        p.t_flip = detail::get_or(pj, "t_flip", p.t_flip);
    }
    c.assumed = detail::get_or<std::vector<std::string>>(j, "assumed", {});
    c.initial_state = detail::get_or<std::string>(j, "initial_state", "");
    c.target = detail::get_or<std::string>(j, "target", "");
    if (auto it = j.find("fields"); it != j.end() && !it->is_null()) {
        for (const auto& fj : *it) {
            FieldChannel ch;
            ch.controls = fj.at("controls").get<std::vector<std::string>>();
            ch.label = detail::get_or<std::string>(fj, "label", "");
            ControlField f;
            f.kind = detail::kind_from(fj.at("kind").get<std::string>());
            switch (f.kind) {
                case ControlField::Kind::constant: f.value = fj.at("value").get<double>(); break;
                case ControlField::Kind::linear_ramp: {
                    std::optional<std::pair<double, double>> w;
                    if (fj.contains("window") && !fj["window"].is_null()) {
                        auto a = fj["window"].get<std::vector<double>>();
                        if (a.size() != 2) throw Error("ramp window needs two numbers");
                        w = std::pair{a[0], a[1]};
                    }
                    f = ControlField::ramp(fj.at("slope").get<double>(), fj.at("intercept").get<double>(), w,
                                           detail::get_or(fj, "clamp", false));
                    break;
                }
                case ControlField::Kind::lyapunov:
                    f = ControlField::lyapunov(fj.at("gain").get<double>(), detail::get_or<std::string>(fj, "target", ""));
                    f.stationary = detail::get_or(fj, "stationary", true);
                    break;
                case ControlField::Kind::bang_bang: {
                    std::optional<double> db;
                    if (fj.contains("deadband") && !fj["deadband"].is_null()) db = fj["deadband"].get<double>();
                    f = ControlField::bang_bang(fj.at("amplitude").get<double>(),
                                                detail::get_or<std::string>(fj, "target", ""), db,
                                                detail::get_or(fj, "gain", 1.0));
                    if (db && *db < 0) throw Error("bang-bang deadband must be non-negative");
                    f.stationary = detail::get_or(fj, "stationary", true);
                    break;
                }
            }
            ch.field = f;
            c.fields.push_back(std::move(ch));
        }
    }
    if (auto it = j.find("grid"); it != j.end()) {
        c.grid.t_start = detail::get_or(*it, "t_start", c.grid.t_start);
        c.grid.t_end = detail::get_or(*it, "t_end", c.grid.t_end);
        c.grid.dt = detail::get_or(*it, "dt", c.grid.dt);
    }
    if (auto it = j.find("stop"); it != j.end())
        c.stop = it->is_null() ? std::nullopt : std::optional<StopCriterion>(StopCriterion{it->at("population").get<double>()});
    c.passage_threshold = detail::get_or(j, "passage_threshold", 0.9);
    if (auto it = j.find("measurement"); it != j.end() && !it->is_null()) {
        MeasurementPlan m;
        m.modes = it->at("modes").get<std::vector<std::string>>();
        auto mode = detail::get_or<std::string>(*it, "mode", "analytic");
        if (mode == "analytic") m.mode = MeasurementPlan::Mode::analytic;
        else if (mode == "forced") m.mode = MeasurementPlan::Mode::forced;
        else if (mode == "sampled") m.mode = MeasurementPlan::Mode::sampled;
        else throw Error("unknown measurement mode '" + mode + "'");
        m.outcome = detail::get_or(*it, "outcome", 1);
        m.shots = detail::get_or<std::size_t>(*it, "shots", 10000);
        m.seed = detail::get_or<std::uint64_t>(*it, "seed", 0);
        if (auto t = it->find("targets"); t != it->end())
            for (const auto& [k, v] : t->items()) {
                if (k != "+1" && k != "-1" && k != "1") throw Error("measurement target key must be +1 or -1");
                m.targets[k == "-1" ? -1 : 1] = v.get<std::string>();
            }
        c.measurement = m;
    }
    if (auto it = j.find("output"); it != j.end()) {
        c.write_csv = detail::get_or(*it, "csv", true);
        c.write_svg = detail::get_or(*it, "svg", false);
    }
    c.notes = detail::get_or<std::string>(j, "notes", "");
    return c;
}

// Checks that every reference in the config resolves against its scheme.
inline void validate(const ExperimentConfig& c) {
    auto s = build_scheme(c.scheme, c.params);
    c.grid.validate();
    if (!c.initial_state.empty()) s.index_of_label(c.initial_state);
    bell_target(s, c.target);
    for (const auto& ch : c.fields) {
        if (ch.controls.empty()) throw Error("field drives no control");
        for (const auto& l : ch.controls) s.control(l);
        if (ch.field.feedback()) bell_target(s, ch.field.target);
        if (ch.field.kind == ControlField::Kind::lyapunov && !(ch.field.gain >= 0))
            throw Error("Lyapunov gain must be non-negative");
    }
    if (c.stop && !(c.stop->population > 0 && c.stop->population <= 1)) throw Error("stop population must be in (0,1]");
    if (c.measurement) {
        const auto& m = *c.measurement;
        if (m.modes.empty()) throw Error("measurement needs at least one mode");
        for (const auto& md : m.modes) s.reg.mode_index(md);
        if (m.mode == MeasurementPlan::Mode::sampled && m.shots < 1) throw Error("sampled measurement needs shots >= 1");
        if (m.mode == MeasurementPlan::Mode::forced && m.outcome != 1 && m.outcome != -1)
            throw Error("forced outcome must be +1 or -1");
        for (const auto& [o, l] : m.targets) bell_target(s, l);
    }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- presets

namespace detail {

inline FieldChannel ramp_on(std::vector<std::string> ctl, double slope, double intercept,
                            std::pair<double, double> window, bool clamp = false) {
    return {std::move(ctl), ControlField::ramp(slope, intercept, window, clamp), ""};
}
inline FieldChannel lyap_on(std::vector<std::string> ctl, double B, std::string target = "") {
    return {std::move(ctl), ControlField::lyapunov(B, std::move(target)), ""};
}
inline FieldChannel bang_on(std::vector<std::string> ctl, double F, std::string target = "") {
    return {std::move(ctl), ControlField::bang_bang(F, std::move(target), 1e-3 * F), ""};
}

inline ExperimentConfig base(const std::string& name, const std::string& scheme, std::string psi0, double t0,
                             double t1, double dt = 0.01) {
    ExperimentConfig c;
    c.name = name;
    c.scheme = scheme;
    c.params = default_params(scheme);
    c.initial_state = std::move(psi0);
    c.grid = {t0, t1, dt};
    c.stop = std::nullopt;
    return c;
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig2a", "fig2b",  "fig3ab", "fig3cd", "fig3ef", "fig3gh", "fig4a",
                                                "fig4bc", "fig4de", "fig5ab", "fig5cd", "fig7a",  "fig7b",  "fig9c",
                                                "fig9d",  "fig13a", "fig13b", "fig13c", "fig13d", "fig6",   "fig9ab",
                                                "fig12"};
    return names;
}

inline ExperimentConfig preset(const std::string& name) {
    using namespace detail;
    const std::vector<std::string> both{"H1", "H2"};
    ExperimentConfig c;
    if (name == "fig2a" || name == "fig2b") {
        const double T = name == "fig2a" ? 40 : 10;
        c = base(name, "teleportation", "|0001>", -T, T);
        c.params.E_c = 30;
        c.params.epsilon = 5;
        c.fields = {ramp_on(both, -40 / T, 20, {-T, T})};
    } else if (name == "fig3ab" || name == "fig3cd" || name == "fig3ef" || name == "fig3gh") {
        c = base(name, "teleportation", "|0001>", 0, 10);
        c.params.E_c = 20;
        c.params.epsilon = 5;
        if (name == "fig3ab") c.fields = {lyap_on(both, 200)};
        if (name == "fig3cd") c.fields = {lyap_on(both, 300)};
        if (name == "fig3ef") c.fields = {bang_on(both, 5)};
        if (name == "fig3gh") c.fields = {bang_on(both, 10)};
        if (c.fields[0].field.kind == ControlField::Kind::bang_bang) c.grid.dt = 0.001;
        c.assumed = {"grid.t_end"};
        if (c.fields[0].field.kind == ControlField::Kind::bang_bang) c.assumed.push_back("fields.deadband");
    } else if (name == "fig4a") {
        c = base(name, "teleportation_josephson", "|0001>", -20, 20);
        c.params.E_c = 20;
        c.params.epsilon = 5;
        c.params.E_J = 0.5;
        c.fields = {ramp_on(both, -2, 20, {-20, 20})};
    } else if (name == "fig4bc" || name == "fig4de" || name == "fig5ab" || name == "fig5cd") {
        c = base(name, "teleportation_josephson", "|0001>", 0, 60);
        c.params.E_c = 20;
        c.params.epsilon = 5;
        c.params.E_J = 0.5;
        if (name == "fig4bc") c.fields = {lyap_on(both, 300)};
        if (name == "fig4de") c.fields = {bang_on(both, 5)};
        if (name == "fig5ab") c.fields = {lyap_on({"H3"}, 100)};
        if (name == "fig5cd") c.fields = {bang_on({"H3"}, 2)};
        c.grid.dt = 0.001;
        c.assumed = {"grid.t_end"};
        if (c.fields[0].field.kind == ControlField::Kind::bang_bang) c.assumed.push_back("fields.deadband");
        if (name[4] == '5') c.assumed.insert(c.assumed.end(), {"params.E_c", "params.epsilon", "params.E_J"});
    } else if (name == "fig7a" || name == "fig7b") {
        c = base(name, "car", "|0110>", 0, 100);
        c.params.E_c = 30;
        c.params.epsilon = 5;
        c.params.E_J = 1;
        c.params.n_g = 0;
        c.target = "psi_T+";
        if (name == "fig7a") {
            c.fields = {lyap_on({"H1"}, 100), lyap_on({"H2"}, 100)};
        } else {
            c.fields = {lyap_on({"H3"}, 300)};
            MeasurementPlan m;
            m.modes = {"f"};
            m.targets = {{1, "psi_T+"}, {-1, "psi_odd"}};
            c.measurement = m;
        }
        c.grid.dt = name == "fig7a" ? 0.0005 : 0.002;
        c.assumed = {"params.E_c", "params.epsilon", "params.E_J", "grid.t_end", "fields.gain"};
    } else if (name == "fig9c") {
        c = base(name, "spin_flip", "|000>", -50, 50);
        c.params.epsilon = -10;
        c.params.t_flip = 1;
        c.fields = {ramp_on(both, -0.4, 20, {-50, 50})};
        c.assumed = {"params.t_flip", "fields.window"};
    } else if (name == "fig9d") {
        c = base(name, "spin_flip", "|000>", 0, 100);
        c.params.epsilon = -10;
        c.params.t_flip = 1;
        c.fields = {lyap_on(both, 1000)};
        c.grid.dt = 0.002;
        c.assumed = {"params.t_flip", "grid.t_end"};
    } else if (name == "fig13a") {
        c = base(name, "two_wire", "|0000>", -50, 50);
        c.params.epsilon = 0;
        c.target = "psi1";
        c.fields = {ramp_on(both, -1.2, 30, {-50, 50})};
        c.assumed = {"params.epsilon"};
    } else if (name == "fig13b") {
        c = base(name, "two_wire", "|0000>", -50, 150);
        c.params.epsilon = 0;
        c.target = "psi2";
        c.fields = {ramp_on({"H1"}, -1.2, 30, {-50, 50}, true), ramp_on({"H2"}, -1.2, 150, {50, 150}, true)};
        MeasurementPlan m;
        m.modes = {"f1"};
        m.targets = {{1, "psi2"}, {-1, "psi1"}};
        c.measurement = m;
        c.assumed = {"params.epsilon", "fields.clamp"};
        c.notes = "ramps hold their endpoint values outside their windows; time axis starts at t=-50";
    } else if (name == "fig13c" || name == "fig13d") {
        c = base(name, "two_wire", "|0000>", 0, 200);
        c.params.epsilon = -10;
        c.target = name == "fig13c" ? "psi1" : "psi2";
        c.fields = {lyap_on({"H1"}, 300, c.target), lyap_on({"H2"}, 300, c.target)};
        c.assumed = {"params.epsilon", "fields.gain", "grid.t_end"};
        if (name == "fig13d") {
            c.params.epsilon2 = -10 - 1e-3;
            c.assumed.push_back("params.epsilon2");
            c.notes = "dot 2 detuned by 1e-3 so the psi2 sector is reachable from |0000>";
        }
        c.grid.dt = 0.002;
    } else if (name == "fig6") {
        c = base(name, "car", "|0000>", 0, 1);
        c.target = "psi_T+";
        c.assumed = {"params.E_c", "params.E_J"};
        c.notes = "eigenstructure sweep over params.epsilon";
    } else if (name == "fig9ab") {
        c = base(name, "spin_flip", "|000>", 0, 1);
        c.assumed = {"params.t_flip"};
        c.notes = "eigenstructure sweep over params.epsilon";
    } else if (name == "fig12") {
        c = base(name, "two_wire", "|0000>", 0, 1);
        c.target = "psi1";
        c.notes = "eigenstructure sweep over params.epsilon";
    } else {
        std::string valid;
        for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw Error("unknown preset '" + name + "' (valid: " + valid + ")");
    }
    return c;
}

// ---------------------------------------------------------------- output

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace detail

inline std::vector<std::string> csv_header(const Trajectory& tr) {
    std::vector<std::string> h{"t"};
    for (const auto& l : tr.basis->labels) h.push_back("pop" + l);
    h.push_back("target_population");
    h.push_back("V");
    for (const auto& l : tr.field_labels) h.push_back("field|" + l);
    return h;
}

inline void write_csv(const Trajectory& tr, std::ostream& os) {
    auto h = csv_header(tr);
    for (std::size_t i = 0; i < h.size(); ++i) os << (i ? "," : "") << h[i];
    os << '\n';
    for (std::size_t r = 0; r < tr.size(); ++r) {
        std::string line = detail::fmt(tr.times[r]);
        for (double p : tr.populations[r]) line += "," + detail::fmt(p);
        line += "," + detail::fmt(tr.target_population[r]);
        line += "," + detail::fmt(tr.lyapunov[r]);
        for (double f : tr.fields[r]) line += "," + detail::fmt(f);
        os << line << '\n';
    }
}

inline void emit_csv(const Trajectory& tr, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write '" + path.string() + "'");
    write_csv(tr, os);
    if (!os) throw Error("write failed for '" + path.string() + "'");
}

// Line plot of the basis populations and the target population.
inline void emit_svg(const Trajectory& tr, const std::filesystem::path& path, const std::string& title = "") {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write '" + path.string() + "'");
    const double W = 900, H = 460, L = 60, R = 200, T = 30, B = 50;
    const double t0 = tr.times.front(), t1 = tr.times.back();
    auto X = [&](double t) { return L + (W - L - R) * (t - t0) / std::max(1e-300, t1 - t0); };
    auto Y = [&](double p) { return T + (H - T - B) * (1.0 - p); };
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const std::size_t stride = std::max<std::size_t>(1, tr.size() / 1500);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0})
        os << "<text x=\"" << L - 35 << "\" y=\"" << Y(p) + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
           << p << "</text>\n";
    os << "<text x=\"" << L << "\" y=\"" << H - 20 << "\" font-family=\"sans-serif\" font-size=\"11\">t = " << t0
       << "</text><text x=\"" << W - R - 60 << "\" y=\"" << H - 20
       << "\" font-family=\"sans-serif\" font-size=\"11\">t = " << t1 << "</text>\n";
    auto line = [&](auto value, const char* colour, double width, const std::string& label, std::size_t slot) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << width << "\" points=\"";
        for (std::size_t r = 0; r < tr.size(); r += stride) os << X(tr.times[r]) << ',' << Y(value(r)) << ' ';
        os << X(tr.times.back()) << ',' << Y(value(tr.size() - 1)) << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (slot + 1) << "\" fill=\"" << colour
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
    };
    const std::size_t nb = tr.basis->size();
    for (std::size_t k = 0; k < nb; ++k)
        line([&](std::size_t r) { return tr.populations[r][k]; }, palette[k % 10], 1.2, tr.basis->labels[k], k);
    line([&](std::size_t r) { return tr.target_population[r]; }, "black", 2.0, "target", nb);
    os << "</svg>\n";
}

inline json to_json(const RunSummary& s) {
    json j;
    j["name"] = s.name;
    json pops = json::object();
    for (std::size_t i = 0; i < s.labels.size(); ++i) pops[s.labels[i]] = s.final_populations[i];
    j["final_populations"] = pops;
    j["final_fidelity"] = s.final_fidelity;
    j["first_passage"] = s.first_passage ? json(*s.first_passage) : json(nullptr);
    j["V_min"] = s.v_min;
    j["V_max"] = s.v_max;
    j["max_V_increase"] = s.max_v_increase;
    j["norm_drift"] = s.norm_drift;
    j["parity_drift"] = s.parity_drift;
    j["switch_count"] = s.switch_count;
    j["steps"] = s.steps;
    j["dt"] = s.dt;
    if (!s.branches.empty()) {
        j["branches"] = json::array();
        for (const auto& b : s.branches)
            j["branches"].push_back({{"outcome", b.outcome},
                                     {"probability", b.probability},
                                     {"frequency", b.frequency},
                                     {"fidelity", b.fidelity ? json(*b.fidelity) : json(nullptr)},
                                     {"target", b.target}});
    }
    return j;
}

// ---------------------------------------------------------------- run / sweep

namespace detail {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error(std::string("stage ") + name + ": " + e.what());
    }
}

inline std::vector<BranchStat> measure(const SchemeModel& s, const MeasurementPlan& m, const QuantumState& psi,
                                       const std::string& default_target) {
    const auto P = parity_operator(s, m.modes);
    auto target_for = [&](int o) {
        auto it = m.targets.find(o);
        return it == m.targets.end() ? default_target : it->second;
    };
    auto fidelity = [&](const QuantumState& c, int o) { return population(c, bell_target(s, target_for(o))); };
    std::vector<BranchStat> out;
    if (m.mode == MeasurementPlan::Mode::forced) {
        auto r = measure_parity(psi, P, m.outcome);
        out.push_back({r.outcome, r.probability, 1.0, fidelity(r.collapsed, r.outcome), target_for(r.outcome)});
        return out;
    }
    auto br = parity_branches(psi, P);
    std::map<int, std::size_t> counts;
    if (m.mode == MeasurementPlan::Mode::sampled) {
        std::mt19937_64 rng(m.seed);
        for (std::size_t i = 0; i < m.shots; ++i) ++counts[uniform01(rng) < br[0].probability ? 1 : -1];
    }
    for (const auto& b : br) {
        BranchStat st{b.outcome, b.probability, b.probability, std::nullopt, target_for(b.outcome)};
        if (m.mode == MeasurementPlan::Mode::sampled)
            st.frequency = static_cast<double>(counts[b.outcome]) / static_cast<double>(m.shots);
        if (b.collapsed) st.fidelity = fidelity(*b.collapsed, b.outcome);
        out.push_back(st);
    }
    return out;
}

}  // namespace detail

inline RunResult run(const ExperimentConfig& config) {
    RunResult res;
    res.config = config;
    const auto scheme = detail::stage("build", [&] {
        validate(config);
        return build_scheme(config.scheme, config.params);
    });
    auto ctl = detail::stage("evolve", [&] {
        auto psi0 = config.initial_state.empty() ? QuantumState::basis_state(scheme.basis, 0)
                                                 : scheme.basis_state(config.initial_state);
        RunOptions opt;
        opt.report_target = config.target;
        opt.stop = config.stop;
        opt.passage_threshold = config.passage_threshold;
        return run_controlled_evolution(scheme, config.fields, psi0, config.grid, opt);
    });
    res.trajectory = std::move(ctl.trajectory);
    res.diagnostics = std::move(ctl.diagnostics);
    const auto& tr = res.trajectory;
    auto& s = res.summary;
    s.name = config.name;
    s.labels = scheme.basis->labels;
    s.final_populations = tr.populations.back();
    s.final_fidelity = tr.target_population.back();
    if (res.diagnostics.first_passage) s.first_passage = *res.diagnostics.first_passage - config.grid.t_start;
    s.v_min = *std::min_element(tr.lyapunov.begin(), tr.lyapunov.end());
    s.v_max = *std::max_element(tr.lyapunov.begin(), tr.lyapunov.end());
    s.max_v_increase = res.diagnostics.max_lyapunov_increase;
    s.switch_count = res.diagnostics.switch_count;
    s.steps = tr.size() - 1;
    s.dt = config.grid.step();
    const auto P = total_parity(scheme.basis);
    const double p0 = expectation(P, tr.states.front()).real();
    for (const auto& st : tr.states) {
        s.norm_drift = std::max(s.norm_drift, std::abs(st.norm() - 1.0));
        s.parity_drift = std::max(s.parity_drift, std::abs(expectation(P, st).real() - p0));
    }
    if (config.measurement)
        s.branches = detail::stage("measure", [&] {
            return detail::measure(scheme, *config.measurement, tr.states.back(), config.target);
        });
    return res;
}

// Writes <dir>/<name>.csv (+ .svg), the effective config and the summary.
inline void write_artifacts(const RunResult& r, const std::filesystem::path& dir) {
    detail::stage("emit", [&] {
        std::filesystem::create_directories(dir);
        const auto base = dir / r.config.name;
        if (r.config.write_csv) emit_csv(r.trajectory, base.string() + ".csv");
        if (r.config.write_svg) emit_svg(r.trajectory, base.string() + ".svg", r.config.name);
        std::ofstream(base.string() + ".config.json") << to_json(r.config).dump(2) << '\n';
        std::ofstream(base.string() + ".summary.json") << to_json(r.summary).dump(2) << '\n';
        return 0;
    });
}

namespace detail {

inline std::string pointer_of(const std::string& path) {
    if (!path.empty() && path.front() == '/') return path;
    std::string p = "/" + path;
    std::replace(p.begin(), p.end(), '.', '/');
    return p;
}

}  // namespace detail

// Copy of `config` with the scalar at `path` (e.g. "params.epsilon" or "/grid/dt") replaced.
inline ExperimentConfig with_value(const ExperimentConfig& config, const std::string& path, double value) {
    json j = to_json(config);
    json::json_pointer ptr(detail::pointer_of(path));
    if (!j.contains(ptr)) throw Error("config has no entry at '" + path + "'");
    const auto& cur = j.at(ptr);
    if (cur.is_object() || cur.is_array() || cur.is_string() || cur.is_boolean())
        throw Error("sweep path '" + path + "' does not address a numeric scalar");
    j[ptr] = value;
    return config_from_json(j);
}

inline std::vector<RunSummary> sweep(const ExperimentConfig& config, const std::string& path,
                                     const std::vector<double>& values) {
    std::vector<ExperimentConfig> cfgs;
    for (double v : values) cfgs.push_back(with_value(config, path, v));
    std::vector<std::future<RunSummary>> jobs;
    for (const auto& c : cfgs) jobs.push_back(std::async(std::launch::async, [&c] { return run(c).summary; }));
    std::vector<RunSummary> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

struct EigenRow {
    double value;
    std::vector<double> energies;                 // two lowest
    std::vector<std::vector<double>> amplitudes;  // [eigenvector][basis], phase-fixed real parts
};

inline std::vector<EigenRow> eigen_sweep(const ExperimentConfig& config, const std::string& path,
                                         const std::vector<double>& values) {
    std::vector<EigenRow> out;
    for (double v : values) {
        auto c = with_value(config, path, v);
        auto s = build_scheme(c.scheme, c.params);
        auto es = hermitian_eigensolve(s.H0);
        EigenRow row{v, {}, {}};
        for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, es.vectors.cols()); ++k) {
            row.energies.push_back(es.values[static_cast<std::size_t>(k)]);
            std::vector<double> a;
            for (Eigen::Index i = 0; i < es.vectors.rows(); ++i) a.push_back(es.vectors(i, k).real());
            row.amplitudes.push_back(std::move(a));
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline void write_sweep_csv(const std::vector<double>& values, const std::vector<RunSummary>& rows,
                            const std::string& path, std::ostream& os) {
    os << path << ",final_fidelity,first_passage,V_min,V_max,max_V_increase";
    std::size_t nb = 0;
    if (!rows.empty()) {
        nb = rows.front().labels.size();
        for (const auto& l : rows.front().labels) os << ",pop" << l;
    }
    os << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << detail::fmt(values[i]) << ',' << detail::fmt(r.final_fidelity) << ','
           << (r.first_passage ? detail::fmt(*r.first_passage) : std::string("nan")) << ',' << detail::fmt(r.v_min)
           << ',' << detail::fmt(r.v_max) << ',' << detail::fmt(r.max_v_increase);
        for (std::size_t k = 0; k < nb; ++k) os << ',' << detail::fmt(r.final_populations[k]);
        os << '\n';
    }
}

inline void write_eigen_csv(const std::vector<EigenRow>& rows, const std::vector<std::string>& labels,
                            const std::string& path, std::ostream& os) {
    os << path << ",E0,E1";
    for (int k = 0; k < 2; ++k)
        for (const auto& l : labels) os << ",v" << k << l;
    os << '\n';
    for (const auto& r : rows) {
        os << detail::fmt(r.value);
        for (double e : r.energies) os << ',' << detail::fmt(e);
        for (const auto& a : r.amplitudes)
            for (double x : a) os << ',' << detail::fmt(x);
        os << '\n';
    }
}

}  // namespace majorana
