#pragma once

#include "dynamics.hpp"
#include "fock.hpp"
#include "schemes.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace majorana {

inline double lyapunov_value(const QuantumState& state, const QuantumState& target) {
    return std::clamp(1.0 - population(state, target), 0.0, 1.0);
}

inline constexpr double kOverlapDeadband = 1e-10;

// Feedback law f = B Im[e^{i arg<psi|T>} <T|H_k|psi>]. With this sign
// dV/dt = -2 B |<psi|T>| Im[...]^2 <= 0 whenever T is stationary under H0.
inline double lyapunov_field(const QuantumState& state, const QuantumState& target, const Operator& Hk, double Bk) {
    if (!(Bk >= 0)) throw Error("Lyapunov gain must be non-negative");
    if (!same_basis(Hk.basis(), state.basis())) throw Error("control operator basis mismatch");
    const cplx ov = state.inner(target);  // <psi|T>
    const double mag = std::abs(ov);
    if (mag < kOverlapDeadband || Bk == 0.0) return 0.0;
    const cplx hk = target.amplitudes().dot(Hk.matrix() * state.amplitudes());  // <T|H_k|psi>
    return Bk * std::imag(ov / mag * hk);
}

inline double bang_bang_field(double raw, double F, double deadband) {
    if (!(F > 0)) throw Error("bang-bang amplitude must be positive");
    if (!(deadband >= 0)) throw Error("bang-bang deadband must be non-negative");
    if (raw > deadband) return F;
    if (raw < -deadband) return -F;
    return 0.0;
}

struct ControlField {
    enum class Kind { constant, linear_ramp, lyapunov, bang_bang };
    Kind kind = Kind::constant;

    double value = 0.0;  // constant

    double slope = 0.0;  // linear_ramp
    double intercept = 0.0;
    std::optional<std::pair<double, double>> window;
    bool clamp = false;

    double gain = 1.0;       // lyapunov, and the inner rule of bang_bang
    std::string target;      // scheme target label; empty = default
    bool stationary = true;  // feed back towards the H0-stationary part of the target

    double amplitude = 0.0;  // bang_bang
    std::optional<double> deadband;

    static ControlField constant(double v) {
        ControlField f;
        f.value = v;
        return f;
    }
    static ControlField ramp(double slope, double intercept, std::optional<std::pair<double, double>> window = {},
                             bool clamp = false) {
        if (window && !(window->first <= window->second)) throw Error("ramp window is not well-ordered");
        ControlField f;
        f.kind = Kind::linear_ramp;
        f.slope = slope;
        f.intercept = intercept;
        f.window = window;
        f.clamp = clamp;
        return f;
    }
    static ControlField lyapunov(double gain, std::string target = "") {
        if (!(gain >= 0)) throw Error("Lyapunov gain must be non-negative");
        ControlField f;
        f.kind = Kind::lyapunov;
        f.gain = gain;
        f.target = std::move(target);
        return f;
    }
    static ControlField bang_bang(double F, std::string target = "", std::optional<double> deadband = {},
                                  double gain = 1.0) {
        if (!(F > 0)) throw Error("bang-bang amplitude must be positive");
        ControlField f;
        f.kind = Kind::bang_bang;
        f.amplitude = F;
        f.deadband = deadband;
        f.gain = gain;
        f.target = std::move(target);
        return f;
    }

    bool feedback() const { return kind == Kind::lyapunov || kind == Kind::bang_bang; }
    double effective_deadband() const { return deadband.value_or(1e-8 * amplitude); }

    // Open-loop amplitude at time t.
    double at(double t) const {
        if (kind == Kind::constant) return value;
        if (kind != Kind::linear_ramp) throw Error("feedback field has no open-loop value");
        if (window) {
            const auto [a, b] = *window;
            if (t < a) return clamp ? slope * a + intercept : 0.0;
            if (t > b) return clamp ? slope * b + intercept : 0.0;
        }
        return slope * t + intercept;
    }
};

inline ControlField linear_ramp(double slope, double intercept, std::pair<double, double> window, bool clamp) {
    return ControlField::ramp(slope, intercept, window, clamp);
}

// A field driving one or more scheme controls with a shared amplitude (tying f1 = f2).
struct FieldChannel {
    std::vector<std::string> controls;
    ControlField field;
    std::string label;  // defaults to the joined control labels
};

struct StationaryTarget {
    QuantumState state;
    double weight = 0.0;  // |projection|^2 of the original target
};

// Normalized projection of `target` onto the H0 eigenspace carrying most of its weight.
inline StationaryTarget stationary_target(const Operator& H0, const QuantumState& target, double tol = 1e-8) {
    auto es = hermitian_eigensolve(H0);
    const auto n = static_cast<Eigen::Index>(es.values.size());
    const double scale = std::max(1.0, H0.matrix().cwiseAbs().maxCoeff());
    StationaryTarget best{target, -1.0};
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i + 1;
        while (j < n && es.values[static_cast<std::size_t>(j)] - es.values[static_cast<std::size_t>(i)] < tol * scale)
            ++j;
        Matrix V = es.vectors.middleCols(i, j - i);
        Vector p = V * (V.adjoint() * target.amplitudes());
        double w = p.squaredNorm();
        if (w > best.weight + 1e-12) best = {QuantumState(target.basis(), p / std::sqrt(w)), w};
        i = j;
    }
    return best;
}

struct ControllerDiagnostics {
    std::vector<double> lyapunov;
    std::optional<double> first_passage;
    double passage_threshold = 0.9;
    std::size_t switch_count = 0;
    double max_lyapunov_increase = 0.0;  // largest V(t_{n+1}) - V(t_n)
};

struct StopCriterion {
    double population = 0.999;
};

struct ControlledRun {
    Trajectory trajectory;
    ControllerDiagnostics diagnostics;
    std::optional<QuantumState> feedback_target;
};

struct RunOptions {
    std::string report_target;  // population is reported against this scheme target
    std::optional<StopCriterion> stop;
    double passage_threshold = 0.9;
};

namespace detail {

inline int sgn(double x) { return (x > 0) - (x < 0); }

inline constexpr int kMaxSwitchesPerStep = 16;

struct SwitchedStep {
    QuantumState state;
    std::vector<double> mean_field;  // duration-weighted amplitude over the step
};

// Advances psi by h under piecewise-constant levels, splitting the step at every level change
// (located by bisection). `raw_of` returns the unsaturated switching functions, `levels_of`
// the saturated levels. When a single channel slides along a switching surface (each level
// drives the switching function back towards the other), the step uses the equivalent
// amplitude between the two levels that keeps the switching function on the surface.
template <class Raw, class Levels>
SwitchedStep switched_step(const Operator& H0, const std::vector<Operator>& Hs, std::vector<double> level,
                           QuantumState psi, double h, Raw&& raw_of, Levels&& levels_of,
                           const std::vector<double>& thresholds, std::size_t& switches) {
    std::vector<double> mean(level.size(), 0.0);
    auto accumulate = [&](const std::vector<double>& f, double dur) {
        for (std::size_t k = 0; k < f.size(); ++k) mean[k] += f[k] * dur / h;
    };
    auto propagator = [&](const std::vector<double>& f, const QuantumState& from) {
        auto es = hermitian_eigensolve(drive_hamiltonian(H0, Hs, f));
        Vector c = es.vectors.adjoint() * from.amplitudes();
        return [es = std::move(es), c = std::move(c), basis = from.basis()](double s) {
            const auto n = static_cast<Eigen::Index>(es.values.size());
            Vector ph(n);
            for (Eigen::Index k = 0; k < n; ++k)
                ph(k) = std::exp(cplx(0.0, -es.values[static_cast<std::size_t>(k)] * s)) * c(k);
            return QuantumState(basis, es.vectors * ph);
        };
    };
    double rem = h;
    for (int events = 0;; ++events) {
        auto prop = propagator(level, psi);
        QuantumState end = prop(rem);
        if (events >= kMaxSwitchesPerStep || levels_of(end) == level) {
            accumulate(level, rem);
            return {end, mean};
        }
        double lo = 0.0, hi = rem;
        while (hi - lo > 1e-13 * h) {
            const double mid = 0.5 * (lo + hi);
            (levels_of(prop(mid)) == level ? lo : hi) = mid;
        }
        auto next = levels_of(prop(hi));
        if (next == level) {  // crossing not resolvable; hold the level
            accumulate(level, rem);
            return {end, mean};
        }
        accumulate(level, hi);
        psi = prop(hi);
        rem -= hi;
        ++switches;
        if (rem <= 0.0) return {psi, mean};

        // sliding test for a single switching channel
        std::size_t ch = level.size();
        int changed = 0;
        for (std::size_t k = 0; k < level.size(); ++k)
            if (next[k] != level[k]) {
                ch = k;
                ++changed;
            }
        if (changed == 1) {
            const double eta = 1e-6 * h;
            const double r0 = raw_of(psi)[ch];
            const double d_old = raw_of(propagator(level, psi)(eta))[ch] - r0;
            const double d_new = raw_of(propagator(next, psi)(eta))[ch] - r0;
            if (d_old * d_new < 0) {
                // the surface is the threshold between the two levels' regions
                const double lo_lvl = std::min(level[ch], next[ch]), hi_lvl = std::max(level[ch], next[ch]);
                const double surface = hi_lvl > 0 ? thresholds[ch] : -thresholds[ch];
                auto g = [&](double fch) {
                    auto f = level;
                    f[ch] = fch;
                    return raw_of(propagator(f, psi)(rem))[ch] - surface;
                };
                double a = lo_lvl, b = hi_lvl, ga = g(a), gb = g(b);
                if (ga * gb < 0) {
                    for (int it = 0; it < 100 && b - a > 1e-13 * (hi_lvl - lo_lvl); ++it) {
                        const double m = 0.5 * (a + b);
                        const double gm = g(m);
                        if (gm == 0) {
                            a = b = m;
                            break;
                        }
                        ((gm < 0) == (ga < 0) ? a : b) = m;
                        if ((gm < 0) == (ga < 0)) ga = gm;
                    }
                    auto f = level;
                    f[ch] = 0.5 * (a + b);
                    accumulate(f, rem);
                    return {propagator(f, psi)(rem), mean};
                }
            }
        }
        level = std::move(next);
    }
}

}  // namespace detail

inline ControlledRun run_controlled_evolution(const SchemeModel& scheme, const std::vector<FieldChannel>& channels,
                                              const QuantumState& psi0, const TimeGrid& grid,
                                              const RunOptions& opt = {}) {
    if (!same_basis(psi0.basis(), scheme.basis)) throw Error("initial state is not on the scheme basis");
    const auto reported = bell_target(scheme, opt.report_target);

    struct Prepared {
        const ControlField* field;
        Operator H;
        std::optional<QuantumState> target;
    };
    std::vector<Prepared> prep;
    std::vector<Operator> Hs;
    ControlledRun out;
    Trajectory& tr = out.trajectory;
    tr.basis = scheme.basis;
    for (const auto& ch : channels) {
        if (ch.controls.empty()) throw Error("field channel drives no control");
        Operator H = scheme.control(ch.controls.front());
        std::string label = ch.controls.front();
        for (std::size_t i = 1; i < ch.controls.size(); ++i) {
            H = H + scheme.control(ch.controls[i]);
            label += "+" + ch.controls[i];
        }
        Prepared p{&ch.field, H, std::nullopt};
        if (ch.field.feedback()) {
            auto t = bell_target(scheme, ch.field.target);
            p.target = ch.field.stationary ? stationary_target(scheme.H0, t).state : t;
            if (!out.feedback_target) out.feedback_target = p.target;
        }
        prep.push_back(std::move(p));
        Hs.push_back(H);
        tr.field_labels.push_back(ch.label.empty() ? label : ch.label);
    }
    const QuantumState lyap_target = out.feedback_target.value_or(reported);

    // unsaturated feedback values; open-loop channels report their value
    auto raw_fields = [&](const QuantumState& psi) {
        std::vector<double> r(prep.size(), 0.0);
        for (std::size_t k = 0; k < prep.size(); ++k)
            r[k] = prep[k].field->feedback() ? lyapunov_field(psi, *prep[k].target, prep[k].H, prep[k].field->gain)
                                             : prep[k].field->value;
        return r;
    };
    std::vector<double> thresholds;
    for (const auto& p : prep) thresholds.push_back(p.field->kind == ControlField::Kind::bang_bang ? p.field->effective_deadband() : 0.0);
    auto amplitudes = [&](double t, const QuantumState& psi) {
        std::vector<double> f(prep.size(), 0.0);
        for (std::size_t k = 0; k < prep.size(); ++k) {
            const auto& fld = *prep[k].field;
            if (!fld.feedback()) {
                f[k] = fld.at(t);
                continue;
            }
            double raw = lyapunov_field(psi, *prep[k].target, prep[k].H, fld.gain);
            f[k] = fld.kind == ControlField::Kind::bang_bang
                       ? bang_bang_field(raw, fld.amplitude, fld.effective_deadband())
                       : raw;
        }
        return f;
    };
    const bool any_feedback = out.feedback_target.has_value();
    // Square pulses with constant companions are piecewise constant in time: propagate them
    // exactly and locate each switch inside the step instead of snapping it to the grid.
    bool exact_switching = any_feedback;
    for (const auto& p : prep)
        if (p.field->kind != ControlField::Kind::bang_bang && p.field->kind != ControlField::Kind::constant)
            exact_switching = false;

    const std::size_t n = grid.steps();
    const double h = grid.step();
    QuantumState psi = psi0;
    auto& dg = out.diagnostics;
    dg.passage_threshold = opt.passage_threshold;
    std::vector<double> prev;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.time(i);
        auto f = amplitudes(t + h / 2, psi);
        if (any_feedback && !exact_switching) {
            // sample the feedback at the predicted step midpoint, then hold it for the step
            auto mid = apply(propagator_step(drive_hamiltonian(scheme.H0, Hs, f), h / 2), psi);
            f = amplitudes(t + h / 2, mid);
        }
        detail::record(tr, t, psi, reported, lyap_target, f);
        if (!dg.first_passage && tr.target_population.back() >= opt.passage_threshold) dg.first_passage = t;
        if (opt.stop && tr.target_population.back() >= opt.stop->population) break;
        if (exact_switching) {
            auto levels_of = [&](const QuantumState& x) { return amplitudes(t, x); };
            auto st = detail::switched_step(scheme.H0, Hs, f, psi, h, raw_fields, levels_of, thresholds,
                                            dg.switch_count);
            psi = std::move(st.state);
            tr.fields.back() = std::move(st.mean_field);
        } else {
            for (std::size_t k = 0; k < f.size() && !prev.empty(); ++k)
                if (prep[k].field->kind == ControlField::Kind::bang_bang && detail::sgn(f[k]) != detail::sgn(prev[k]))
                    ++dg.switch_count;
            prev = f;
            psi = apply(propagator_step(drive_hamiltonian(scheme.H0, Hs, f), h), psi);
        }
        if (i + 1 == n) {
            detail::record(tr, grid.t_end, psi, reported, lyap_target, amplitudes(grid.t_end, psi));
            if (!dg.first_passage && tr.target_population.back() >= opt.passage_threshold)
                dg.first_passage = grid.t_end;
        }
    }
    dg.lyapunov = tr.lyapunov;
    for (std::size_t i = 1; i < dg.lyapunov.size(); ++i)
        dg.max_lyapunov_increase = std::max(dg.max_lyapunov_increase, dg.lyapunov[i] - dg.lyapunov[i - 1]);
    return out;
}

// One ControlField per scheme control, in control order.
inline Trajectory evolve(const SchemeModel& scheme, const std::vector<ControlField>& fields, const QuantumState& psi0,
                         const TimeGrid& grid, const std::string& target = "") {
    if (fields.size() != scheme.controls.size())
        throw Error("evolve needs one field per control (" + std::to_string(scheme.controls.size()) + "), got " +
                    std::to_string(fields.size()));
    std::vector<FieldChannel> ch;
    for (std::size_t k = 0; k < fields.size(); ++k) ch.push_back({{scheme.controls[k].first}, fields[k], ""});
    RunOptions opt;
    opt.report_target = target;
    return run_controlled_evolution(scheme, ch, psi0, grid, opt).trajectory;
}

}  // namespace majorana
