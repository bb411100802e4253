#pragma once

#include "fock.hpp"
#include "schemes.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace majorana {

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    double dt = 0.01;

    // Number of steps; dt is shrunk slightly when it does not divide the span.
    std::size_t steps() const {
        validate();
        double n = std::ceil((t_end - t_start) / dt - 1e-9);
        return static_cast<std::size_t>(std::max(1.0, n));
    }
    double step() const { return (t_end - t_start) / static_cast<double>(steps()); }
    double time(std::size_t i) const { return t_start + step() * static_cast<double>(i); }

    void validate() const {
        if (!(dt > 0) || !std::isfinite(dt)) throw Error("time grid needs dt > 0");
        if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_end > t_start))
            throw Error("time grid needs finite t_end > t_start");
        if ((t_end - t_start) / dt > 1e8) throw Error("time grid has too many steps");
    }
};

struct Trajectory {
    BasisPtr basis;
    std::vector<double> times;
    std::vector<QuantumState> states;
    std::vector<std::vector<double>> populations;  // [time][basis]
    std::vector<double> target_population;         // against the reported (Bell) target
    std::vector<double> lyapunov;                  // against the feedback target, or the reported one
    std::vector<std::string> field_labels;
    std::vector<std::vector<double>> fields;       // [time][field]; amplitude applied from times[i]

    std::size_t size() const { return times.size(); }
};

inline double population(const QuantumState& state, const QuantumState& target) {
    return std::norm(target.inner(state));
}

inline std::vector<double> basis_populations(const QuantumState& s) {
    std::vector<double> p(s.dimension());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(s[i]);
    return p;
}

inline Operator propagator_step(const Operator& H, double dt) {
    auto es = hermitian_eigensolve(H);  // rejects non-Hermitian input
    const auto n = static_cast<Eigen::Index>(es.values.size());
    Vector ph(n);
    for (Eigen::Index i = 0; i < n; ++i) ph(i) = std::exp(cplx(0.0, -es.values[static_cast<std::size_t>(i)] * dt));
    // re-orthonormalize: cuts the systematic norm creep over 1e5+ steps by ~3x
    Eigen::HouseholderQR<Matrix> qr(es.vectors);
    Matrix Q = qr.householderQ();
    for (Eigen::Index k = 0; k < n; ++k) {
        const cplx r = qr.matrixQR()(k, k);
        if (std::abs(r) > 0) Q.col(k) *= r / std::abs(r);
    }
    return Operator(H.basis(), Q * ph.asDiagonal() * Q.adjoint());
}

inline Operator drive_hamiltonian(const Operator& H0, const std::vector<Operator>& Hk, const std::vector<double>& f) {
    Matrix m = H0.matrix();
    for (std::size_t k = 0; k < Hk.size(); ++k)
        if (f[k] != 0.0) m += f[k] * Hk[k].matrix();
    return Operator(H0.basis(), std::move(m));
}

using TimeField = std::function<double(double)>;

namespace detail {

inline void record(Trajectory& tr, double t, const QuantumState& psi, const QuantumState& reported,
                   const QuantumState& lyap_target, std::vector<double> f) {
    tr.times.push_back(t);
    tr.populations.push_back(basis_populations(psi));
    tr.target_population.push_back(population(psi, reported));
    tr.lyapunov.push_back(1.0 - population(psi, lyap_target));
    tr.fields.push_back(std::move(f));
    tr.states.push_back(psi);
}

}  // namespace detail

// Open-loop evolution: one time function per scheme control (empty = zero), sampled at step midpoints.
inline Trajectory evolve(const SchemeModel& scheme, const std::vector<TimeField>& fields, const QuantumState& psi0,
                         const TimeGrid& grid, const std::string& target = "") {
    if (fields.size() != scheme.controls.size())
        throw Error("evolve needs one field per control (" + std::to_string(scheme.controls.size()) + "), got " +
                    std::to_string(fields.size()));
    if (!same_basis(psi0.basis(), scheme.basis)) throw Error("initial state is not on the scheme basis");
    const auto tgt = bell_target(scheme, target);
    std::vector<Operator> Hk;
    Trajectory tr;
    tr.basis = scheme.basis;
    for (const auto& [l, op] : scheme.controls) {
        Hk.push_back(op);
        tr.field_labels.push_back(l);
    }
    auto sample = [&](double t) {
        std::vector<double> f(fields.size(), 0.0);
        for (std::size_t k = 0; k < fields.size(); ++k)
            if (fields[k]) f[k] = fields[k](t);
        return f;
    };
    const std::size_t n = grid.steps();
    const double h = grid.step();
    QuantumState psi = psi0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid.time(i);
        auto f = sample(t + h / 2);
        detail::record(tr, t, psi, tgt, tgt, f);
        psi = apply(propagator_step(drive_hamiltonian(scheme.H0, Hk, f), h), psi);
    }
    detail::record(tr, grid.t_end, psi, tgt, tgt, sample(grid.t_end));
    return tr;
}

// Diagonal +1/-1 operator: +1 when the listed modes hold an even number of fermions.
inline Operator parity_operator(const ModeRegister& reg, const std::vector<std::string>& modes,
                                const BasisPtr& on = nullptr) {
    if (modes.empty()) throw Error("parity needs at least one mode");
    std::vector<std::size_t> idx;
    for (const auto& m : modes) idx.push_back(reg.mode_index(m));
    const BasisPtr b = on ? on : reg.basis();
    Vector d(static_cast<Eigen::Index>(b->size()));
    for (std::size_t i = 0; i < b->size(); ++i) {
        int n = 0;
        for (auto k : idx) n += b->states[i].occupations[k];
        d(static_cast<Eigen::Index>(i)) = (n % 2) ? -1.0 : 1.0;
    }
    return Operator(b, d.asDiagonal());
}

inline Operator parity_operator(const SchemeModel& scheme, const std::vector<std::string>& modes) {
    return parity_operator(scheme.reg, modes, scheme.basis);
}

struct MeasurementResult {
    int outcome = 1;
    double probability = 0.0;
    QuantumState collapsed;
};

namespace detail {

inline void check_parity(const Operator& parity, const QuantumState& s) {
    if (!same_basis(parity.basis(), s.basis())) throw Error("parity operator basis mismatch");
    const Matrix& m = parity.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            cplx v = m(i, j);
            bool ok = (i == j) ? (std::abs(v - 1.0) < 1e-12 || std::abs(v + 1.0) < 1e-12) : std::abs(v) < 1e-12;
            if (!ok) throw Error("parity operator must be diagonal with entries +1/-1");
        }
}

inline double outcome_probability(const Operator& parity, const QuantumState& s, int outcome) {
    double p = 0.0;
    for (Eigen::Index i = 0; i < parity.matrix().rows(); ++i)
        if ((parity.matrix()(i, i).real() > 0) == (outcome > 0)) p += std::norm(s.amplitudes()(i));
    return p;
}

inline QuantumState project_outcome(const Operator& parity, const QuantumState& s, int outcome) {
    Vector v = s.amplitudes();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if ((parity.matrix()(i, i).real() > 0) != (outcome > 0)) v(i) = 0.0;
    return QuantumState::normalized(s.basis(), v);
}

// Uniform [0,1) from a 64-bit engine, identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

inline MeasurementResult measure_parity(const QuantumState& state, const Operator& parity, int outcome) {
    detail::check_parity(parity, state);
    if (outcome != 1 && outcome != -1) throw Error("parity outcome must be +1 or -1");
    const double p = detail::outcome_probability(parity, state, outcome);
    if (p < 1e-12) throw Error("forced parity outcome has zero probability");
    return {outcome, p, detail::project_outcome(parity, state, outcome)};
}

// Unforced: the outcome is drawn from the Born rule with the given seed.
inline MeasurementResult measure_parity(const QuantumState& state, const Operator& parity, std::optional<int> outcome,
                                        std::uint64_t seed) {
    if (outcome) return measure_parity(state, parity, *outcome);
    detail::check_parity(parity, state);
    std::mt19937_64 rng(seed);
    const double p_even = detail::outcome_probability(parity, state, 1);
    return measure_parity(state, parity, detail::uniform01(rng) < p_even ? 1 : -1);
}

struct Branch {
    int outcome;
    double probability;
    std::optional<QuantumState> collapsed;  // absent when the outcome is impossible
};

inline std::vector<Branch> parity_branches(const QuantumState& state, const Operator& parity) {
    detail::check_parity(parity, state);
    std::vector<Branch> out;
    for (int o : {1, -1}) {
        double p = detail::outcome_probability(parity, state, o);
        Branch b{o, p, std::nullopt};
        if (p >= 1e-12) b.collapsed = detail::project_outcome(parity, state, o);
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace majorana
