#pragma once

#include "fock.hpp"

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace majorana {

// Energies in units of the tunnel coupling lambda.
struct SchemeParams {
    double epsilon = 5.0;
    std::optional<double> epsilon2;  // second dot; defaults per scheme when absent
    double E_c = 30.0;
    double E_J = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double lambda4 = 1.0;
    double n_g = 1.0;
    double t_flip = 1.0;
};

struct SchemeModel {
    std::string name;
    ModeRegister reg;
    BasisPtr basis;
    Operator H0;
    Operator H0_full;  // same Hamiltonian on the whole register
    std::vector<std::pair<std::string, Operator>> controls;
    std::vector<std::pair<std::string, QuantumState>> targets;  // first is the default
    std::vector<std::string> wire_modes;                         // parity-measurable modes
    SchemeParams params;

    const Operator& control(const std::string& label) const {
        for (const auto& [l, op] : controls)
            if (l == label) return op;
        throw Error("scheme '" + name + "' has no control '" + label + "'");
    }

    std::size_t index_of_label(const std::string& label) const {
        std::string want = label;
        if (want.empty() || want.front() != '|') want = "|" + want;
        if (want.back() != '>') want += ">";
        for (std::size_t i = 0; i < basis->labels.size(); ++i)
            if (basis->labels[i] == want) return i;
        throw Error("scheme '" + name + "' has no basis state " + want);
    }

    QuantumState basis_state(const std::string& label) const {
        return QuantumState::basis_state(basis, index_of_label(label));
    }
};

inline QuantumState bell_target(const SchemeModel& scheme, const std::string& which = "") {
    if (scheme.targets.empty()) throw Error("scheme '" + scheme.name + "' has no targets");
    if (which.empty()) return scheme.targets.front().second;
    for (const auto& [l, s] : scheme.targets)
        if (l == which) return s;
    std::string valid;
    for (const auto& [l, s] : scheme.targets) valid += (valid.empty() ? "" : ", ") + l;
    throw Error("unknown target '" + which + "' for scheme '" + scheme.name + "' (valid: " + valid + ")");
}

// Total fermion parity (+1 even) on an arbitrary basis.
inline Operator total_parity(const BasisPtr& basis) {
    Vector d(static_cast<Eigen::Index>(basis->size()));
    for (std::size_t i = 0; i < basis->size(); ++i)
        d(static_cast<Eigen::Index>(i)) = (basis->states[i].fermion_number() % 2) ? -1.0 : 1.0;
    return Operator(basis, d.asDiagonal());
}

namespace detail {

inline BasisPtr make_basis(std::vector<BasisState> states, std::vector<std::string> labels) {
    auto b = std::make_shared<Basis>();
    b->states = std::move(states);
    b->labels = std::move(labels);
    return b;
}

inline QuantumState superposition(const BasisPtr& b, const std::vector<std::pair<std::size_t, double>>& terms) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(b->size()));
    for (auto [i, a] : terms) v(static_cast<Eigen::Index>(i)) = a;
    return QuantumState::normalized(b, v);
}

// One wire between two dots (teleportation, Josephson, CAR). Mode order d1, f, d2: the
// Jordan-Wigner string through f gives the far dot its relative tunnelling sign, so every
// tunnel term is written with the same sign:
//   E_c (2N_c - n_g + n_f)^2 + eps1 n1 + eps2 n2 + E_J cos(phi)
//   + sum_n lambda_n (f^dag + e^{-i phi} f) d_n + h.c.
struct ChargeModel {
    ModeRegister reg;
    Operator H;
    Operator n1, n2, cos_phi;
};

inline ChargeModel charge_model(const SchemeParams& p, double eps1, double eps2, std::pair<int, int> crange) {
    ChargeModel m{make_register({"d1", "f", "d2"}, crange), {}, {}, {}, {}};
    const auto& r = m.reg;
    const auto I = Operator::identity(r.basis());
    const auto fd = creation_op(r, "f");
    const auto f = fd.adjoint();
    const auto Sp = cooper_shift_op(r, +1);
    const auto Sm = cooper_shift_op(r, -1);
    const auto nf = number_op(r, "f");
    m.n1 = number_op(r, "d1");
    m.n2 = number_op(r, "d2");
    m.cos_phi = 0.5 * (Sp + Sm);
    const auto Q = 2.0 * cooper_number_op(r) - p.n_g * I + nf;
    Operator H = p.E_c * (Q * Q) + eps1 * m.n1 + eps2 * m.n2 + p.E_J * m.cos_phi;
    const std::array<std::pair<std::string, double>, 2> dots{{{"d1", p.lambda1}, {"d2", p.lambda2}}};
    for (const auto& [dot, lam] : dots) {
        Operator t = lam * ((fd + Sp * f) * annihilation_op(r, dot));
        H = H + t + t.adjoint();
    }
    m.H = H;
    return m;
}

inline SchemeModel finish(std::string name, ModeRegister reg, BasisPtr basis, const Operator& H_full,
                          std::vector<std::pair<std::string, Operator>> full_controls,
                          std::vector<std::string> wires, const SchemeParams& p) {
    SchemeModel s;
    s.name = std::move(name);
    s.reg = std::move(reg);
    s.basis = basis;
    s.H0_full = H_full;
    s.H0 = project_onto(H_full, basis);
    for (auto& [l, op] : full_controls) s.controls.emplace_back(l, project_onto(op, basis));
    s.wire_modes = std::move(wires);
    s.params = p;
    return s;
}

}  // namespace detail

// Closed-form 4x4 teleportation matrix, basis {|0001>,|0110>,|1010>,|1100>}.
inline Matrix teleportation_matrix(double E_c, double eps, double lambda) {
    Matrix m(4, 4);
    m << E_c, -lambda, lambda, 0,
         -lambda, eps, 0, lambda,
         lambda, 0, eps, lambda,
         0, lambda, lambda, E_c + 2 * eps;
    return m;
}

inline SchemeModel build_teleportation(const SchemeParams& params) {
    if (params.E_J != 0.0) throw Error("teleportation model requires E_J = 0 (use the Josephson model)");
    if (params.n_g != 1.0) throw Error("teleportation model requires n_g = 1");
    SchemeParams p = params;
    p.epsilon2 = params.epsilon2.value_or(params.epsilon);
    auto cm = detail::charge_model(p, p.epsilon, *p.epsilon2, {-1, 1});
    const auto& r = cm.reg;
    auto basis = detail::make_basis({r.state({}, 1), r.state({"d2", "f"}, 0), r.state({"d1", "f"}, 0), r.state({"d1", "d2"}, 0)},
                                    {"|0001>", "|0110>", "|1010>", "|1100>"});
    auto s = detail::finish("teleportation", cm.reg, basis, cm.H, {{"H1", cm.n1}, {"H2", cm.n2}}, {"f"}, p);
    s.targets.emplace_back("psi_T", detail::superposition(basis, {{1, -1.0}, {2, 1.0}}));
    return s;
}

struct AnalyticEigenpair {
    double value;
    QuantumState vector;
};

// Closed-form eigensystem of the 4x4 model, in the order E1..E4.
inline std::vector<AnalyticEigenpair> teleportation_analytic_eigs(const SchemeParams& p) {
    if (p.E_J != 0.0 || p.n_g != 1.0) throw Error("analytic eigensystem needs E_J = 0 and n_g = 1");
    const double l = p.lambda1, Ec = p.E_c, e = p.epsilon;
    if (l == 0.0) throw Error("analytic eigensystem needs lambda != 0");
    if (p.lambda2 != l || p.epsilon2.value_or(e) != e) throw Error("analytic eigensystem needs symmetric dots");
    const double A1 = (e - Ec + std::sqrt((Ec - e) * (Ec - e) + 8 * l * l)) / (2 * l);
    const double A2 = (Ec - e + std::sqrt((Ec - e) * (Ec - e) + 8 * l * l)) / (2 * l);
    const double A3 = (Ec + e + std::sqrt((Ec + e) * (Ec + e) + 8 * l * l)) / (2 * l);
    auto b = build_teleportation(p).basis;
    auto vec = [&](double a, double b1, double c, double d) {
        Vector v(4);
        v << a, b1, c, d;
        return QuantumState::normalized(b, v);
    };
    return {
        {e - l * A1, vec(-A1, -1, 1, 0)},
        {Ec + l * A1, vec(A2, -1, 1, 0)},
        {Ec + 2 * e - l * A3, vec(0, -A3 / 2, -A3 / 2, 1)},
        {e + l * A3, vec(0, 1 / A3, 1 / A3, 1)},
    };
}

inline SchemeModel build_teleportation_josephson(const SchemeParams& params) {
    if (params.n_g != 1.0) throw Error("Josephson teleportation model requires n_g = 1");
    SchemeParams p = params;
    p.epsilon2 = params.epsilon2.value_or(params.epsilon);
    auto cm = detail::charge_model(p, p.epsilon, *p.epsilon2, {-1, 2});
    const auto& r = cm.reg;
    auto basis = detail::make_basis(
        {r.state({}, 0), r.state({}, 1), r.state({"d2", "f"}, 0), r.state({"d1", "f"}, 0), r.state({"d1", "d2"}, 0),
         r.state({"d1", "d2"}, 1)},
        {"|0000>", "|0001>", "|0110>", "|1010>", "|1100>", "|1101>"});
    auto s = detail::finish("teleportation_josephson", cm.reg, basis, cm.H,
                            {{"H1", cm.n1}, {"H2", cm.n2}, {"H3", cm.cos_phi}}, {"f"}, p);
    s.targets.emplace_back("psi_T", detail::superposition(basis, {{2, -1.0}, {3, 1.0}}));
    return s;
}

inline SchemeModel build_car(const SchemeParams& params) {
    if (params.n_g != 0.0) throw Error("CAR model requires n_g = 0");
    SchemeParams p = params;
    p.epsilon2 = params.epsilon2.value_or(-params.epsilon);
    auto cm = detail::charge_model(p, p.epsilon, *p.epsilon2, {-2, 2});
    const auto& r = cm.reg;
    auto basis = detail::make_basis(
        {r.state({}, 0), r.state({}, 1), r.state({"d2", "f"}, -1), r.state({"d2", "f"}, 0), r.state({"d1", "f"}, 0),
         r.state({"d1", "f"}, -1), r.state({"d1", "d2"}, -1), r.state({"d1", "d2"}, 0)},
        {"|0000>", "|0001>", "|011-1>", "|0110>", "|1010>", "|101-1>", "|110-1>", "|1100>"});
    auto s = detail::finish("car", cm.reg, basis, cm.H, {{"H1", cm.n1}, {"H2", cm.n2}, {"H3", cm.cos_phi}}, {"f"}, p);
    s.targets.emplace_back("psi_T+", detail::superposition(basis, {{0, 1.0}, {7, 1.0}}));
    s.targets.emplace_back("psi_odd", detail::superposition(basis, {{2, 1.0}, {3, 1.0}}));
    return s;
}

// Spin-resolved dots in the Coulomb-blockade limit. Mode order 1up, 1dn, f, 2up, 2dn.
inline SchemeModel build_spin_flip(const SchemeParams& params) {
    SchemeParams p = params;
    p.epsilon2 = params.epsilon2.value_or(params.epsilon);
    auto r = make_register({"d1u", "d1d", "f", "d2u", "d2d"});
    auto c = [&](const char* m) { return creation_op(r, m); };
    auto a = [&](const char* m) { return annihilation_op(r, m); };
    const auto N1 = number_op(r, "d1u") + number_op(r, "d1d");
    const auto N2 = number_op(r, "d2u") + number_op(r, "d2d");
    Operator H = p.epsilon * N1 + *p.epsilon2 * N2;
    for (auto [up, dn] : {std::pair{"d1u", "d1d"}, std::pair{"d2u", "d2d"}}) {
        Operator t = p.t_flip * (c(up) * a(dn));
        H = H + t + t.adjoint();
    }
    const auto wire = c("f") + a("f");
    Operator tun = p.lambda1 * (wire * a("d1d")) + p.lambda2 * (wire * a("d2u"));
    H = H + tun + tun.adjoint();

    // kets |dot1 dot2 n_f>
    auto st = [&](std::vector<std::string> occ) { return r.state(occ); };
    auto basis = detail::make_basis(
        {st({}), st({"d1d", "f"}), st({"d2u", "f"}), st({"d1u", "f"}), st({"d2d", "f"}), st({"d1d", "d2u"}),
         st({"d1u", "d2u"}), st({"d1u", "d2d"}), st({"d1d", "d2d"})},
        {"|000>", "|↓01>", "|0↑1>", "|↑01>", "|0↓1>", "|↓↑0>", "|↑↑0>",
         "|↑↓0>", "|↓↓0>"});
    auto s = detail::finish("spin_flip", r, basis, H, {{"H1", N1}, {"H2", N2}}, {"f"}, p);
    s.targets.emplace_back("psi_T'", detail::superposition(basis, {{6, 1.0}, {8, -1.0}}));
    return s;
}

// Two wires, spin-resolved dots. Mode order 1up, 1dn, f1, 2up, f2, 2dn so each wire mode sits
// between the two dot modes it couples. Couplings: lambda1 f1-1dn, lambda2 f1-2up,
// lambda3 f2-1up, lambda4 f2-2dn.
inline SchemeModel build_two_wire(const SchemeParams& params) {
    SchemeParams p = params;
    p.epsilon2 = params.epsilon2.value_or(params.epsilon);
    auto r = make_register({"d1u", "d1d", "f1", "d2u", "f2", "d2d"});
    auto c = [&](const char* m) { return creation_op(r, m); };
    auto a = [&](const char* m) { return annihilation_op(r, m); };
    const auto N1 = number_op(r, "d1u") + number_op(r, "d1d");
    const auto N2 = number_op(r, "d2u") + number_op(r, "d2d");
    Operator H = p.epsilon * N1 + *p.epsilon2 * N2;
    const auto w1 = c("f1") + a("f1");
    const auto w2 = c("f2") + a("f2");
    Operator tun = p.lambda1 * (w1 * a("d1d")) + p.lambda2 * (w1 * a("d2u")) + p.lambda3 * (w2 * a("d1u")) +
                   p.lambda4 * (w2 * a("d2d"));
    H = H + tun + tun.adjoint();

    // kets |dot1 dot2 n_f1 n_f2>
    auto st = [&](std::vector<std::string> occ) { return r.state(occ); };
    auto basis = detail::make_basis(
        {st({}), st({"d2d", "f2"}), st({"d1d", "f1"}), st({"d2u", "f1"}), st({"d1u", "f2"}),
         st({"d1d", "d2d", "f1", "f2"}), st({"d1u", "d2d"}), st({"d1d", "d2u"}), st({"d1u", "d2u", "f1", "f2"})},
        {"|0000>", "|0↓01>", "|↓010>", "|0↑10>", "|↑001>", "|↓↓11>",
         "|↑↓00>", "|↓↑00>", "|↑↑11>"});
    auto s = detail::finish("two_wire", r, basis, H, {{"H1", N1}, {"H2", N2}}, {"f1", "f2"}, p);
    s.targets.emplace_back("psi1", detail::superposition(basis, {{5, 1.0}, {8, 1.0}}));
    s.targets.emplace_back("psi2", detail::superposition(basis, {{6, 1.0}, {7, 1.0}}));
    return s;
}

inline const std::vector<std::string>& scheme_names() {
    static const std::vector<std::string> names{"teleportation", "teleportation_josephson", "car", "spin_flip",
                                                "two_wire"};
    return names;
}

inline SchemeModel build_scheme(const std::string& name, const SchemeParams& p) {
    if (name == "teleportation") return build_teleportation(p);
    if (name == "teleportation_josephson") return build_teleportation_josephson(p);
    if (name == "car") return build_car(p);
    if (name == "spin_flip") return build_spin_flip(p);
    if (name == "two_wire") return build_two_wire(p);
    throw Error("unknown scheme '" + name + "'");
}

// Defaults per scheme.
inline SchemeParams default_params(const std::string& name) {
    SchemeParams p;
    if (name == "teleportation") {
        p.E_c = 30; p.epsilon = 5;
    } else if (name == "teleportation_josephson") {
        p.E_c = 20; p.epsilon = 5; p.E_J = 0.5;
    } else if (name == "car") {
        p.E_c = 30; p.epsilon = 5; p.E_J = 1; p.n_g = 0;
    } else if (name == "spin_flip") {
        p.epsilon = -10; p.E_c = 0; p.n_g = 0; p.t_flip = 1;
    } else if (name == "two_wire") {
        p.epsilon = 0; p.E_c = 0; p.n_g = 0;
    } else {
        throw Error("unknown scheme '" + name + "'");
    }
    return p;
}

}  // namespace majorana
