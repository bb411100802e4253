#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace majorana {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BasisState {
    std::vector<std::uint8_t> occupations;
    int cooper_count = 0;

    bool operator==(const BasisState&) const = default;
    auto operator<=>(const BasisState&) const = default;

    int fermion_number() const {
        int n = 0;
        for (auto o : occupations) n += o;
        return n;
    }
};

// Ordered basis with display labels; shared immutably between operators and states.
struct Basis {
    std::vector<BasisState> states;
    std::vector<std::string> labels;

    std::size_t size() const { return states.size(); }

    std::optional<std::size_t> find(const BasisState& s) const {
        auto it = std::find(states.begin(), states.end(), s);
        if (it == states.end()) return std::nullopt;
        return static_cast<std::size_t>(it - states.begin());
    }
};

using BasisPtr = std::shared_ptr<const Basis>;

inline bool same_basis(const BasisPtr& a, const BasisPtr& b) {
    return a == b || (a && b && a->states == b->states);
}

class ModeRegister {
public:
    ModeRegister() = default;

    const std::vector<std::string>& modes() const { return modes_; }
    const std::optional<std::pair<int, int>>& cooper_range() const { return cooper_range_; }
    bool has_cooper() const { return cooper_range_.has_value(); }
    const BasisPtr& basis() const { return basis_; }
    std::size_t dimension() const { return basis_->size(); }

    std::size_t mode_index(const std::string& label) const {
        auto it = std::find(modes_.begin(), modes_.end(), label);
        if (it == modes_.end()) throw Error("unknown mode '" + label + "'");
        return static_cast<std::size_t>(it - modes_.begin());
    }

    std::size_t index_of(const BasisState& s) const {
        auto i = basis_->find(s);
        if (!i) throw Error("basis state not in register: " + label_of(s));
        return *i;
    }

    // State with the named modes occupied and the given Cooper count.
    BasisState state(const std::vector<std::string>& occupied, int cooper = 0) const {
        BasisState s;
        s.occupations.assign(modes_.size(), 0);
        for (const auto& m : occupied) s.occupations[mode_index(m)] = 1;
        s.cooper_count = cooper;
        return s;
    }

    std::string label_of(const BasisState& s) const {
        std::string out = "|";
        for (auto o : s.occupations) out += o ? '1' : '0';
        if (has_cooper()) out += ";" + std::to_string(s.cooper_count);
        return out + ">";
    }

private:
    friend ModeRegister make_register(std::vector<std::string>, std::optional<std::pair<int, int>>);
    std::vector<std::string> modes_;
    std::optional<std::pair<int, int>> cooper_range_;
    BasisPtr basis_;
};

// Canonical enumeration: occupation bits lexicographic (first mode most significant),
// then Cooper count ascending.
inline ModeRegister make_register(std::vector<std::string> fermion_modes,
                                  std::optional<std::pair<int, int>> cooper_range = std::nullopt) {
    for (std::size_t i = 0; i < fermion_modes.size(); ++i)
        for (std::size_t j = i + 1; j < fermion_modes.size(); ++j)
            if (fermion_modes[i] == fermion_modes[j])
                throw Error("duplicate mode label '" + fermion_modes[i] + "'");
    if (cooper_range && cooper_range->first > cooper_range->second)
        throw Error("cooper range is not well-ordered");

    ModeRegister r;
    r.modes_ = std::move(fermion_modes);
    r.cooper_range_ = cooper_range;
    auto b = std::make_shared<Basis>();
    const std::size_t n = r.modes_.size();
    const int cmin = cooper_range ? cooper_range->first : 0;
    const int cmax = cooper_range ? cooper_range->second : 0;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
        BasisState s;
        s.occupations.resize(n);
        for (std::size_t k = 0; k < n; ++k) s.occupations[k] = (bits >> (n - 1 - k)) & 1U;
        for (int c = cmin; c <= cmax; ++c) {
            s.cooper_count = c;
            b->states.push_back(s);
        }
    }
    r.basis_ = b;
    for (const auto& s : b->states) b->labels.push_back(r.label_of(s));
    return r;
}

class Operator {
public:
    Operator() = default;
    Operator(BasisPtr basis, Matrix m) : basis_(std::move(basis)), m_(std::move(m)) {
        if (!basis_) throw Error("operator without basis");
        if (m_.rows() != m_.cols() || static_cast<std::size_t>(m_.rows()) != basis_->size())
            throw Error("operator dimension does not match basis");
    }

    static Operator zero(BasisPtr basis) {
        auto d = static_cast<Eigen::Index>(basis->size());
        return Operator(basis, Matrix::Zero(d, d));
    }
    static Operator identity(BasisPtr basis) {
        auto d = static_cast<Eigen::Index>(basis->size());
        return Operator(basis, Matrix::Identity(d, d));
    }

    const BasisPtr& basis() const { return basis_; }
    const Matrix& matrix() const { return m_; }
    std::size_t dimension() const { return basis_ ? basis_->size() : 0; }
    cplx operator()(std::size_t i, std::size_t j) const {
        return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    Operator adjoint() const { return Operator(basis_, m_.adjoint()); }

    double max_asymmetry() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
    bool is_hermitian(double tol = 1e-12) const { return m_.size() == 0 || max_asymmetry() <= tol; }

    friend Operator operator+(const Operator& a, const Operator& b) {
        check(a, b);
        return Operator(a.basis_, a.m_ + b.m_);
    }
    friend Operator operator-(const Operator& a, const Operator& b) {
        check(a, b);
        return Operator(a.basis_, a.m_ - b.m_);
    }
    friend Operator operator*(const Operator& a, const Operator& b) {
        check(a, b);
        return Operator(a.basis_, a.m_ * b.m_);
    }
    friend Operator operator*(cplx s, const Operator& a) { return Operator(a.basis_, s * a.m_); }
    friend Operator operator*(double s, const Operator& a) { return Operator(a.basis_, s * a.m_); }

private:
    static void check(const Operator& a, const Operator& b) {
        if (!same_basis(a.basis_, b.basis_)) throw Error("operator basis mismatch");
    }
    BasisPtr basis_;
    Matrix m_;
};

class QuantumState {
public:
    QuantumState() = default;
    QuantumState(BasisPtr basis, Vector amps) : basis_(std::move(basis)), a_(std::move(amps)) {
        if (!basis_ || static_cast<std::size_t>(a_.size()) != basis_->size())
            throw Error("state dimension does not match basis");
    }

    static QuantumState basis_state(BasisPtr basis, std::size_t index) {
        Vector v = Vector::Zero(static_cast<Eigen::Index>(basis->size()));
        v(static_cast<Eigen::Index>(index)) = 1.0;
        return QuantumState(std::move(basis), std::move(v));
    }

    // Normalizes; rejects the zero vector.
    static QuantumState normalized(BasisPtr basis, Vector amps) {
        double n = amps.norm();
        if (!(n > 0)) throw Error("cannot normalize zero vector");
        return QuantumState(std::move(basis), amps / n);
    }

    const BasisPtr& basis() const { return basis_; }
    const Vector& amplitudes() const { return a_; }
    std::size_t dimension() const { return static_cast<std::size_t>(a_.size()); }
    double norm() const { return a_.norm(); }
    cplx operator[](std::size_t i) const { return a_(static_cast<Eigen::Index>(i)); }

    // <this|other>
    cplx inner(const QuantumState& other) const {
        if (!same_basis(basis_, other.basis_)) throw Error("state basis mismatch");
        return a_.dot(other.a_);
    }

private:
    BasisPtr basis_;
    Vector a_;
};

inline QuantumState apply(const Operator& op, const QuantumState& s) {
    if (!same_basis(op.basis(), s.basis())) throw Error("operator/state basis mismatch");
    return QuantumState(s.basis(), op.matrix() * s.amplitudes());
}

inline cplx expectation(const Operator& op, const QuantumState& s) {
    return s.amplitudes().dot(op.matrix() * s.amplitudes());
}

inline Operator creation_op(const ModeRegister& reg, const std::string& mode) {
    const std::size_t k = reg.mode_index(mode);
    const auto& b = *reg.basis();
    auto d = static_cast<Eigen::Index>(b.size());
    Matrix m = Matrix::Zero(d, d);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto& s = b.states[i];
        if (s.occupations[k]) continue;
        int before = 0;
        for (std::size_t j = 0; j < k; ++j) before += s.occupations[j];
        BasisState t = s;
        t.occupations[k] = 1;
        m(static_cast<Eigen::Index>(reg.index_of(t)), static_cast<Eigen::Index>(i)) = (before % 2) ? -1.0 : 1.0;
    }
    return Operator(reg.basis(), std::move(m));
}

inline Operator annihilation_op(const ModeRegister& reg, const std::string& mode) {
    return creation_op(reg, mode).adjoint();
}

inline Operator number_op(const ModeRegister& reg, const std::string& mode) {
    const std::size_t k = reg.mode_index(mode);
    const auto& b = *reg.basis();
    Vector diag(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) diag(static_cast<Eigen::Index>(i)) = b.states[i].occupations[k];
    return Operator(reg.basis(), diag.asDiagonal());
}

// e^{-i phi} for direction +1 (N_c -> N_c + 1), its adjoint for -1; hard-truncated at the range edge.
inline Operator cooper_shift_op(const ModeRegister& reg, int direction) {
    if (!reg.has_cooper()) throw Error("register has no Cooper-pair counter");
    if (direction != 1 && direction != -1) throw Error("cooper shift direction must be +1 or -1");
    const auto& b = *reg.basis();
    auto d = static_cast<Eigen::Index>(b.size());
    Matrix m = Matrix::Zero(d, d);
    const auto [lo, hi] = *reg.cooper_range();
    for (std::size_t i = 0; i < b.size(); ++i) {
        BasisState t = b.states[i];
        t.cooper_count += direction;
        if (t.cooper_count < lo || t.cooper_count > hi) continue;
        m(static_cast<Eigen::Index>(reg.index_of(t)), static_cast<Eigen::Index>(i)) = 1.0;
    }
    return Operator(reg.basis(), std::move(m));
}

inline Operator cooper_number_op(const ModeRegister& reg) {
    if (!reg.has_cooper()) throw Error("register has no Cooper-pair counter");
    const auto& b = *reg.basis();
    Vector diag(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) diag(static_cast<Eigen::Index>(i)) = b.states[i].cooper_count;
    return Operator(reg.basis(), diag.asDiagonal());
}

struct Eigensystem {
    std::vector<double> values;  // ascending
    Matrix vectors;              // orthonormal columns
};

class NonHermitianError : public Error {
public:
    explicit NonHermitianError(double asym)
        : Error(describe(asym)), max_asymmetry(asym) {}
    double max_asymmetry;

private:
    static std::string describe(double a) {
        std::ostringstream os;
        os.precision(3);
        os << "operator is not Hermitian (max |M - M^dag| = " << a << ")";
        return os.str();
    }
};

inline double hermitian_tolerance(const Matrix& m) {
    double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    return 1e-12 * std::max(1.0, scale);
}

namespace detail {

// Canonical basis of a degenerate eigenspace: project unit vectors in input order,
// Gram-Schmidt, and fix each vector's phase so its largest component is real positive.
inline void canonicalize_cluster(Matrix& vecs, Eigen::Index c0, Eigen::Index c1) {
    const Eigen::Index d = vecs.rows();
    const Eigen::Index k = c1 - c0;
    Matrix span = vecs.middleCols(c0, k);
    Matrix out(d, k);
    Eigen::Index found = 0;
    for (Eigen::Index e = 0; e < d && found < k; ++e) {
        Vector v = span * span.row(e).adjoint();  // P e_e
        for (Eigen::Index j = 0; j < found; ++j) v -= out.col(j) * out.col(j).dot(v);
        double n = v.norm();
        if (n < 1e-6) continue;
        out.col(found++) = v / n;
    }
    if (found < k) return;  // numerically awkward span; keep the solver's vectors
    vecs.middleCols(c0, k) = out;
}

inline void fix_phase(Eigen::Ref<Vector> v) {
    Eigen::Index best = 0;
    double bmag = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double a = std::abs(v(i));
        if (a > bmag + 1e-12) {
            bmag = a;
            best = i;
        }
    }
    if (bmag > 0) v *= std::conj(v(best)) / bmag;
}

}  // namespace detail

inline Eigensystem hermitian_eigensolve(const Matrix& m, double degeneracy_tol = 1e-9) {
    if (m.rows() != m.cols()) throw Error("eigensolve needs a square matrix");
    double asym = m.size() ? (m - m.adjoint()).cwiseAbs().maxCoeff() : 0.0;
    if (asym > hermitian_tolerance(m)) throw NonHermitianError(asym);
    Matrix h = (m + m.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.info() != Eigen::Success) throw Error("eigensolver failed to converge");
    Eigensystem out;
    out.vectors = es.eigenvectors();
    const auto& w = es.eigenvalues();
    out.values.assign(w.data(), w.data() + w.size());
    double scale = std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
    Eigen::Index i = 0;
    const Eigen::Index n = w.size();
    while (i < n) {
        Eigen::Index j = i + 1;
        while (j < n && w(j) - w(i) <= degeneracy_tol * scale) ++j;
        if (j - i > 1) detail::canonicalize_cluster(out.vectors, i, j);
        for (Eigen::Index c = i; c < j; ++c) detail::fix_phase(out.vectors.col(c));
        i = j;
    }
    return out;
}

inline Eigensystem hermitian_eigensolve(const Operator& op, double degeneracy_tol = 1e-9) {
    return hermitian_eigensolve(op.matrix(), degeneracy_tol);
}

inline Operator project_subspace(const Operator& op, const std::vector<BasisState>& kept,
                                 std::vector<std::string> labels = {}) {
    const auto& b = *op.basis();
    std::vector<Eigen::Index> idx;
    for (const auto& s : kept) {
        auto i = b.find(s);
        if (!i) throw Error("kept state is not in the operator's basis");
        if (std::find(idx.begin(), idx.end(), static_cast<Eigen::Index>(*i)) != idx.end())
            throw Error("kept state listed twice");
        idx.push_back(static_cast<Eigen::Index>(*i));
    }
    auto nb = std::make_shared<Basis>();
    nb->states = kept;
    if (labels.empty())
        for (auto i : idx) nb->labels.push_back(b.labels[static_cast<std::size_t>(i)]);
    else if (labels.size() == kept.size())
        nb->labels = std::move(labels);
    else
        throw Error("label count does not match kept states");
    auto k = static_cast<Eigen::Index>(idx.size());
    Matrix m(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) m(r, c) = op.matrix()(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
    return Operator(nb, std::move(m));
}

// Same projection onto an already-built basis object (keeps basis identity shared).
inline Operator project_onto(const Operator& op, const BasisPtr& target) {
    Operator p = project_subspace(op, target->states);
    return Operator(target, p.matrix());
}

}  // namespace majorana
