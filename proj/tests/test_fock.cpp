#include <majorana/fock.hpp>

#include <gtest/gtest.h>

using namespace majorana;

namespace {

Matrix anticomm(const Operator& a, const Operator& b) { return (a * b + b * a).matrix(); }

}  // namespace

TEST(Register, CanonicalOrderFirstModeMostSignificant) {
    auto r = make_register({"a", "b"});
    ASSERT_EQ(r.dimension(), 4u);
    EXPECT_EQ(r.basis()->labels[0], "|00>");
    EXPECT_EQ(r.basis()->labels[1], "|01>");
    EXPECT_EQ(r.basis()->labels[2], "|10>");
    EXPECT_EQ(r.basis()->labels[3], "|11>");
}

TEST(Register, CooperCountRunsFastest) {
    auto r = make_register({"a"}, std::pair{-1, 1});
    ASSERT_EQ(r.dimension(), 6u);
    EXPECT_EQ(r.basis()->states[0].cooper_count, -1);
    EXPECT_EQ(r.basis()->states[2].cooper_count, 1);
    EXPECT_EQ(r.basis()->states[3].occupations[0], 1);
    EXPECT_EQ(r.index_of(r.state({"a"}, 0)), 4u);
}

TEST(Register, RejectsDuplicatesAndUnknownModes) {
    EXPECT_THROW(make_register({"a", "a"}), Error);
    EXPECT_THROW(make_register({"a"}, std::pair{2, 1}), Error);
    auto r = make_register({"a", "b"});
    EXPECT_THROW(r.mode_index("c"), Error);
    EXPECT_THROW(creation_op(r, "zz"), Error);
}

TEST(Operators, CanonicalAnticommutators) {
    auto r = make_register({"a", "b", "c"}, std::pair{-1, 1});
    const auto I = Operator::identity(r.basis()).matrix();
    for (const auto& m : r.modes())
        for (const auto& n : r.modes()) {
            auto cm = creation_op(r, m), an = annihilation_op(r, n);
            Matrix expect = (m == n) ? I : Matrix::Zero(I.rows(), I.cols());
            EXPECT_LT((anticomm(an, cm) - expect).norm(), 1e-14) << m << "," << n;
            EXPECT_LT(anticomm(creation_op(r, m), creation_op(r, n)).norm(), 1e-14);
            EXPECT_LT(anticomm(annihilation_op(r, m), annihilation_op(r, n)).norm(), 1e-14);
        }
}

TEST(Operators, JordanWignerSignCountsEarlierModes) {
    auto r = make_register({"a", "b"});
    // b^dag |10> = -|11> : one occupied mode precedes b
    auto s = QuantumState::basis_state(r.basis(), r.index_of(r.state({"a"})));
    auto out = apply(creation_op(r, "b"), s);
    EXPECT_NEAR(out[r.index_of(r.state({"a", "b"}))].real(), -1.0, 1e-15);
    auto s2 = QuantumState::basis_state(r.basis(), r.index_of(r.state({"b"})));
    auto out2 = apply(creation_op(r, "a"), s2);
    EXPECT_NEAR(out2[r.index_of(r.state({"a", "b"}))].real(), 1.0, 1e-15);
}

TEST(Operators, NumberOperatorIsDiagonalOccupation) {
    auto r = make_register({"a", "b"});
    auto n = number_op(r, "b").matrix();
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(n(i, i).real(), static_cast<double>(i & 1));
}

TEST(Operators, CooperShiftTruncatesAtBoundary) {
    auto r = make_register({"a"}, std::pair{-1, 1});
    auto up = cooper_shift_op(r, +1);
    auto s = QuantumState::basis_state(r.basis(), r.index_of(r.state({}, 0)));
    auto moved = apply(up, s);
    EXPECT_NEAR(std::abs(moved[r.index_of(r.state({}, 1))]), 1.0, 1e-15);
    auto top = QuantumState::basis_state(r.basis(), r.index_of(r.state({}, 1)));
    EXPECT_NEAR(apply(up, top).norm(), 0.0, 1e-15);
    EXPECT_LT((cooper_shift_op(r, -1).matrix() - up.adjoint().matrix()).norm(), 1e-15);
    EXPECT_THROW(cooper_shift_op(make_register({"a"}), 1), Error);
    EXPECT_THROW(cooper_shift_op(r, 2), Error);
}

TEST(Operators, BasisMismatchIsRejected) {
    auto r1 = make_register({"a"});
    auto r2 = make_register({"a"}, std::pair{0, 1});
    EXPECT_THROW(number_op(r1, "a") + number_op(r2, "a"), Error);
}

TEST(States, InnerProductConjugatesLeft) {
    auto r = make_register({"a"});
    Vector u(2), w(2);
    u << cplx(0, 1), 0;
    w << 1, 0;
    QuantumState a(r.basis(), u), b(r.basis(), w);
    EXPECT_NEAR(a.inner(b).imag(), -1.0, 1e-15);
    EXPECT_THROW(QuantumState::normalized(r.basis(), Vector::Zero(2)), Error);
}

TEST(Eigensolve, PauliXPair) {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    auto es = hermitian_eigensolve(m);
    EXPECT_NEAR(es.values[0], -1.0, 1e-14);
    EXPECT_NEAR(es.values[1], 1.0, 1e-14);
    // largest component made real positive
    EXPECT_NEAR(std::abs(es.vectors(0, 1) - cplx(std::sqrt(0.5), 0)), 0.0, 1e-14);
}

TEST(Eigensolve, DegenerateClusterFollowsInputOrder) {
    Matrix m = Matrix::Zero(3, 3);
    m(2, 2) = 1.0;
    auto es = hermitian_eigensolve(m);
    EXPECT_NEAR(std::abs(es.vectors(0, 0)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(es.vectors(1, 1)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(es.vectors(2, 2)), 1.0, 1e-14);
}

TEST(Eigensolve, RepeatableAcrossCalls) {
    Matrix m = Matrix::Random(6, 6);
    m = (m + m.adjoint()).eval();
    auto a = hermitian_eigensolve(m), b = hermitian_eigensolve(m);
    EXPECT_EQ((a.vectors - b.vectors).norm(), 0.0);
}

TEST(Eigensolve, RejectsNonHermitianWithAsymmetry) {
    Matrix m(2, 2);
    m << 0, 1, 0.5, 0;
    try {
        hermitian_eigensolve(m);
        FAIL() << "accepted a non-Hermitian matrix";
    } catch (const NonHermitianError& e) {
        EXPECT_NEAR(e.max_asymmetry, 0.5, 1e-15);
    }
}

TEST(Projection, KeepsSelectedBlockInGivenOrder) {
    auto r = make_register({"a", "b"});
    auto H = number_op(r, "a") + 2.0 * number_op(r, "b");
    auto p = project_subspace(H, {r.state({"b"}), r.state({"a"})});
    EXPECT_NEAR(p(0, 0).real(), 2.0, 1e-15);
    EXPECT_NEAR(p(1, 1).real(), 1.0, 1e-15);
    EXPECT_THROW(project_subspace(H, {r.state({"a"}), r.state({"a"})}), Error);
}

TEST(Projection, CommutesWithSumsAndScaling) {
    auto r = make_register({"a", "b", "c"});
    auto A = creation_op(r, "a") * annihilation_op(r, "b");
    A = A + A.adjoint();
    auto B = number_op(r, "c");
    std::vector<BasisState> keep{r.state({"a"}), r.state({"b"}), r.state({"c"})};
    auto lhs = project_subspace(2.0 * A + B, keep).matrix();
    auto rhs = (2.0 * project_subspace(A, keep).matrix() + project_subspace(B, keep).matrix()).eval();
    EXPECT_LT((lhs - rhs).norm(), 1e-14);
}
