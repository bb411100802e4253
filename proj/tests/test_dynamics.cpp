#include <majorana/dynamics.hpp>

#include <gtest/gtest.h>

using namespace majorana;

namespace {

SchemeModel tele() { return build_scheme("teleportation", default_params("teleportation")); }

}  // namespace

TEST(Grid, StepCountAndShrink) {
    TimeGrid g{0, 1, 0.3};
    EXPECT_EQ(g.steps(), 4u);
    EXPECT_DOUBLE_EQ(g.step(), 0.25);
    EXPECT_DOUBLE_EQ(g.time(4), 1.0);
    EXPECT_EQ((TimeGrid{-1, 1, 0.5}).steps(), 4u);
    EXPECT_THROW((TimeGrid{0, 1, 0}).validate(), Error);
    EXPECT_THROW((TimeGrid{1, 1, 0.1}).validate(), Error);
}

TEST(Propagator, ZeroHamiltonianIsIdentity) {
    auto s = tele();
    auto U = propagator_step(Operator::zero(s.basis), 0.7);
    EXPECT_LT((U.matrix() - Matrix::Identity(4, 4)).norm(), 1e-15);
}

TEST(Propagator, TwoLevelRabiPhase) {
    auto r = make_register({"a"});
    Matrix sx(2, 2);
    sx << 0, 1, 1, 0;
    auto U = propagator_step(Operator(r.basis(), sx), 0.3).matrix();
    EXPECT_NEAR(std::abs(U(0, 0) - std::cos(0.3)), 0, 1e-14);
    EXPECT_NEAR(std::abs(U(1, 0) - cplx(0, -std::sin(0.3))), 0, 1e-14);
}

TEST(Propagator, Unitary) {
    auto s = tele();
    auto U = propagator_step(s.H0 + 3.7 * s.control("H1"), 0.05).matrix();
    EXPECT_LE((U.adjoint() * U - Matrix::Identity(4, 4)).norm(), 1e-10);
}

TEST(Propagator, RejectsNonHermitian) {
    auto r = make_register({"a"});
    Matrix m(2, 2);
    m << 0, 1, 0, 0;
    EXPECT_THROW(propagator_step(Operator(r.basis(), m), 0.1), NonHermitianError);
}

TEST(Evolve, EigenstateIsStationary) {
    auto s = tele();
    auto es = hermitian_eigensolve(s.H0);
    QuantumState psi0(s.basis, es.vectors.col(1));
    auto tr = evolve(s, std::vector<TimeField>(2), psi0, {0, 20, 0.01});
    ASSERT_EQ(tr.size(), 2001u);
    for (std::size_t i = 0; i < tr.size(); ++i)
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(tr.populations[i][k], tr.populations[0][k], 1e-9);
    EXPECT_NEAR(tr.states.back().norm(), 1.0, 1e-9);
}

TEST(Evolve, SamplesFieldsAtStepMidpoints) {
    auto s = tele();
    TimeField f1 = [](double t) { return t; };
    auto tr = evolve(s, {f1, nullptr}, s.basis_state("0001"), {0, 1, 0.25});
    EXPECT_DOUBLE_EQ(tr.fields[0][0], 0.125);
    EXPECT_DOUBLE_EQ(tr.fields[3][0], 0.875);
    EXPECT_DOUBLE_EQ(tr.fields[0][1], 0.0);
}

TEST(Evolve, RejectsWrongFieldCount) {
    auto s = tele();
    EXPECT_THROW(evolve(s, std::vector<TimeField>(1), s.basis_state("0001"), {0, 1, 0.1}), Error);
}

TEST(Population, SelfOverlapAndMismatch) {
    auto s = tele();
    auto t = bell_target(s);
    EXPECT_NEAR(population(t, t), 1.0, 1e-15);
    auto other = build_scheme("car", default_params("car"));
    EXPECT_THROW(population(t, bell_target(other)), Error);
}

TEST(Parity, SingleWireModeOccupied) {
    auto s = tele();
    auto P = parity_operator(s, {"f"});
    EXPECT_DOUBLE_EQ(P(1, 1).real(), -1.0);  // |0110>
    EXPECT_DOUBLE_EQ(P(3, 3).real(), 1.0);   // |1100>
    EXPECT_THROW(parity_operator(s, {}), Error);
    EXPECT_THROW(parity_operator(s, {"q"}), Error);
}

TEST(Measure, ForcedEvenCollapseOfEqualSuperposition) {
    auto s = build_scheme("car", default_params("car"));
    Vector v = Vector::Zero(8);
    for (auto l : {"0000", "011-1", "0110", "1100"}) v(static_cast<Eigen::Index>(s.index_of_label(l))) = 0.5;
    QuantumState psi(s.basis, v);
    auto m = measure_parity(psi, parity_operator(s, {"f"}), 1);
    EXPECT_NEAR(m.probability, 0.5, 1e-15);
    EXPECT_NEAR(population(m.collapsed, bell_target(s, "psi_T+")), 1.0, 1e-15);
    auto odd = measure_parity(psi, parity_operator(s, {"f"}), -1);
    EXPECT_NEAR(population(odd.collapsed, bell_target(s, "psi_odd")), 1.0, 1e-15);
}

TEST(Measure, ImpossibleForcedOutcomeIsRejected) {
    auto s = tele();
    EXPECT_THROW(measure_parity(s.basis_state("1100"), parity_operator(s, {"f"}), -1), Error);
    EXPECT_THROW(measure_parity(s.basis_state("1100"), parity_operator(s, {"f"}), 3), Error);
}

TEST(Measure, SeededDrawIsRepeatable) {
    auto s = tele();
    auto psi = QuantumState::normalized(s.basis, Vector::Ones(4));
    auto P = parity_operator(s, {"f"});
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        EXPECT_EQ(measure_parity(psi, P, std::nullopt, seed).outcome,
                  measure_parity(psi, P, std::nullopt, seed).outcome);
}

TEST(Measure, BranchesCoverBothOutcomes) {
    auto s = tele();
    auto b = parity_branches(s.basis_state("0110"), parity_operator(s, {"f"}));
    ASSERT_EQ(b.size(), 2u);
    EXPECT_DOUBLE_EQ(b[0].probability, 0.0);
    EXPECT_FALSE(b[0].collapsed);
    EXPECT_DOUBLE_EQ(b[1].probability, 1.0);
}
