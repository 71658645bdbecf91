#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "bosonic_mip/bench.hpp"
#include "bosonic_mip/evolution.hpp"

using namespace bmip;

namespace {

struct Problem {
  ModeSpace space;
  SparseHermitian hm, hp;
  QuantumState psi0;
};

Problem feasibility(int d, double p0 = 0.72, double r = 0.8) {
  const ModeSpace space({d, d});
  const InitialStateSpec spec = InitialStateSpec::uniform(2, p0, r);
  return {space, assemble(mixing_hamiltonian(spec), space), assemble(compile(feasibility_instance()).poly, space),
          product_state(spec, space).state};
}

CVector dense_exp(const CMatrix& h, double t, const CVector& v) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const CVector phases = (es.eigenvalues().array() * (-t)).unaryExpr([](double a) { return std::polar(1.0, a); }).matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * v;
}

double total_variation(const CVector& a, const CVector& b) { return 0.5 * (a.cwiseAbs2() - b.cwiseAbs2()).cwiseAbs().sum(); }

}  // namespace

TEST(TrotterCoefficientsTest, LinearRampSums) {
  const TrotterCoefficients tc = trotter_coefficients(300, 50.0);
  ASSERT_EQ(tc.b.size(), 300u);
  EXPECT_NEAR(std::accumulate(tc.b.begin(), tc.b.end(), 0.0), 25.0, 1e-10);
  EXPECT_NEAR(std::accumulate(tc.c.begin(), tc.c.end(), 0.0), 25.0, 1e-10);
  for (std::size_t j = 0; j < 300; ++j) EXPECT_NEAR(tc.b[j] + tc.c[j], 50.0 / 300.0, 1e-14);
  EXPECT_GT(tc.b.front(), tc.b.back());
  EXPECT_THROW(trotter_coefficients(0, 1.0), InvalidArgument);
}

TEST(ScheduleTest, Validation) {
  Schedule s = Schedule::continuous(50.0, 10001);
  EXPECT_EQ(s.step_count(), 10001);
  EXPECT_EQ(s.effective_stride(), 50);
  s.total_time = 0.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_THROW(Schedule::trotter(1.0, 0).validate(), InvalidArgument);
}

TEST(Continuous, ConstantHamiltonianIsExact) {
  // with H_M = H_P the midpoint rule is exact for any step count
  const Problem p = feasibility(5);
  const SparseHermitian h = p.hm + p.hp.scaled(0.1);
  const CVector expected = dense_exp(h.to_dense(), 3.0, p.psi0.amplitudes());
  for (std::size_t limit : {std::size_t{0}, std::size_t{1000}}) {
    EvolutionOptions o;
    o.propagator.dense_limit = limit;
    const Trajectory tr = evolve_continuous(h, h, p.psi0, Schedule::continuous(3.0, 7), o);
    EXPECT_LT((tr.final_state.amplitudes() - expected).norm(), 1e-9) << "dense_limit " << limit;
  }
}

TEST(Continuous, DenseAndKrylovAgree) {
  const Problem p = feasibility(6);
  EvolutionOptions dense, krylov;
  dense.propagator.dense_limit = 1000;
  krylov.propagator.dense_limit = 0;
  const Schedule s = Schedule::continuous(10.0, 400);
  const Trajectory a = evolve(p.hm, p.hp, p.psi0, s, dense);
  const Trajectory b = evolve(p.hm, p.hp, p.psi0, s, krylov);
  EXPECT_LT((a.final_state.amplitudes() - b.final_state.amplitudes()).norm(), 1e-7);
  EXPECT_LE(b.max_norm_drift(), 1e-6);
  EXPECT_GT(b.krylov.matvecs, 0u);
}

TEST(Continuous, StepHalvingConverges) {
  const Problem p = feasibility(6);
  const Trajectory a = evolve(p.hm, p.hp, p.psi0, Schedule::continuous(10.0, 1000));
  const Trajectory b = evolve(p.hm, p.hp, p.psi0, Schedule::continuous(10.0, 2000));
  const double tv = total_variation(a.final_state.amplitudes(), b.final_state.amplitudes());
  EXPECT_LE(tv, 1e-4);
}

TEST(Trotter, SingleStepMatchesFactorProduct) {
  const Problem p = feasibility(5);
  const Trajectory tr = evolve(p.hm, p.hp, p.psi0, Schedule::trotter(4.0, 1));
  // b_1 = c_1 = T/2; the problem factor acts first
  const CVector after_p = dense_exp(p.hp.to_dense(), 2.0, p.psi0.amplitudes());
  const CVector expected = dense_exp(p.hm.to_dense(), 2.0, after_p);
  EXPECT_LT((tr.final_state.amplitudes() - expected).norm(), 1e-10);
}

TEST(Trotter, KrylovFactorsMatchDense) {
  const Problem p = feasibility(6);
  EvolutionOptions krylov;
  krylov.propagator.dense_cache_limit = 0;
  const Trajectory a = evolve(p.hm, p.hp, p.psi0, Schedule::trotter(20.0, 40));
  const Trajectory b = evolve(p.hm, p.hp, p.psi0, Schedule::trotter(20.0, 40), krylov);
  EXPECT_LT((a.final_state.amplitudes() - b.final_state.amplitudes()).norm(), 1e-8);
  EXPECT_LE(b.max_norm_drift(), 1e-9 * 80);
}

TEST(Recording, SnapshotsAndTrackedLabels) {
  const Problem p = feasibility(5);
  EvolutionOptions o;
  o.tracked = {FockProjector::parse("0,4"), FockProjector::parse("*,0")};
  o.full_state_times = {0.0, 1.0};
  o.record_distributions = true;
  Schedule s = Schedule::continuous(2.0, 20);
  s.snapshot_stride = 5;
  const Trajectory tr = evolve(p.hm, p.hp, p.psi0, s, o);
  EXPECT_EQ(tr.times, (std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0}));
  EXPECT_EQ(tr.labels, (std::vector<std::string>{"|0,4>", "|*,0>"}));
  ASSERT_EQ(tr.tracked.size(), 2u);
  ASSERT_EQ(tr.distributions.size(), 5u);
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    double marg = 0.0;
    for (int n = 0; n < 5; ++n) marg += tr.distributions[k](p.space.index_of({n, 0}));
    EXPECT_NEAR(tr.tracked[1][k], marg, 1e-14);
  }
  ASSERT_EQ(tr.full_states.size(), 2u);
  EXPECT_DOUBLE_EQ(tr.full_states[1].first, 1.0);
  EXPECT_LT((tr.full_states[0].second.amplitudes() - p.psi0.amplitudes()).norm(), 1e-15);
}

TEST(Inputs, RejectsMismatchedDimensions) {
  const Problem a = feasibility(5);
  const Problem b = feasibility(6);
  EXPECT_THROW(evolve(a.hm, b.hp, a.psi0, Schedule::continuous(1.0, 2)), InvalidArgument);
  QuantumState unnormalized = a.psi0;
  unnormalized.amplitudes() *= 2.0;
  EXPECT_THROW(evolve(a.hm, a.hp, unnormalized, Schedule::continuous(1.0, 2)), InvalidArgument);
}

TEST(GroundSpaceTest, FeasibilityDegeneracy) {
  const ModeSpace space({8, 8});
  const CompiledProblem cp = compile(feasibility_instance());
  const GroundSpace gs = ground_space(assemble(cp.poly, space));
  EXPECT_NEAR(gs.energy + cp.constant_offset, 0.0, 1e-10);
  EXPECT_EQ(gs.degeneracy, 6u);
  for (int n = 0; n <= 5; ++n) EXPECT_NEAR(gs.weights(space.index_of({n, 5 - n})), 1.0, 1e-12);
  EXPECT_NEAR(gs.weights.sum(), 6.0, 1e-10);
}

TEST(GroundSpaceTest, IterativeSolverOnMixingHamiltonian) {
  // sum of independent modes: the lowest level is the sum of single-mode minima
  const ModeSpace space({8, 8, 8});
  const InitialStateSpec spec = InitialStateSpec::uniform(3, 0.55, 0.5);
  const SparseHermitian h = assemble(mixing_hamiltonian(spec), space);
  const ModeSpace one({8});
  const SparseHermitian h1 = assemble(mixing_hamiltonian(InitialStateSpec::uniform(1, 0.55, 0.5)), one);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h1.to_dense());
  EigenOptions o;
  o.dense_limit = 16;
  const EigenPairs ep = ground_state(h, 2, o);
  EXPECT_NEAR(ep.values(0), 3.0 * es.eigenvalues()(0), 1e-8);
  EXPECT_NEAR(ep.values(1), 2.0 * es.eigenvalues()(0) + es.eigenvalues()(1), 1e-8);
  EXPECT_LE(ep.residuals.maxCoeff(), 1e-8);
}
