#include <gtest/gtest.h>

#include <cmath>

#include "bosonic_mip/state.hpp"

using namespace bmip;

namespace {

double log_factorial(int n) { return std::lgamma(n + 1.0); }

struct Moments {
  double mean_x, mean_p, var_x, var_p;
};

Moments moments(const CVector& v, double hbar) {
  const Quadratures q = quadratures(static_cast<int>(v.size()), hbar);
  const double mx = v.dot(q.x * v).real();
  const double mp = v.dot(q.p * v).real();
  return {mx, mp, v.dot(q.x * q.x * v).real() - mx * mx, v.dot(q.p * q.p * v).real() - mp * mp};
}

}  // namespace

TEST(SqueezedCoherent, VacuumSqueezingMatchesClosedForm) {
  // S(-r)|0>: c_2m = (tanh r)^m sqrt((2m)!) / (2^m m! sqrt(cosh r)), renormalized on d levels
  const double r = 0.8;
  const int d = 40;
  const SingleModeState s = squeezed_coherent(0.0, r, d);
  std::vector<double> c;
  double kept = 0.0;
  for (int m = 0; 2 * m < d; ++m) {
    c.push_back(std::exp(m * std::log(std::tanh(r)) + 0.5 * log_factorial(2 * m) - m * std::log(2.0) - log_factorial(m)) /
                std::sqrt(std::cosh(r)));
    kept += c.back() * c.back();
  }
  EXPECT_NEAR(s.leaked_norm, 1.0 - kept, 1e-12);
  for (int m = 0; 2 * m < d; ++m) {
    EXPECT_NEAR(std::abs(s.amplitudes(2 * m) - c[m] / std::sqrt(kept)), 0.0, 1e-12) << "level " << 2 * m;
    if (2 * m + 1 < d) EXPECT_NEAR(std::abs(s.amplitudes(2 * m + 1)), 0.0, 1e-12);
  }
}

TEST(SqueezedCoherent, CoherentMatchesPoisson) {
  const cplx alpha(0.3, -0.7);
  const SingleModeState s = squeezed_coherent(alpha, 0.0, 30);
  for (int n = 0; n < 30; ++n) {
    const cplx c = std::exp(-std::norm(alpha) / 2.0) * std::pow(alpha, n) / std::exp(0.5 * log_factorial(n));
    EXPECT_NEAR(std::abs(s.amplitudes(n) - c), 0.0, 1e-10);
  }
}

TEST(SqueezedCoherent, MomentsOfDisplacedSqueezedState) {
  for (double hbar : {1.0, 2.0}) {
    for (double p0 : {0.25, 0.55, 0.72}) {
      for (double r : {0.5, 0.8}) {
        InitialStateSpec spec = InitialStateSpec::uniform(1, p0, r);
        const SingleModeState s = squeezed_coherent(spec.alpha(0, hbar), r, 40);
        const Moments m = moments(s.amplitudes, hbar);
        EXPECT_NEAR(m.mean_p, p0, 1e-2);
        EXPECT_NEAR(m.mean_x, 0.0, 1e-2);
        EXPECT_NEAR(m.var_p, hbar / 2.0 * std::exp(-2.0 * r), 1e-2);
        EXPECT_NEAR(m.var_x, hbar / 2.0 * std::exp(2.0 * r), 1e-2);
      }
    }
  }
}

TEST(SqueezedCoherent, TruncationReportsLeakage) {
  const SingleModeState s = squeezed_coherent(cplx(0.0, 0.72 / std::sqrt(2.0)), 0.8, 8);
  EXPECT_GT(s.leaked_norm, 0.0);
  EXPECT_LT(s.leaked_norm, kMaxLeakedNorm);
  EXPECT_NEAR(s.amplitudes.norm(), 1.0, 1e-14);
  // p0 = 0.55, r = 0.8 leaves 5.7% above level 4
  const cplx alpha(0.0, 0.55 / std::sqrt(2.0));
  EXPECT_THROW(squeezed_coherent(alpha, 0.8, 5), TruncationError);
  EXPECT_NO_THROW(squeezed_coherent(alpha, 0.8, 5, 0, 0.08));
  EXPECT_THROW(squeezed_coherent(0.0, 3.0, 8), InvalidArgument);
}

TEST(SqueezedCoherent, WorkingDimensionConverges) {
  const cplx alpha(0.0, 0.5);
  const SingleModeState a = squeezed_coherent(alpha, 0.8, 8, 60);
  const SingleModeState b = squeezed_coherent(alpha, 0.8, 8, 120);
  EXPECT_LT((a.amplitudes - b.amplitudes).norm(), 1e-12);
}

TEST(ProductState, TensorOrderAndNorm) {
  const ModeSpace space({6, 7});
  InitialStateSpec spec;
  spec.modes = {{0.3, 0.5}, {0.7, 0.2}};
  const PreparedState ps = product_state(spec, space);
  const SingleModeState m0 = squeezed_coherent(spec.alpha(0, 1.0), 0.5, 6, 0, 1.0);
  const SingleModeState m1 = squeezed_coherent(spec.alpha(1, 1.0), 0.2, 7, 0, 1.0);
  EXPECT_NEAR(ps.state.norm(), 1.0, 1e-14);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 7; ++j) EXPECT_NEAR(std::abs(ps.state.amplitude({i, j}) - m0.amplitudes(i) * m1.amplitudes(j)), 0.0, 1e-14);
  ASSERT_EQ(ps.leaked_norm.size(), 2u);
  EXPECT_THROW(product_state(InitialStateSpec::uniform(3, 0.1, 0.1), space), InvalidArgument);
}

TEST(MixingHamiltonian, GroundStateIsNearInitialState) {
  // H_M = sum (p^2 - 2 p0 p); its ground state approaches the momentum eigenstate p0,
  // so the squeezed initial state has energy close to -p0^2 per mode
  const double p0 = 0.5;
  const InitialStateSpec spec = InitialStateSpec::uniform(1, p0, 1.2);
  const ModeSpace space({80});
  const SparseHermitian h = assemble(mixing_hamiltonian(spec), space);
  const PreparedState ps = product_state(spec, space);
  // <p^2> - 2 p0 <p> = var_p + p0^2 - 2 p0^2
  EXPECT_NEAR(ps.state.expectation(h), 0.5 * std::exp(-2.4) - p0 * p0, 1e-4);
}

TEST(QuantumStateTest, BasisAndNormalize) {
  const ModeSpace space({3, 3});
  QuantumState s = QuantumState::basis_state(space, {2, 1});
  EXPECT_EQ(s.amplitude({2, 1}), cplx(1.0));
  s.amplitudes() *= 3.0;
  s.normalize();
  EXPECT_NEAR(s.norm(), 1.0, 1e-15);
  EXPECT_THROW(QuantumState(space, CVector::Zero(4)), InvalidArgument);
  QuantumState z(space, CVector::Zero(9));
  EXPECT_THROW(z.normalize(), NumericalError);
}
