#include <gtest/gtest.h>

#include <cmath>

#include "bosonic_mip/fock.hpp"
#include "bosonic_mip/linalg.hpp"

using namespace bmip;

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

}  // namespace

TEST(ModeSpace, IndexRoundTrip) {
  const ModeSpace s({3, 4, 2});
  EXPECT_EQ(s.total_dimension(), 24u);
  EXPECT_EQ(s.index_of({2, 1, 1}), 2u * 8 + 1u * 2 + 1u);
  for (std::size_t i = 0; i < s.total_dimension(); ++i) EXPECT_EQ(s.index_of(s.occupation_of(i)), i);
}

TEST(ModeSpace, RejectsBadInput) {
  EXPECT_THROW(ModeSpace(std::vector<int>{}), InvalidArgument);
  EXPECT_THROW(ModeSpace({1}), InvalidArgument);
  EXPECT_THROW(ModeSpace({3}, 0.0), InvalidArgument);
  const ModeSpace s({3, 3});
  EXPECT_THROW(s.index_of({3, 0}), InvalidArgument);
  EXPECT_THROW(s.index_of({0}), InvalidArgument);
}

TEST(SingleMode, LadderMatrixElements) {
  const int d = 6;
  const CMatrix a = annihilation(d);
  for (int n = 1; n < d; ++n) EXPECT_NEAR(std::abs(a(n - 1, n) - std::sqrt(double(n))), 0.0, 1e-15);
  const CMatrix comm = a * a.adjoint() - a.adjoint() * a;
  for (int n = 0; n < d - 1; ++n) EXPECT_NEAR(std::abs(comm(n, n) - 1.0), 0.0, 1e-14);
  // the truncation edge carries -(d-1)
  EXPECT_NEAR(comm(d - 1, d - 1).real(), -(d - 1.0), 1e-14);
}

TEST(SingleMode, QuadratureMoments) {
  const double hbar = 2.0;
  const int d = 8;
  const Quadratures q = quadratures(d, hbar);
  EXPECT_LT((q.x - q.x.adjoint()).norm(), 1e-14);
  EXPECT_LT((q.p - q.p.adjoint()).norm(), 1e-14);
  const CMatrix x2 = q.x * q.x;
  const CMatrix p2 = q.p * q.p;
  // <n|x^2|n> = <n|p^2|n> = hbar (2n + 1) / 2 away from the truncation edge
  for (int n = 0; n < d - 1; ++n) {
    EXPECT_NEAR(x2(n, n).real(), hbar * (2 * n + 1) / 2.0, 1e-12);
    EXPECT_NEAR(p2(n, n).real(), hbar * (2 * n + 1) / 2.0, 1e-12);
  }
  const CMatrix comm = q.x * q.p - q.p * q.x;
  for (int n = 0; n < d - 1; ++n) EXPECT_NEAR(std::abs(comm(n, n) - cplx(0.0, hbar)), 0.0, 1e-12);
}

TEST(Assemble, NumberProductIsDiagonal) {
  const ModeSpace s({4, 5});
  const SparseHermitian h = assemble(OperatorPoly::n(0) * OperatorPoly::n(1) + 2.0 * OperatorPoly::n(1, 2) + 3.0, s);
  EXPECT_TRUE(h.is_diagonal());
  const RVector diag = h.diagonal();
  for (std::size_t i = 0; i < s.total_dimension(); ++i) {
    const auto occ = s.occupation_of(i);
    EXPECT_NEAR(diag(static_cast<Eigen::Index>(i)), occ[0] * occ[1] + 2.0 * occ[1] * occ[1] + 3.0, 1e-12);
  }
}

TEST(Assemble, MatchesKroneckerProduct) {
  const ModeSpace s({3, 4});
  const Quadratures q0 = quadratures(3), q1 = quadratures(4);
  const CMatrix expected = kron(q0.x * q0.x, q1.p) + 0.5 * kron(CMatrix::Identity(3, 3), number_operator(4));
  const SparseHermitian h = assemble(OperatorPoly::x(0, 2) * OperatorPoly::p(1) + 0.5 * OperatorPoly::n(1), s);
  EXPECT_LT((h.to_dense() - expected).norm(), 1e-12);
  EXPECT_LE(h.hermiticity_error(), 1e-12);
}

TEST(Assemble, HermiticityOfMixedPolynomial) {
  const ModeSpace s({5, 5, 5});
  OperatorPoly poly;
  for (std::size_t i = 0; i < 3; ++i) poly += OperatorPoly::p(i, 2) + OperatorPoly::p(i).scaled(-1.1) + OperatorPoly::x(i, 2);
  poly += 3.0 * OperatorPoly::x(0, 2) * OperatorPoly::n(1) * OperatorPoly::n(2);
  EXPECT_LE(assemble(poly, s).hermiticity_error(), 1e-12);
}

TEST(OperatorPolyAlgebra, CollectsAndCancels) {
  const OperatorPoly a = OperatorPoly::n(0) + OperatorPoly::n(1);
  const OperatorPoly sq = square(a - 5.0);
  EXPECT_NEAR(sq.constant_term(), 25.0, 1e-15);
  EXPECT_EQ(sq.without_constant().to_string(), "-10*N0 +2*N0*N1 +1*N0^2 -10*N1 +1*N1^2");
  EXPECT_TRUE((a - a).terms().empty());
  EXPECT_TRUE(sq.number_only());
  EXPECT_EQ(sq.max_mode(), 1u);
}

TEST(OperatorCacheTest, ReusesAssembledOperators) {
  OperatorCache cache;
  const ModeSpace s({4, 4});
  const auto a = cache.get(OperatorPoly::n(0, 2), s);
  const auto b = cache.get(OperatorPoly::n(0, 2), s);
  const auto c = cache.get(OperatorPoly::n(0, 2), ModeSpace({4, 5}));
  EXPECT_EQ(a.get(), b.get());
  EXPECT_NE(a.get(), c.get());
  EXPECT_EQ(cache.size(), 2u);
}

TEST(EigenSolver, LowestPairsOfHarmonicSum) {
  // n0 + n1 + x0^2: x0^2 mixes only within mode 0
  const ModeSpace s({12, 6});
  const SparseHermitian h = assemble(OperatorPoly::n(0) + OperatorPoly::n(1) + 0.3 * OperatorPoly::x(0, 2), s);
  EigenOptions dense;
  dense.dense_limit = 1000;
  EigenOptions iterative;
  iterative.dense_limit = 10;
  const EigenPairs a = lowest_eigenpairs(h, 6, dense);
  const EigenPairs b = lowest_eigenpairs(h, 6, iterative);
  for (Eigen::Index k = 0; k < 6; ++k) {
    EXPECT_NEAR(a.values(k), b.values(k), 1e-8);
    EXPECT_LE(b.residuals(k), 1e-8);
  }
}
