#pragma once

// Exponential actions exp(-i s H) v and lowest-eigenpair solvers for
// Hermitian operators: a dense eigendecomposition path and Krylov paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"

namespace bmip {

/// Cached eigendecomposition of a dense Hermitian matrix; applies
/// exp(-i s H) to vectors for any s.
class DenseExponential {
 public:
  DenseExponential() = default;
  explicit DenseExponential(const CMatrix& h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("DenseExponential: eigendecomposition failed");
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  void apply(double s, CVector& v) const {
    CVector c = vectors_.adjoint() * v;
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -s * values_(k));
    v.noalias() = vectors_ * c;
  }

  const RVector& eigenvalues() const noexcept { return values_; }
  const CMatrix& eigenvectors() const noexcept { return vectors_; }

 private:
  RVector values_;
  CMatrix vectors_;
};

/// exp(-i s H) v for a dense Hermitian H via a fresh eigendecomposition.
inline void expm_dense_apply(const CMatrix& h, double s, CVector& v) { DenseExponential(h).apply(s, v); }

/// exp(U) for an anti-Hermitian U, as a dense unitary.
inline CMatrix expm_antihermitian(const CMatrix& u) {
  // U = -i K with K = iU Hermitian, so exp(U) = exp(-i K).
  const CMatrix k = cplx(0.0, 1.0) * u;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (k + k.adjoint()));
  if (es.info() != Eigen::Success) throw NumericalError("expm_antihermitian: eigendecomposition failed");
  CVector phases(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) phases(i) = std::polar(1.0, -es.eigenvalues()(i));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

struct KrylovOptions {
  int max_subspace = 30;
  double tolerance = 1e-10;  ///< per-call error bound on a unit vector
  int max_substeps = 4096;
};

struct KrylovStats {
  std::int64_t matvecs = 0;
  std::int64_t substeps = 0;
};

/// Lanczos approximation of exp(-i s H) v with a posteriori error control.
/// When the estimated error exceeds the tolerance at the maximum subspace
/// size, the step is split and restarted from the partially propagated
/// vector.
class KrylovExponential {
 public:
  explicit KrylovExponential(KrylovOptions opts = {}) : opts_(opts) {}

  void apply(const SparseMatrix& h, double s, CVector& v) {
    const double norm0 = v.norm();
    if (norm0 == 0.0 || s == 0.0) return;
    double remaining = s;
    double step = s;
    int substeps = 0;
    while (std::abs(remaining) > 0.0) {
      if (std::abs(step) > std::abs(remaining)) step = remaining;
      double err = 0.0;
      CVector trial = v;
      if (try_step(h, step, trial, err)) {
        v = std::move(trial);
        remaining -= step;
        ++stats_.substeps;
        // grow again cautiously after a successful split
        if (err < 0.1 * opts_.tolerance) step *= 2.0;
      } else {
        step *= 0.5;
      }
      if (++substeps > opts_.max_substeps)
        throw PropagatorError("Krylov propagator did not converge within " + std::to_string(opts_.max_substeps) + " substeps");
    }
    if (!v.allFinite()) throw PropagatorError("Krylov propagator produced non-finite amplitudes");
  }

  const KrylovStats& stats() const noexcept { return stats_; }

 private:
  bool try_step(const SparseMatrix& h, double s, CVector& v, double& err) {
    const Eigen::Index n = v.size();
    const int m_max = static_cast<int>(std::min<Eigen::Index>(opts_.max_subspace, n));
    const double beta0 = v.norm();
    basis_.resize(n, m_max + 1);
    basis_.col(0) = v / beta0;
    std::vector<double> alpha, beta;
    CVector w(n);
    int m = 0;
    bool breakdown = false;
    for (int j = 0; j < m_max; ++j) {
      w.noalias() = h * basis_.col(j);
      ++stats_.matvecs;
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass) {
        CVector c = basis_.leftCols(j + 1).adjoint() * w;
        w.noalias() -= basis_.leftCols(j + 1) * c;
        if (pass == 0) alpha.push_back(c(j).real());
        else alpha.back() += c(j).real();
      }
      const double b = w.norm();
      m = j + 1;
      if (b < 1e-13 * std::max(1.0, std::abs(alpha.back()))) {
        breakdown = true;
        beta.push_back(0.0);
        break;
      }
      beta.push_back(b);
      basis_.col(j + 1) = w / b;
      // a posteriori check once the subspace is reasonably large
      if (m >= 4 && (m % 2 == 0 || m == m_max)) {
        err = estimate(alpha, beta, m, s) * beta0;
        if (err <= opts_.tolerance) break;
      }
    }
    if (!breakdown) {
      err = estimate(alpha, beta, m, s) * beta0;
      if (err > opts_.tolerance) return false;
    } else {
      err = 0.0;
    }
    CVector y = small_exp(alpha, beta, m, s);
    v.noalias() = beta0 * (basis_.leftCols(m) * y);
    return true;
  }

  static CVector small_exp(const std::vector<double>& alpha, const std::vector<double>& beta, int m, double s) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    CVector y = CVector::Zero(m);
    for (int k = 0; k < m; ++k) {
      const cplx ph = std::polar(1.0, -s * es.eigenvalues()(k)) * es.eigenvectors()(0, k);
      y += ph * es.eigenvectors().col(k).cast<cplx>();
    }
    return y;
  }

  // |beta_m * e_m^T exp(-i s T_m) e_1|, the leading term of the Lanczos error.
  static double estimate(const std::vector<double>& alpha, const std::vector<double>& beta, int m, double s) {
    const CVector y = small_exp(alpha, beta, m, s);
    return beta[static_cast<std::size_t>(m - 1)] * std::abs(y(m - 1));
  }

  KrylovOptions opts_;
  KrylovStats stats_;
  CMatrix basis_;
};

/// Lowest eigenpairs of a Hermitian operator.
struct EigenPairs {
  RVector values;    ///< ascending
  CMatrix vectors;   ///< columns
  RVector residuals; ///< ||H v - λ v||
};

struct EigenOptions {
  std::size_t dense_limit = 512;  ///< dense solver at or below this dimension
  std::size_t max_dimension = 65536;
  double residual_tolerance = 1e-8;
  int max_iterations = 5000;
  std::uint64_t seed = 12345;
};

namespace detail {

inline RVector residual_norms(const SparseMatrix& h, const RVector& vals, const CMatrix& vecs) {
  RVector r(vals.size());
  for (Eigen::Index k = 0; k < vals.size(); ++k) r(k) = (h * vecs.col(k) - vals(k) * vecs.col(k)).norm();
  return r;
}

/// Orthonormalizes the columns of `block` against `basis` and among
/// themselves; returns the surviving columns.
inline CMatrix orthonormalize_against(const CMatrix& basis, CMatrix block) {
  for (int pass = 0; pass < 2; ++pass)
    if (basis.cols() > 0) block -= basis * (basis.adjoint() * block);
  CMatrix out(block.rows(), 0);
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    CVector v = block.col(c);
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) v -= basis * (basis.adjoint() * v);
      if (out.cols() > 0) v -= out * (out.adjoint() * v);
    }
    const double nv = v.norm();
    if (nv > 1e-10) {
      out.conservativeResize(Eigen::NoChange, out.cols() + 1);
      out.col(out.cols() - 1) = v / nv;
    }
  }
  return out;
}

}  // namespace detail

/// `count` smallest eigenpairs. Diagonal operators are read off directly,
/// small ones go through a dense solver, larger ones through block LOBPCG
/// with a diagonal preconditioner. The block is wider than `count` so
/// degenerate eigenspaces straddling the cut are resolved.
inline EigenPairs lowest_eigenpairs(const SparseHermitian& op, std::size_t count, EigenOptions opts = {}) {
  const std::size_t n = op.dimension();
  if (count == 0 || count > n) throw InvalidArgument("lowest_eigenpairs: invalid count");
  const SparseMatrix& h = op.matrix();
  EigenPairs out;
  if (op.is_diagonal()) {
    const RVector d = op.diagonal();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d(static_cast<Eigen::Index>(a)) < d(static_cast<Eigen::Index>(b)); });
    out.values.resize(static_cast<Eigen::Index>(count));
    out.vectors = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) {
      out.values(static_cast<Eigen::Index>(k)) = d(static_cast<Eigen::Index>(idx[k]));
      out.vectors(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(k)) = 1.0;
    }
    out.residuals = RVector::Zero(static_cast<Eigen::Index>(count));
    return out;
  }
  if (n <= opts.dense_limit) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es{CMatrix(h)};
    if (es.info() != Eigen::Success) throw NumericalError("lowest_eigenpairs: dense solver failed");
    out.values = es.eigenvalues().head(static_cast<Eigen::Index>(count));
    out.vectors = es.eigenvectors().leftCols(static_cast<Eigen::Index>(count));
    out.residuals = detail::residual_norms(h, out.values, out.vectors);
    return out;
  }
  if (n > opts.max_dimension)
    throw InvalidArgument("lowest_eigenpairs: dimension " + std::to_string(n) + " exceeds iterative limit");

  const auto nn = static_cast<Eigen::Index>(n);
  const auto want = static_cast<Eigen::Index>(count);
  const auto block = static_cast<Eigen::Index>(std::min<std::size_t>(n / 3, count + std::max<std::size_t>(4, count / 2)));
  if (block < want) throw InvalidArgument("lowest_eigenpairs: count too large for iterative solver");
  const RVector diag = op.diagonal();
  const double floor = 1e-3 * std::max(1.0, diag.cwiseAbs().maxCoeff());

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss;
  CMatrix x(nn, block);
  for (Eigen::Index c = 0; c < block; ++c)
    for (Eigen::Index r = 0; r < nn; ++r) x(r, c) = cplx(gauss(rng), gauss(rng));
  x = detail::orthonormalize_against(CMatrix(nn, 0), x);
  CMatrix hx = h * x;
  CMatrix p(nn, 0);

  auto rayleigh_ritz = [](const CMatrix& q, const CMatrix& hq) {
    CMatrix g = q.adjoint() * hq;
    g = 0.5 * (g + g.adjoint()).eval();
    return Eigen::SelfAdjointEigenSolver<CMatrix>(g);
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    const auto es = rayleigh_ritz(x, hx);
    const CMatrix c = es.eigenvectors();
    x = (x * c).eval();
    hx = (hx * c).eval();
    const RVector theta = es.eigenvalues();
    CMatrix r = hx - x * theta.asDiagonal();

    bool converged = true;
    for (Eigen::Index k = 0; k < want; ++k) converged &= r.col(k).norm() <= opts.residual_tolerance;
    if (converged) {
      out.values = theta.head(want);
      out.vectors = x.leftCols(want);
      out.residuals = detail::residual_norms(h, out.values, out.vectors);
      return out;
    }

    for (Eigen::Index k = 0; k < block; ++k)
      for (Eigen::Index i = 0; i < nn; ++i) r(i, k) /= std::max(std::abs(diag(i) - theta(k)), floor);

    CMatrix trial(nn, r.cols() + p.cols());
    trial << r, p;
    const CMatrix extra = detail::orthonormalize_against(x, trial);
    if (extra.cols() == 0) throw NumericalError("lowest_eigenpairs: search space collapsed");
    const CMatrix hextra = h * extra;
    CMatrix q(nn, block + extra.cols()), hq(nn, block + extra.cols());
    q << x, extra;
    hq << hx, hextra;
    const auto big = rayleigh_ritz(q, hq);
    const CMatrix cb = big.eigenvectors().leftCols(block);
    p = extra * cb.bottomRows(extra.cols());
    x = q * cb;
    hx = hq * cb;
    x = detail::orthonormalize_against(CMatrix(nn, 0), x);
    if (x.cols() != block) throw NumericalError("lowest_eigenpairs: lost rank in Ritz block");
    hx = h * x;
  }
  throw NumericalError("lowest_eigenpairs: LOBPCG did not converge within " + std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace bmip
