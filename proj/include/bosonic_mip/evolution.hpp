#pragma once

// Linear adiabatic schedule H(τ) = (1−τ) H_M + τ H_P, τ = t/T, integrated
// continuously (midpoint exponential steps) or as a Trotter product.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"
#include "bosonic_mip/linalg.hpp"
#include "bosonic_mip/projector.hpp"
#include "bosonic_mip/state.hpp"

namespace bmip {

struct Schedule {
  enum class Variant { Continuous, Trotter };

  double total_time = 50.0;
  Variant variant = Variant::Continuous;
  int steps = 10001;        ///< continuous integration steps
  int trotter_steps = 300;  ///< k
  int snapshot_stride = 0;  ///< 0 selects roughly 200 snapshots

  static Schedule continuous(double t, int steps) {
    Schedule s;
    s.total_time = t;
    s.steps = steps;
    return s;
  }
  static Schedule trotter(double t, int k) {
    Schedule s;
    s.total_time = t;
    s.variant = Variant::Trotter;
    s.trotter_steps = k;
    return s;
  }

  int step_count() const { return variant == Variant::Continuous ? steps : trotter_steps; }

  void validate() const {
    if (!(total_time > 0.0) || !std::isfinite(total_time)) throw InvalidArgument("Schedule: T must be > 0");
    if (steps < 1) throw InvalidArgument("Schedule: steps must be >= 1");
    if (trotter_steps < 1) throw InvalidArgument("Schedule: k must be >= 1");
    if (snapshot_stride < 0) throw InvalidArgument("Schedule: snapshot stride must be >= 0");
  }

  int effective_stride() const {
    if (snapshot_stride > 0) return snapshot_stride;
    return std::max(1, step_count() / 200);
  }
};

struct TrotterCoefficients {
  std::vector<double> b;  ///< mixing-Hamiltonian coefficients, j = 1..k
  std::vector<double> c;  ///< problem-Hamiltonian coefficients
};

/// b_j = (k − j + ½) T / k², c_j = (j − ½) T / k².
inline TrotterCoefficients trotter_coefficients(int k, double total_time) {
  if (k < 1) throw InvalidArgument("trotter_coefficients: k must be >= 1");
  if (!(total_time > 0.0)) throw InvalidArgument("trotter_coefficients: T must be > 0");
  TrotterCoefficients tc;
  const double scale = total_time / (static_cast<double>(k) * k);
  for (int j = 1; j <= k; ++j) {
    tc.b.push_back((k - j + 0.5) * scale);
    tc.c.push_back((j - 0.5) * scale);
  }
  return tc;
}

struct PropagatorOptions {
  /// Continuous steps use a fresh dense eigendecomposition of H(τ) at or
  /// below this dimension, Krylov above it.
  std::size_t dense_limit = 128;
  /// Fixed operators (Trotter factors) are diagonalized once at or below
  /// this dimension.
  std::size_t dense_cache_limit = 1024;
  KrylovOptions krylov;
};

struct EvolutionOptions {
  std::vector<FockProjector> tracked;
  std::vector<double> full_state_times;  ///< store full states at the first snapshot at or after each time
  bool record_distributions = false;     ///< keep |ψ|² at every snapshot
  PropagatorOptions propagator;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> tracked;  ///< [outcome][snapshot]
  std::vector<double> norm_drift;            ///< |‖ψ(t)‖ − 1| per snapshot
  std::vector<std::pair<double, QuantumState>> full_states;
  std::vector<RVector> distributions;  ///< per snapshot, when requested
  QuantumState final_state;
  KrylovStats krylov;

  double max_norm_drift() const {
    double m = 0.0;
    for (double d : norm_drift) m = std::max(m, d);
    return m;
  }
};

/// exp(−i s H/ħ) for a fixed operator, choosing the cheapest exact path.
class OperatorExponential {
 public:
  OperatorExponential(const SparseHermitian& op, double hbar, const PropagatorOptions& opts)
      : op_(&op), hbar_(hbar), krylov_(opts.krylov) {
    if (op.is_diagonal()) {
      diag_ = op.diagonal();
    } else if (op.dimension() <= opts.dense_cache_limit) {
      dense_.emplace(CMatrix(op.matrix()));
    }
  }

  void apply(double s, CVector& v) {
    const double t = s / hbar_;
    if (diag_) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) *= std::polar(1.0, -t * (*diag_)(i));
    } else if (dense_) {
      dense_->apply(t, v);
    } else {
      krylov_.apply(op_->matrix(), t, v);
    }
  }

  const KrylovStats& stats() const { return krylov_.stats(); }

 private:
  const SparseHermitian* op_;
  double hbar_;
  std::optional<RVector> diag_;
  std::optional<DenseExponential> dense_;
  KrylovExponential krylov_;
};

namespace detail {

class Recorder {
 public:
  Recorder(const ModeSpace& space, const EvolutionOptions& opts, Trajectory& traj) : opts_(opts), traj_(traj) {
    for (const FockProjector& p : opts.tracked) {
      indices_.push_back(p.indices(space));
      traj.labels.push_back(p.label());
    }
    traj.tracked.assign(opts.tracked.size(), {});
    pending_full_ = opts.full_state_times;
    std::sort(pending_full_.begin(), pending_full_.end());
  }

  void record(double t, const QuantumState& state) {
    const CVector& v = state.amplitudes();
    if (!v.allFinite()) throw NumericalError("evolution produced non-finite amplitudes at t=" + std::to_string(t));
    traj_.times.push_back(t);
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      double p = 0.0;
      for (std::size_t i : indices_[k]) p += std::norm(v(static_cast<Eigen::Index>(i)));
      traj_.tracked[k].push_back(p);
    }
    traj_.norm_drift.push_back(std::abs(v.norm() - 1.0));
    if (opts_.record_distributions) traj_.distributions.push_back(v.cwiseAbs2());
    while (next_full_ < pending_full_.size() && pending_full_[next_full_] <= t + 1e-12) {
      traj_.full_states.emplace_back(t, state);
      ++next_full_;
    }
  }

 private:
  const EvolutionOptions& opts_;
  Trajectory& traj_;
  std::vector<std::vector<std::size_t>> indices_;
  std::vector<double> pending_full_;
  std::size_t next_full_ = 0;
};

inline void check_inputs(const SparseHermitian& hm, const SparseHermitian& hp, const QuantumState& psi0) {
  if (hm.dimension() != hp.dimension() || hm.dimension() != psi0.space().total_dimension())
    throw InvalidArgument("evolution: operator and state dimensions differ");
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw InvalidArgument("evolution: initial state is not normalized");
}

/// (1−τ) A + τ B stored on the union sparsity pattern so each step needs a
/// single value update and one matvec per Krylov vector.
class Pencil {
 public:
  Pencil(const SparseMatrix& a, const SparseMatrix& b) {
    a_on_union_ = SparseMatrix(a + 0.0 * b);
    b_on_union_ = SparseMatrix(0.0 * a + b);
    a_on_union_.makeCompressed();
    b_on_union_.makeCompressed();
    if (a_on_union_.nonZeros() != b_on_union_.nonZeros())
      throw NumericalError("Pencil: union sparsity patterns differ");
    for (Eigen::Index k = 0; k < a_on_union_.nonZeros(); ++k)
      if (a_on_union_.innerIndexPtr()[k] != b_on_union_.innerIndexPtr()[k]) throw NumericalError("Pencil: union sparsity patterns differ");
    work_ = a_on_union_;
  }

  const SparseMatrix& at(double tau) {
    const cplx* va = a_on_union_.valuePtr();
    const cplx* vb = b_on_union_.valuePtr();
    cplx* w = work_.valuePtr();
    for (Eigen::Index k = 0; k < work_.nonZeros(); ++k) w[k] = (1.0 - tau) * va[k] + tau * vb[k];
    return work_;
  }

 private:
  SparseMatrix a_on_union_, b_on_union_, work_;
};

}  // namespace detail

/// Midpoint exponential integration: for each of `steps` substeps of width
/// Δt = T/steps, ψ ← exp(−i H(τ_mid) Δt/ħ) ψ.
inline Trajectory evolve_continuous(const SparseHermitian& hm, const SparseHermitian& hp, const QuantumState& psi0,
                                    const Schedule& schedule, const EvolutionOptions& opts = {}) {
  schedule.validate();
  detail::check_inputs(hm, hp, psi0);
  Trajectory traj;
  detail::Recorder rec(psi0.space(), opts, traj);
  const double hbar = psi0.space().hbar();
  const int steps = schedule.steps;
  const double dt = schedule.total_time / steps;
  const int stride = schedule.effective_stride();
  QuantumState psi = psi0;
  rec.record(0.0, psi);

  const bool dense = hm.dimension() <= opts.propagator.dense_limit;
  CMatrix hmd, hpd;
  std::optional<detail::Pencil> pencil;
  if (dense) {
    hmd = CMatrix(hm.matrix());
    hpd = CMatrix(hp.matrix());
  } else {
    pencil.emplace(hm.matrix(), hp.matrix());
  }
  KrylovExponential krylov(opts.propagator.krylov);
  for (int s = 0; s < steps; ++s) {
    const double tau = (s + 0.5) / steps;
    if (dense) {
      expm_dense_apply((1.0 - tau) * hmd + tau * hpd, dt / hbar, psi.amplitudes());
    } else {
      krylov.apply(pencil->at(tau), dt / hbar, psi.amplitudes());
    }
    if ((s + 1) % stride == 0 || s + 1 == steps) {
      const double t = (s + 1 == steps) ? schedule.total_time : (s + 1) * dt;
      rec.record(t, psi);
    }
  }
  traj.krylov = krylov.stats();
  traj.final_state = std::move(psi);
  return traj;
}

/// ψ ← Π_{j=1..k} exp(−i b_j H_M/ħ) exp(−i c_j H_P/ħ) ψ, j = 1 applied first.
inline Trajectory evolve_trotter(const SparseHermitian& hm, const SparseHermitian& hp, const QuantumState& psi0,
                                 const Schedule& schedule, const EvolutionOptions& opts = {}) {
  schedule.validate();
  detail::check_inputs(hm, hp, psi0);
  Trajectory traj;
  detail::Recorder rec(psi0.space(), opts, traj);
  const double hbar = psi0.space().hbar();
  const int k = schedule.trotter_steps;
  const TrotterCoefficients tc = trotter_coefficients(k, schedule.total_time);
  const int stride = schedule.effective_stride();
  OperatorExponential mix(hm, hbar, opts.propagator);
  OperatorExponential prob(hp, hbar, opts.propagator);
  QuantumState psi = psi0;
  rec.record(0.0, psi);
  for (int j = 0; j < k; ++j) {
    prob.apply(tc.c[static_cast<std::size_t>(j)], psi.amplitudes());
    mix.apply(tc.b[static_cast<std::size_t>(j)], psi.amplitudes());
    if ((j + 1) % stride == 0 || j + 1 == k) {
      // after j steps the elapsed coefficient sum is j T / k
      const double t = (j + 1 == k) ? schedule.total_time : schedule.total_time * (j + 1) / k;
      rec.record(t, psi);
    }
  }
  traj.krylov.matvecs = mix.stats().matvecs + prob.stats().matvecs;
  traj.krylov.substeps = mix.stats().substeps + prob.stats().substeps;
  traj.final_state = std::move(psi);
  return traj;
}

inline Trajectory evolve(const SparseHermitian& hm, const SparseHermitian& hp, const QuantumState& psi0,
                         const Schedule& schedule, const EvolutionOptions& opts = {}) {
  return schedule.variant == Schedule::Variant::Continuous ? evolve_continuous(hm, hp, psi0, schedule, opts)
                                                           : evolve_trotter(hm, hp, psi0, schedule, opts);
}

/// `count` lowest eigenpairs with residuals ≤ 1e−8.
inline EigenPairs ground_state(const SparseHermitian& h, std::size_t count, EigenOptions opts = {}) {
  return lowest_eigenpairs(h, count, opts);
}

/// Lowest eigenvalue and the diagonal of the projector onto its eigenspace
/// (eigenvalues within `tol` of the minimum). Grows the requested count
/// until the eigenspace is bracketed.
struct GroundSpace {
  double energy = 0.0;
  std::size_t degeneracy = 0;
  RVector weights;  ///< <n|P_ground|n> for every basis state
};

inline GroundSpace ground_space(const SparseHermitian& h, double tol = 1e-7, std::size_t initial_count = 4,
                                EigenOptions opts = {}) {
  std::size_t count = std::min(initial_count, h.dimension());
  while (true) {
    EigenPairs ep = lowest_eigenpairs(h, count, opts);
    const double e0 = ep.values(0);
    std::size_t deg = 0;
    while (deg < count && ep.values(static_cast<Eigen::Index>(deg)) - e0 <= tol) ++deg;
    if (deg < count || count == h.dimension()) {
      GroundSpace gs;
      gs.energy = e0;
      gs.degeneracy = deg;
      gs.weights = RVector::Zero(static_cast<Eigen::Index>(h.dimension()));
      for (std::size_t k = 0; k < deg; ++k) gs.weights += ep.vectors.col(static_cast<Eigen::Index>(k)).cwiseAbs2();
      return gs;
    }
    count = std::min(h.dimension(), count * 2);
  }
}

}  // namespace bmip
