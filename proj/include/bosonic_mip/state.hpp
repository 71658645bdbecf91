#pragma once

// Squeezed coherent product states and the momentum mixing Hamiltonian.

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"
#include "bosonic_mip/linalg.hpp"

namespace bmip {

/// Amplitude vector over a ModeSpace's joint basis.
class QuantumState {
 public:
  QuantumState() = default;
  QuantumState(ModeSpace space, CVector amplitudes) : space_(std::move(space)), amps_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amps_.size()) != space_.total_dimension())
      throw InvalidArgument("QuantumState: amplitude count does not match space dimension");
  }

  static QuantumState basis_state(const ModeSpace& space, const std::vector<int>& occupation) {
    CVector v = CVector::Zero(static_cast<Eigen::Index>(space.total_dimension()));
    v(static_cast<Eigen::Index>(space.index_of(occupation))) = 1.0;
    return QuantumState(space, std::move(v));
  }

  const ModeSpace& space() const noexcept { return space_; }
  const CVector& amplitudes() const noexcept { return amps_; }
  CVector& amplitudes() noexcept { return amps_; }
  double norm() const { return amps_.norm(); }
  void normalize() {
    const double n = amps_.norm();
    if (n == 0.0) throw NumericalError("QuantumState::normalize: zero state");
    amps_ /= n;
  }

  cplx amplitude(const std::vector<int>& occupation) const {
    return amps_(static_cast<Eigen::Index>(space_.index_of(occupation)));
  }

  /// <ψ|H|ψ>
  double expectation(const SparseHermitian& op) const { return amps_.dot(op.matrix() * amps_).real(); }

 private:
  ModeSpace space_;
  CVector amps_;
};

/// Momentum offset and squeezing of one mode.
///
/// `r > 0` reduces the momentum variance to (ħ/2)e^{-2r}; this is the state
/// written |α, -r> in squeeze-operator notation S(ζ) = exp((ζ* â² − ζ â†²)/2)
/// with ζ = −r.
struct ModeInit {
  double p0 = 0.0;
  double r = 0.0;
};

inline constexpr double kMaxLeakedNorm = 0.05;

struct InitialStateSpec {
  std::vector<ModeInit> modes;
  /// Fock levels used while exponentiating the displacement and squeeze
  /// generators before projecting to the mode's truncation. 0 selects
  /// d + 80; a value equal to d exponentiates directly in the truncated space.
  int working_dim = 0;
  /// Largest tolerated probability above the truncation before renormalizing.
  double max_leaked_norm = kMaxLeakedNorm;

  static InitialStateSpec uniform(std::size_t count, double p0, double r) {
    InitialStateSpec s;
    s.modes.assign(count, ModeInit{p0, r});
    return s;
  }

  /// α_j = i p0_j / sqrt(2ħ)
  cplx alpha(std::size_t mode, double hbar) const {
    return cplx(0.0, modes.at(mode).p0 / std::sqrt(2.0 * hbar));
  }
};

struct SingleModeState {
  CVector amplitudes;
  double leaked_norm = 0.0;  ///< probability outside the truncation before renormalizing
};

inline constexpr double kMaxSqueezing = 2.0;

/// normalize(D(α) S(−r) |0>) truncated to d levels.
///
/// The generators αâ† − α*â and (r/2)(â†² − â²) are exponentiated as dense
/// matrices on `working_dim` levels; the first d amplitudes are kept and
/// renormalized. Throws TruncationError when more than `max_leak` of the
/// norm lies above level d − 1.
inline SingleModeState squeezed_coherent(cplx alpha, double r, int d, int working_dim = 0, double max_leak = kMaxLeakedNorm) {
  check_dimension(d);
  if (!std::isfinite(r) || std::abs(r) > kMaxSqueezing)
    throw InvalidArgument("squeezed_coherent: |r| must be <= " + std::to_string(kMaxSqueezing));
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) throw InvalidArgument("squeezed_coherent: non-finite alpha");
  const int w = working_dim == 0 ? d + 80 : working_dim;
  if (w < d) throw InvalidArgument("squeezed_coherent: working dimension below truncation");

  const CMatrix a = annihilation(w);
  const CMatrix ad = a.adjoint();
  const cplx z(-r, 0.0);
  const CMatrix squeeze_gen = -(z / 2.0) * (ad * ad) + (std::conj(z) / 2.0) * (a * a);
  const CMatrix displace_gen = alpha * ad - std::conj(alpha) * a;

  CVector v = CVector::Zero(w);
  v(0) = 1.0;
  v = expm_antihermitian(squeeze_gen) * v;
  v = expm_antihermitian(displace_gen) * v;

  SingleModeState out;
  out.amplitudes = v.head(d);
  const double kept = out.amplitudes.squaredNorm();
  out.leaked_norm = std::max(0.0, 1.0 - kept / v.squaredNorm());
  if (out.leaked_norm > max_leak) {
    std::ostringstream os;
    os << "squeezed_coherent: truncation d=" << d << " too small, leaked norm " << out.leaked_norm;
    throw TruncationError(os.str(), out.leaked_norm);
  }
  out.amplitudes /= std::sqrt(kept);
  return out;
}

/// Kronecker product of per-mode states, in mode order.
inline QuantumState tensor_product(const ModeSpace& space, const std::vector<CVector>& factors) {
  if (factors.size() != space.mode_count()) throw InvalidArgument("tensor_product: factor count mismatch");
  CVector v = CVector::Ones(1);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].size() != space.dim(i)) throw InvalidArgument("tensor_product: factor dimension mismatch");
    CVector next(v.size() * factors[i].size());
    for (Eigen::Index a = 0; a < v.size(); ++a) next.segment(a * factors[i].size(), factors[i].size()) = v(a) * factors[i];
    v = std::move(next);
  }
  QuantumState s(space, std::move(v));
  s.normalize();
  return s;
}

struct PreparedState {
  QuantumState state;
  std::vector<double> leaked_norm;  ///< per mode
};

inline PreparedState product_state(const InitialStateSpec& spec, const ModeSpace& space) {
  if (spec.modes.size() != space.mode_count())
    throw InvalidArgument("product_state: spec has " + std::to_string(spec.modes.size()) + " modes, space has " +
                          std::to_string(space.mode_count()));
  std::vector<CVector> factors;
  std::vector<double> leaks;
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    SingleModeState m = squeezed_coherent(spec.alpha(i, space.hbar()), spec.modes[i].r, space.dim(i), spec.working_dim,
                                           spec.max_leaked_norm);
    factors.push_back(std::move(m.amplitudes));
    leaks.push_back(m.leaked_norm);
  }
  return {tensor_product(space, factors), std::move(leaks)};
}

/// Σ_i (p̂_i² − 2 p0_i p̂_i); equal to Σ_i (p̂_i − p0_i)² minus the constant Σ p0_i².
inline OperatorPoly mixing_hamiltonian(const InitialStateSpec& spec) {
  OperatorPoly h;
  for (std::size_t i = 0; i < spec.modes.size(); ++i) {
    h += OperatorPoly::p(i, 2);
    h += OperatorPoly::p(i, 1).scaled(-2.0 * spec.modes[i].p0);
  }
  return h;
}

}  // namespace bmip
