#pragma once

// Fock-basis statistics, partial traces, and sequential homodyne sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"
#include "bosonic_mip/projector.hpp"
#include "bosonic_mip/state.hpp"

namespace bmip {

/// Probabilities over a joint Fock basis (row-major, mode 0 most significant).
class FockDistribution {
 public:
  FockDistribution() = default;
  FockDistribution(std::vector<int> dims, RVector probs) : space_(std::move(dims)), probs_(std::move(probs)) {
    if (static_cast<std::size_t>(probs_.size()) != space_.total_dimension())
      throw InvalidArgument("FockDistribution: size does not match dimensions");
  }

  const ModeSpace& space() const noexcept { return space_; }
  const RVector& probabilities() const noexcept { return probs_; }
  std::size_t mode_count() const noexcept { return space_.mode_count(); }
  double total() const { return probs_.sum(); }

  double probability(const std::vector<int>& occupation) const {
    return probs_(static_cast<Eigen::Index>(space_.index_of(occupation)));
  }

  /// Σ p(n) over outcomes selected by the projector.
  double probability(const FockProjector& proj) const {
    double s = 0.0;
    for (std::size_t i : proj.indices(space_)) s += probs_(static_cast<Eigen::Index>(i));
    return s;
  }

  /// Outcomes sorted by decreasing probability; ties keep basis order.
  std::vector<std::pair<std::vector<int>, double>> top(std::size_t k) const {
    std::vector<std::size_t> idx(static_cast<std::size_t>(probs_.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](std::size_t a, std::size_t b) {
      const double pa = probs_(static_cast<Eigen::Index>(a)), pb = probs_(static_cast<Eigen::Index>(b));
      return pa != pb ? pa > pb : a < b;
    });
    std::vector<std::pair<std::vector<int>, double>> out;
    for (std::size_t i = 0; i < k; ++i) out.emplace_back(space_.occupation_of(idx[i]), probs_(static_cast<Eigen::Index>(idx[i])));
    return out;
  }

  std::vector<int> argmax() const { return top(1).front().first; }

 private:
  ModeSpace space_{std::vector<int>{2}};
  RVector probs_ = RVector::Zero(2);
};

inline FockDistribution fock_probabilities(const QuantumState& psi) {
  return FockDistribution(psi.space().dims(), psi.amplitudes().cwiseAbs2());
}

namespace detail {

inline void check_subset(const std::vector<std::size_t>& keep, std::size_t modes) {
  if (keep.empty()) throw InvalidArgument("mode subset must be nonempty");
  std::set<std::size_t> seen;
  for (std::size_t m : keep) {
    if (m >= modes) throw InvalidArgument("mode subset index " + std::to_string(m) + " out of range");
    if (!seen.insert(m).second) throw InvalidArgument("mode subset has duplicate index " + std::to_string(m));
  }
}

/// Splits each joint index into (kept index, rest index) for a mode subset.
struct SubsetIndexer {
  std::vector<int> kept_dims, rest_dims;
  std::vector<std::size_t> kept_of, rest_of;

  SubsetIndexer(const ModeSpace& space, const std::vector<std::size_t>& keep) {
    check_subset(keep, space.mode_count());
    std::vector<bool> is_kept(space.mode_count(), false);
    for (std::size_t m : keep) is_kept[m] = true;
    std::vector<std::size_t> rest;
    for (std::size_t m = 0; m < space.mode_count(); ++m)
      if (!is_kept[m]) rest.push_back(m);
    for (std::size_t m : keep) kept_dims.push_back(space.dim(m));
    for (std::size_t m : rest) rest_dims.push_back(space.dim(m));
    const std::size_t n = space.total_dimension();
    kept_of.resize(n);
    rest_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t k = 0, r = 0;
      for (std::size_t m : keep) k = k * static_cast<std::size_t>(space.dim(m)) + static_cast<std::size_t>(space.digit(i, m));
      for (std::size_t m : rest) r = r * static_cast<std::size_t>(space.dim(m)) + static_cast<std::size_t>(space.digit(i, m));
      kept_of[i] = k;
      rest_of[i] = r;
    }
  }

  std::size_t kept_size() const {
    return std::accumulate(kept_dims.begin(), kept_dims.end(), std::size_t{1}, [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }
  std::size_t rest_size() const {
    return std::accumulate(rest_dims.begin(), rest_dims.end(), std::size_t{1}, [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }
};

}  // namespace detail

/// Diagonal partial trace onto `keep` (in the given order).
inline FockDistribution marginal(const FockDistribution& dist, const std::vector<std::size_t>& keep) {
  const detail::SubsetIndexer ix(dist.space(), keep);
  RVector out = RVector::Zero(static_cast<Eigen::Index>(ix.kept_size()));
  for (std::size_t i = 0; i < ix.kept_of.size(); ++i) out(static_cast<Eigen::Index>(ix.kept_of[i])) += dist.probabilities()(static_cast<Eigen::Index>(i));
  return FockDistribution(ix.kept_dims, std::move(out));
}

inline FockDistribution marginal(const QuantumState& psi, const std::vector<std::size_t>& keep) {
  return marginal(fock_probabilities(psi), keep);
}

inline constexpr std::size_t kMaxReducedDimension = 4096;

/// ρ_keep = Tr_rest |ψ><ψ|.
inline CMatrix reduced_density(const QuantumState& psi, const std::vector<std::size_t>& keep) {
  const detail::SubsetIndexer ix(psi.space(), keep);
  if (ix.kept_size() > kMaxReducedDimension)
    throw InvalidArgument("reduced_density: kept dimension " + std::to_string(ix.kept_size()) + " exceeds " +
                          std::to_string(kMaxReducedDimension));
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(ix.kept_size()), static_cast<Eigen::Index>(ix.rest_size()));
  for (std::size_t i = 0; i < ix.kept_of.size(); ++i)
    m(static_cast<Eigen::Index>(ix.kept_of[i]), static_cast<Eigen::Index>(ix.rest_of[i])) = psi.amplitudes()(static_cast<Eigen::Index>(i));
  return m * m.adjoint();
}

// ---------------------------------------------------------------------------
// Quadratures

/// Oscillator eigenfunctions ψ_0..ψ_{count−1} at x:
/// ψ_n(x) = (πħ)^{-1/4} (2ⁿ n!)^{-1/2} H_n(x/√ħ) e^{−x²/(2ħ)}, by upward recurrence.
inline RVector hermite_functions(double x, int count, double hbar) {
  RVector psi(count);
  const double xi = x / std::sqrt(hbar);
  psi(0) = std::pow(std::numbers::pi * hbar, -0.25) * std::exp(-0.5 * xi * xi);
  if (count > 1) psi(1) = std::sqrt(2.0) * xi * psi(0);
  for (int n = 1; n + 1 < count; ++n)
    psi(n + 1) = std::sqrt(2.0 / (n + 1)) * xi * psi(n) - std::sqrt(static_cast<double>(n) / (n + 1)) * psi(n - 1);
  return psi;
}

struct HomodyneGrid {
  int points = 2001;
  double half_width = 0.0;  ///< 0 selects max(6, √(2ħ d_max))·√ħ

  std::vector<double> build(int d_max, double hbar) const {
    if (points < 3) throw InvalidArgument("HomodyneGrid: need at least 3 points");
    const double w = half_width > 0.0 ? half_width : std::max(6.0, std::sqrt(2.0 * hbar * d_max)) * std::sqrt(hbar);
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = -w + 2.0 * w * i / (points - 1);
    return g;
  }
};

namespace detail {

inline double trapezoid(const std::vector<double>& x, const RVector& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y(static_cast<Eigen::Index>(i)) + y(static_cast<Eigen::Index>(i - 1)));
  return s;
}

/// Row i holds ψ_0..ψ_{d−1} at grid[i].
inline Eigen::MatrixXd hermite_table(const std::vector<double>& grid, int d, double hbar) {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(grid.size()), d);
  for (std::size_t i = 0; i < grid.size(); ++i) t.row(static_cast<Eigen::Index>(i)) = hermite_functions(grid[i], d, hbar).transpose();
  return t;
}

inline RVector pdf_from_table(const CMatrix& rho, const Eigen::MatrixXd& table) {
  // p(x) = Σ ρ_mn ψ_m ψ_n = Re(φᵀ ρ φ) with real φ
  const CMatrix rt = table.cast<cplx>() * rho;
  RVector p(table.rows());
  for (Eigen::Index i = 0; i < table.rows(); ++i) p(i) = std::max(0.0, (rt.row(i) * table.row(i).transpose().cast<cplx>())(0).real());
  return p;
}

inline void check_grid(const std::vector<double>& grid) {
  if (grid.size() < 3) throw InvalidArgument("quadrature grid needs at least 3 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidArgument("quadrature grid must be strictly increasing");
}

}  // namespace detail

/// p(x) on a grid for a single-mode density matrix.
inline RVector quadrature_pdf(const CMatrix& rho, const std::vector<double>& grid, double hbar) {
  detail::check_grid(grid);
  const int d = static_cast<int>(rho.rows());
  const double need = std::sqrt(2.0 * hbar * d);
  if (grid.front() > -need || grid.back() < need)
    throw InvalidArgument("quadrature_pdf: grid must cover |x| <= " + std::to_string(need));
  const RVector p = detail::pdf_from_table(rho, detail::hermite_table(grid, d, hbar));
  const double mass = detail::trapezoid(grid, p);
  if (std::abs(mass - rho.trace().real()) > 1e-2)
    throw NumericalError("quadrature_pdf: grid too narrow, integral deficit " + std::to_string(rho.trace().real() - mass));
  return p;
}

// ---------------------------------------------------------------------------
// Sequential homodyne sampling

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::mt19937_64 shot_rng(std::uint64_t seed, std::uint64_t shot) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ shot));
}

struct HomodyneRecord {
  std::vector<std::size_t> modes;           ///< measurement order
  std::vector<std::vector<double>> samples; ///< [shot][position in `modes`]
  std::size_t resampled = 0;
  std::uint64_t seed = 0;

  std::size_t shots() const noexcept { return samples.size(); }
};

namespace detail {

/// Inverse CDF of a tabulated pdf: cumulative trapezoid, linear interpolation.
inline double sample_inverse_cdf(const std::vector<double>& grid, const RVector& pdf, double u) {
  std::vector<double> cdf(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    cdf[i] = cdf[i - 1] + 0.5 * (grid[i] - grid[i - 1]) * (pdf(static_cast<Eigen::Index>(i)) + pdf(static_cast<Eigen::Index>(i - 1)));
  const double target = u * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.begin()) return grid.front();
  if (it == cdf.end()) return grid.back();
  const std::size_t hi = static_cast<std::size_t>(it - cdf.begin());
  const std::size_t lo = hi - 1;
  const double span = cdf[hi] - cdf[lo];
  const double f = span > 0.0 ? (target - cdf[lo]) / span : 0.0;
  return grid[lo] + f * (grid[hi] - grid[lo]);
}

/// Conditional amplitudes as a (first mode) × (remaining modes) matrix.
struct Conditional {
  std::vector<int> dims;  ///< remaining mode dimensions in measurement order
  CVector amps;

  CMatrix as_matrix() const {
    const Eigen::Index d0 = dims.front();
    const Eigen::Index rest = amps.size() / d0;
    return Eigen::Map<const CMatrix>(amps.data(), rest, d0).transpose();  // row-major split
  }
};

inline Conditional reorder(const QuantumState& psi, const std::vector<std::size_t>& order) {
  const SubsetIndexer ix(psi.space(), order);
  Conditional c;
  c.dims = ix.kept_dims;
  CVector v = CVector::Zero(static_cast<Eigen::Index>(ix.kept_size()));
  if (ix.rest_size() != 1) throw InvalidArgument("homodyne_sample: order must list every remaining mode");
  for (std::size_t i = 0; i < ix.kept_of.size(); ++i) v(static_cast<Eigen::Index>(ix.kept_of[i])) = psi.amplitudes()(static_cast<Eigen::Index>(i));
  c.amps = std::move(v);
  return c;
}

}  // namespace detail

/// Measures x̂ on `order` modes one after another, conditioning the rest of
/// the state on each outcome. Every mode of `psi` must appear in `order`; to
/// measure a subset, condition or trace the others away first.
inline HomodyneRecord homodyne_sample(const QuantumState& psi, const std::vector<std::size_t>& order, std::size_t shots,
                                      std::uint64_t seed, const HomodyneGrid& grid_opts = {}, int max_attempts = 100) {
  if (shots == 0) throw InvalidArgument("homodyne_sample: shots must be >= 1");
  if (std::abs(psi.norm() - 1.0) > 1e-9) throw InvalidArgument("homodyne_sample: state must be unit norm");
  const double hbar = psi.space().hbar();
  const detail::Conditional start = detail::reorder(psi, order);
  const int d_max = *std::max_element(start.dims.begin(), start.dims.end());
  const std::vector<double> grid = grid_opts.build(d_max, hbar);
  std::map<int, Eigen::MatrixXd> tables;
  for (int d : start.dims)
    if (!tables.count(d)) tables.emplace(d, detail::hermite_table(grid, d, hbar));

  HomodyneRecord rec;
  rec.modes = order;
  rec.seed = seed;
  rec.samples.reserve(shots);
  for (std::size_t shot = 0; shot < shots; ++shot) {
    std::mt19937_64 rng = shot_rng(seed, shot);
    bool done = false;
    for (int attempt = 0; attempt < max_attempts && !done; ++attempt) {
      detail::Conditional cur = start;
      std::vector<double> xs;
      bool ok = true;
      for (std::size_t k = 0; k < order.size(); ++k) {
        const CMatrix m = cur.as_matrix();  // d0 × rest
        const CMatrix rho = m * m.adjoint();
        const Eigen::MatrixXd& table = tables.at(cur.dims.front());
        const RVector pdf = detail::pdf_from_table(rho / rho.trace().real(), table);
        const double x = detail::sample_inverse_cdf(grid, pdf, uniform01(rng));
        xs.push_back(x);
        if (k + 1 == order.size()) break;
        const RVector phi = hermite_functions(x, cur.dims.front(), hbar);
        CVector next = m.transpose() * phi.cast<cplx>();  // Σ_n ψ_n(x) ψ[n, rest]
        const double nn = next.norm();
        if (!(nn >= 1e-12)) {
          ok = false;
          break;
        }
        cur.amps = next / nn;
        cur.dims.erase(cur.dims.begin());
      }
      if (ok) {
        rec.samples.push_back(std::move(xs));
        done = true;
      } else {
        ++rec.resampled;
      }
    }
    if (!done) throw NumericalError("homodyne_sample: conditional norm underflow persisted after resampling");
  }
  return rec;
}

struct BitHistogram {
  std::vector<std::vector<int>> bits;  ///< per shot
  std::map<std::vector<int>, std::size_t> counts;
  double threshold = 0.0;

  double frequency(const std::vector<int>& pattern) const {
    const auto it = counts.find(pattern);
    return bits.empty() || it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(bits.size());
  }
};

/// bit = 1 iff x/√ħ ≥ 1/√(2|V|).
inline BitHistogram threshold_bits(const HomodyneRecord& rec, std::size_t num_vertices, double hbar = 1.0) {
  if (rec.samples.empty()) throw InvalidArgument("threshold_bits: empty record");
  if (num_vertices == 0) throw InvalidArgument("threshold_bits: |V| must be positive");
  BitHistogram h;
  h.threshold = 1.0 / std::sqrt(2.0 * static_cast<double>(num_vertices));
  const double scale = std::sqrt(hbar);
  for (const auto& shot : rec.samples) {
    std::vector<int> b;
    for (double x : shot) b.push_back(x / scale >= h.threshold ? 1 : 0);
    ++h.counts[b];
    h.bits.push_back(std::move(b));
  }
  return h;
}

/// Σ p(n) over outcomes with n_i ≥ 1 on `clique` and n_j = 0 on `zero`.
inline double spad_success(const FockDistribution& dist, const std::vector<std::size_t>& clique, const std::vector<std::size_t>& zero) {
  if (clique.empty()) throw InvalidArgument("spad_success: clique modes must be nonempty");
  std::vector<ModeCondition> conds(dist.mode_count(), ModeCondition::any());
  for (std::size_t m : clique) {
    if (m >= conds.size()) throw InvalidArgument("spad_success: mode out of range");
    conds[m] = ModeCondition::at_least(1);
  }
  for (std::size_t m : zero) {
    if (m >= conds.size()) throw InvalidArgument("spad_success: mode out of range");
    if (conds[m].kind != ModeCondition::Kind::Any) throw InvalidArgument("spad_success: clique and zero modes overlap");
    conds[m] = ModeCondition::exactly(0);
  }
  return dist.probability(FockProjector(std::move(conds)));
}

// ---------------------------------------------------------------------------
// Conditional quadrature moments

/// <m|x̂²|n> of the untruncated oscillator restricted to levels < d; this is
/// what the second moment of the homodyne pdf measures.
inline CMatrix untruncated_x2(int d, double hbar) {
  const Quadratures q = quadratures(d + 2, hbar);
  return (q.x * q.x).topLeftCorner(d, d);
}

struct ConditionalX2 {
  double condition_probability = 0.0;
  std::vector<double> exact;
  std::vector<double> sampled;
  std::vector<double> standard_error;
  std::size_t shots = 0;
};

struct ConditionalX2Options {
  std::size_t shots = 0;  ///< 0 skips sampling
  std::uint64_t seed = 1;
  HomodyneGrid grid;
};

/// Projects ψ onto the per-mode Fock pattern of `conditioning` (pairs of
/// mode and photon number), renormalizes, and reports ⟨x̂²⟩ on `targets`.
inline ConditionalX2 conditional_x2(const QuantumState& psi, const std::vector<std::pair<std::size_t, int>>& conditioning,
                                    const std::vector<std::size_t>& targets, const ConditionalX2Options& opts = {}) {
  const ModeSpace& space = psi.space();
  std::vector<ModeCondition> conds(space.mode_count(), ModeCondition::any());
  std::vector<std::size_t> cond_modes;
  for (const auto& [m, n] : conditioning) {
    if (m >= space.mode_count()) throw InvalidArgument("conditional_x2: conditioning mode out of range");
    if (n < 0 || n >= space.dim(m)) throw InvalidArgument("conditional_x2: pattern outside truncation");
    conds[m] = ModeCondition::exactly(n);
    cond_modes.push_back(m);
  }
  std::vector<std::size_t> all = targets;
  all.insert(all.end(), cond_modes.begin(), cond_modes.end());
  detail::check_subset(all, space.mode_count());
  if (all.size() != space.mode_count()) throw InvalidArgument("conditional_x2: every mode must be a target or conditioned");

  CVector amps = CVector::Zero(psi.amplitudes().size());
  for (std::size_t i : FockProjector(conds).indices(space)) amps(static_cast<Eigen::Index>(i)) = psi.amplitudes()(static_cast<Eigen::Index>(i));
  ConditionalX2 out;
  out.condition_probability = amps.squaredNorm();
  if (out.condition_probability < 1e-9) throw NumericalError("conditional_x2: conditioning probability below 1e-9");
  const QuantumState cond(space, amps / std::sqrt(out.condition_probability));

  for (std::size_t t : targets) {
    const CMatrix rho = reduced_density(cond, {t});
    out.exact.push_back((rho * untruncated_x2(space.dim(t), space.hbar())).trace().real());
  }
  if (opts.shots == 0) return out;

  // The conditioned modes are in Fock states, so the targets factor out.
  const std::vector<std::size_t> keep = targets;
  const detail::SubsetIndexer ix(space, keep);
  CVector sub = CVector::Zero(static_cast<Eigen::Index>(ix.kept_size()));
  for (std::size_t i = 0; i < ix.kept_of.size(); ++i) sub(static_cast<Eigen::Index>(ix.kept_of[i])) += cond.amplitudes()(static_cast<Eigen::Index>(i));
  std::vector<std::size_t> order(keep.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const QuantumState target_state(ModeSpace(ix.kept_dims, space.hbar()), sub / sub.norm());
  const HomodyneRecord rec = homodyne_sample(target_state, order, opts.shots, opts.seed, opts.grid);
  out.shots = rec.shots();
  for (std::size_t k = 0; k < keep.size(); ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& shot : rec.samples) {
      const double v = shot[k] * shot[k];
      s += v;
      s2 += v * v;
    }
    const double n = static_cast<double>(rec.shots());
    const double mean = s / n;
    const double var = n > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1)) : 0.0;
    out.sampled.push_back(mean);
    out.standard_error.push_back(std::sqrt(var / n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fair sampling

struct FairnessEntry {
  std::vector<double> solution_probabilities;
  double success = 0.0;
  double std_dev = 0.0;              ///< population standard deviation
  std::optional<double> bias;        ///< (P1 − P2)/(P1 + P2), two solutions only
  bool bias_undefined = false;       ///< two solutions with P1 + P2 = 0
  double total = 0.0;
};

inline FairnessEntry fairness_metrics(const std::vector<double>& probs, double total) {
  if (probs.size() < 2) throw InvalidArgument("fairness_metrics: need at least two solutions");
  FairnessEntry e;
  e.solution_probabilities = probs;
  e.total = total;
  e.success = std::accumulate(probs.begin(), probs.end(), 0.0);
  const double mean = e.success / static_cast<double>(probs.size());
  double ss = 0.0;
  for (double p : probs) ss += (p - mean) * (p - mean);
  e.std_dev = std::sqrt(ss / static_cast<double>(probs.size()));
  if (probs.size() == 2) {
    const double s = probs[0] + probs[1];
    if (s > 0.0) e.bias = (probs[0] - probs[1]) / s;
    else e.bias_undefined = true;
  }
  return e;
}

inline FairnessEntry fairness_metrics(const FockDistribution& dist, const std::vector<FockProjector>& solutions) {
  std::vector<double> probs;
  for (const FockProjector& s : solutions) probs.push_back(dist.probability(s));
  return fairness_metrics(probs, dist.total());
}

}  // namespace bmip
