#pragma once

// Truncated single-mode bosonic operators, multi-mode embedding and
// assembly of operator polynomials into sparse Hermitian matrices.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bosonic_mip/error.hpp"

namespace bmip {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor, std::int64_t>;

/// Largest total dimension for which a dense copy of an operator may be made.
inline constexpr std::size_t kMaxDenseDimension = 4096;

/// Per-mode truncation dimensions of a joint Fock basis plus the value of ħ.
///
/// Basis index layout is row-major: mode 0 is the most significant digit, so
/// |n0, n1, ..., n_{N-1}> has index sum_i n_i * stride_i with
/// stride_{N-1} = 1.
class ModeSpace {
 public:
  ModeSpace() = default;
  explicit ModeSpace(std::vector<int> dims, double hbar = 1.0) : dims_(std::move(dims)), hbar_(hbar) {
    if (dims_.empty()) throw InvalidArgument("ModeSpace: at least one mode is required");
    for (int d : dims_) {
      if (d < 2) throw InvalidArgument("ModeSpace: invalid dimension " + std::to_string(d) + " (must be >= 2)");
    }
    if (!(hbar_ > 0.0) || !std::isfinite(hbar_)) throw InvalidArgument("ModeSpace: hbar must be positive");
    strides_.assign(dims_.size(), 1);
    for (std::size_t i = dims_.size() - 1; i > 0; --i) strides_[i - 1] = strides_[i] * static_cast<std::size_t>(dims_[i]);
    total_ = strides_[0] * static_cast<std::size_t>(dims_[0]);
  }

  static ModeSpace uniform(std::size_t modes, int d, double hbar = 1.0) {
    return ModeSpace(std::vector<int>(modes, d), hbar);
  }

  std::size_t mode_count() const noexcept { return dims_.size(); }
  int dim(std::size_t mode) const { return dims_.at(mode); }
  const std::vector<int>& dims() const noexcept { return dims_; }
  std::size_t stride(std::size_t mode) const { return strides_.at(mode); }
  std::size_t total_dimension() const noexcept { return total_; }
  double hbar() const noexcept { return hbar_; }

  std::size_t index_of(const std::vector<int>& occupation) const {
    if (occupation.size() != dims_.size()) throw InvalidArgument("ModeSpace::index_of: wrong number of modes");
    std::size_t idx = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (occupation[i] < 0 || occupation[i] >= dims_[i]) throw InvalidArgument("ModeSpace::index_of: occupation outside truncation");
      idx += static_cast<std::size_t>(occupation[i]) * strides_[i];
    }
    return idx;
  }

  std::vector<int> occupation_of(std::size_t index) const {
    std::vector<int> occ(dims_.size());
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      occ[i] = static_cast<int>((index / strides_[i]) % static_cast<std::size_t>(dims_[i]));
    }
    return occ;
  }

  int digit(std::size_t index, std::size_t mode) const {
    return static_cast<int>((index / strides_[mode]) % static_cast<std::size_t>(dims_[mode]));
  }

  bool operator==(const ModeSpace& o) const { return dims_ == o.dims_ && hbar_ == o.hbar_; }

 private:
  std::vector<int> dims_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
  double hbar_ = 1.0;
};

// ---------------------------------------------------------------------------
// Operator polynomials

enum class Primitive { N, X, P };

inline char primitive_symbol(Primitive p) {
  switch (p) {
    case Primitive::N: return 'N';
    case Primitive::X: return 'X';
    case Primitive::P: return 'P';
  }
  return '?';
}

struct Factor {
  std::size_t mode = 0;
  Primitive primitive = Primitive::N;
  int power = 1;

  bool operator==(const Factor&) const = default;
  auto operator<=>(const Factor&) const = default;
};

/// Product of per-mode primitive powers, kept sorted by (mode, primitive).
using Monomial = std::vector<Factor>;

inline Monomial normalize_monomial(Monomial m) {
  std::sort(m.begin(), m.end(), [](const Factor& a, const Factor& b) {
    return std::tie(a.mode, a.primitive) < std::tie(b.mode, b.primitive);
  });
  Monomial out;
  for (const Factor& f : m) {
    if (f.power < 1) throw InvalidArgument("monomial power must be >= 1");
    if (!out.empty() && out.back().mode == f.mode && out.back().primitive == f.primitive) {
      out.back().power += f.power;
    } else {
      out.push_back(f);
    }
  }
  return out;
}

inline Monomial multiply(const Monomial& a, const Monomial& b) {
  Monomial m = a;
  m.insert(m.end(), b.begin(), b.end());
  return normalize_monomial(std::move(m));
}

struct OperatorTerm {
  double coeff = 0.0;
  Monomial monomial;
};

/// Real polynomial in the per-mode primitives {n̂, x̂, p̂}. The empty monomial
/// is the identity. Like monomials are merged; the term order is canonical
/// (sorted by monomial), so two equal polynomials serialize identically.
class OperatorPoly {
 public:
  OperatorPoly() = default;

  static OperatorPoly constant(double c) {
    OperatorPoly p;
    p.add(c, {});
    return p;
  }
  static OperatorPoly single(Primitive prim, std::size_t mode, int power = 1, double coeff = 1.0) {
    OperatorPoly p;
    p.add(coeff, {Factor{mode, prim, power}});
    return p;
  }
  static OperatorPoly n(std::size_t mode, int power = 1) { return single(Primitive::N, mode, power); }
  static OperatorPoly x(std::size_t mode, int power = 1) { return single(Primitive::X, mode, power); }
  static OperatorPoly p(std::size_t mode, int power = 1) { return single(Primitive::P, mode, power); }

  /// Adds coeff * monomial. Zero coefficients are dropped.
  OperatorPoly& add(double coeff, Monomial monomial) {
    if (!std::isfinite(coeff)) throw InvalidArgument("OperatorPoly: non-finite coefficient");
    monomial = normalize_monomial(std::move(monomial));
    auto it = terms_.find(monomial);
    if (it == terms_.end()) {
      if (coeff != 0.0) terms_.emplace(std::move(monomial), coeff);
    } else {
      it->second += coeff;
      if (it->second == 0.0) terms_.erase(it);
    }
    return *this;
  }

  std::vector<OperatorTerm> terms() const {
    std::vector<OperatorTerm> out;
    out.reserve(terms_.size());
    for (const auto& [m, c] : terms_) out.push_back({c, m});
    return out;
  }
  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }

  double constant_term() const {
    auto it = terms_.find(Monomial{});
    return it == terms_.end() ? 0.0 : it->second;
  }
  /// Copy without the identity component.
  OperatorPoly without_constant() const {
    OperatorPoly out = *this;
    out.terms_.erase(Monomial{});
    return out;
  }

  std::size_t max_mode() const {
    std::size_t m = 0;
    for (const auto& [mono, c] : terms_)
      for (const Factor& f : mono) m = std::max(m, f.mode);
    return m;
  }

  /// true iff every factor is a number-operator power.
  bool number_only() const {
    for (const auto& [mono, c] : terms_)
      for (const Factor& f : mono)
        if (f.primitive != Primitive::N) return false;
    return true;
  }

  OperatorPoly scaled(double factor) const {
    OperatorPoly out;
    for (const auto& [m, c] : terms_) out.add(c * factor, m);
    return out;
  }

  OperatorPoly& operator+=(const OperatorPoly& o) {
    for (const auto& [m, c] : o.terms_) add(c, m);
    return *this;
  }
  OperatorPoly& operator-=(const OperatorPoly& o) {
    for (const auto& [m, c] : o.terms_) add(-c, m);
    return *this;
  }
  friend OperatorPoly operator+(OperatorPoly a, const OperatorPoly& b) { return a += b; }
  friend OperatorPoly operator-(OperatorPoly a, const OperatorPoly& b) { return a -= b; }
  friend OperatorPoly operator*(const OperatorPoly& a, const OperatorPoly& b) {
    OperatorPoly out;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) out.add(ca * cb, multiply(ma, mb));
    return out;
  }
  friend OperatorPoly operator*(double s, const OperatorPoly& a) { return a.scaled(s); }
  friend OperatorPoly operator+(OperatorPoly a, double c) { return a += constant(c); }
  friend OperatorPoly operator-(OperatorPoly a, double c) { return a += constant(-c); }

  bool operator==(const OperatorPoly& o) const { return terms_ == o.terms_; }

  /// Canonical text form, e.g. "+1*N0^2 -10*N0 +25". Used as a cache key.
  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (!first) os << ' ';
      first = false;
      os << (c >= 0 ? "+" : "") << c;
      for (const Factor& f : m) {
        os << '*' << primitive_symbol(f.primitive) << f.mode;
        if (f.power != 1) os << '^' << f.power;
      }
    }
    return first ? std::string("0") : os.str();
  }

 private:
  std::map<Monomial, double> terms_;
};

inline OperatorPoly square(const OperatorPoly& a) { return a * a; }

// ---------------------------------------------------------------------------
// Single-mode matrices

inline void check_dimension(int d) {
  if (d < 2) throw InvalidArgument("invalid dimension " + std::to_string(d) + " (must be >= 2)");
}

/// Truncated annihilation operator: a[m, m+1] = sqrt(m+1).
inline CMatrix annihilation(int d) {
  check_dimension(d);
  CMatrix a = CMatrix::Zero(d, d);
  for (int m = 0; m + 1 < d; ++m) a(m, m + 1) = std::sqrt(static_cast<double>(m + 1));
  return a;
}

inline CMatrix number_operator(int d) {
  check_dimension(d);
  CMatrix n = CMatrix::Zero(d, d);
  for (int m = 0; m < d; ++m) n(m, m) = static_cast<double>(m);
  return n;
}

struct Quadratures {
  CMatrix x;
  CMatrix p;
};

/// x̂ = sqrt(ħ/2)(â + â†), p̂ = i sqrt(ħ/2)(â† − â), both truncated to d levels.
inline Quadratures quadratures(int d, double hbar = 1.0) {
  check_dimension(d);
  if (!(hbar > 0.0)) throw InvalidArgument("quadratures: hbar must be positive");
  const CMatrix a = annihilation(d);
  const CMatrix ad = a.adjoint();
  const double s = std::sqrt(hbar / 2.0);
  return {s * (a + ad), cplx(0.0, s) * (ad - a)};
}

/// Matrix power of a truncated primitive. Powers are taken after truncation,
/// so x̂^k is a function of the truncated x̂ and commutes with it.
inline CMatrix primitive_matrix(Primitive prim, int power, int d, double hbar) {
  if (power < 1) throw InvalidArgument("primitive power must be >= 1");
  CMatrix base;
  switch (prim) {
    case Primitive::N: base = number_operator(d); break;
    case Primitive::X: base = quadratures(d, hbar).x; break;
    case Primitive::P: base = quadratures(d, hbar).p; break;
  }
  CMatrix out = base;
  for (int k = 1; k < power; ++k) out = out * base;
  return out;
}

// ---------------------------------------------------------------------------
// Sparse Hermitian operators

/// Immutable sparse operator over a ModeSpace's joint basis.
class SparseHermitian {
 public:
  SparseHermitian() = default;
  explicit SparseHermitian(SparseMatrix m) : m_(std::move(m)) {
    m_.makeCompressed();
    diagonal_ = true;
    for (Eigen::Index r = 0; r < m_.outerSize() && diagonal_; ++r)
      for (SparseMatrix::InnerIterator it(m_, r); it; ++it)
        if (it.col() != r && it.value() != cplx(0.0)) {
          diagonal_ = false;
          break;
        }
  }

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const SparseMatrix& matrix() const noexcept { return m_; }
  std::size_t nonzeros() const noexcept { return static_cast<std::size_t>(m_.nonZeros()); }
  bool is_diagonal() const noexcept { return diagonal_; }

  /// Real parts of the diagonal (imaginary parts vanish for Hermitian input).
  RVector diagonal() const {
    RVector d = RVector::Zero(m_.rows());
    for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(m_, r); it; ++it)
        if (it.col() == r) d(r) += it.value().real();
    return d;
  }

  cplx coeff(std::size_t row, std::size_t col) const {
    return m_.coeff(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  }

  /// max |H - H†| elementwise.
  double hermiticity_error() const {
    SparseMatrix diff = m_ - SparseMatrix(m_.adjoint());
    double mx = 0.0;
    for (Eigen::Index r = 0; r < diff.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(diff, r); it; ++it) mx = std::max(mx, std::abs(it.value()));
    return mx;
  }

  CVector apply(const CVector& v) const { return m_ * v; }

  CMatrix to_dense() const {
    if (dimension() > kMaxDenseDimension)
      throw InvalidArgument("SparseHermitian::to_dense: dimension " + std::to_string(dimension()) + " exceeds dense limit");
    return CMatrix(m_);
  }

  /// Adds c * identity.
  SparseHermitian shifted(double c) const {
    SparseMatrix id(m_.rows(), m_.cols());
    id.setIdentity();
    return SparseHermitian(SparseMatrix(m_ + c * id));
  }

  SparseHermitian scaled(double s) const { return SparseHermitian(SparseMatrix(s * m_)); }

  friend SparseHermitian operator+(const SparseHermitian& a, const SparseHermitian& b) {
    return SparseHermitian(SparseMatrix(a.m_ + b.m_));
  }

 private:
  SparseMatrix m_;
  bool diagonal_ = true;
};

inline SparseHermitian identity_operator(const ModeSpace& space) {
  SparseMatrix id(static_cast<Eigen::Index>(space.total_dimension()), static_cast<Eigen::Index>(space.total_dimension()));
  id.setIdentity();
  return SparseHermitian(std::move(id));
}

namespace detail {

struct RowEntry {
  int col;
  cplx value;
};

inline std::vector<std::vector<RowEntry>> sparse_rows(const CMatrix& m) {
  std::vector<std::vector<RowEntry>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (std::abs(m(r, c)) > 1e-300) rows[static_cast<std::size_t>(r)].push_back({static_cast<int>(c), m(r, c)});
  return rows;
}

/// Emits triplets of coeff * (⊗_k factor_k) ⊗ identity over the whole space.
/// Factors must act on distinct modes.
inline void emit_product(const ModeSpace& space, cplx coeff, const std::vector<std::pair<std::size_t, CMatrix>>& factors,
                         std::vector<Eigen::Triplet<cplx, std::int64_t>>& out) {
  std::vector<std::vector<std::vector<RowEntry>>> rows;
  rows.reserve(factors.size());
  for (const auto& [mode, mat] : factors) rows.push_back(sparse_rows(mat));
  const std::size_t total = space.total_dimension();
  const std::size_t nf = factors.size();
  std::vector<std::size_t> pos(nf);
  for (std::size_t i = 0; i < total; ++i) {
    // odometer over the nonzeros of each factor's row
    bool any_empty = false;
    std::vector<const std::vector<RowEntry>*> cur(nf);
    for (std::size_t k = 0; k < nf; ++k) {
      cur[k] = &rows[k][static_cast<std::size_t>(space.digit(i, factors[k].first))];
      if (cur[k]->empty()) any_empty = true;
      pos[k] = 0;
    }
    if (any_empty) continue;
    while (true) {
      std::int64_t col = static_cast<std::int64_t>(i);
      cplx v = coeff;
      for (std::size_t k = 0; k < nf; ++k) {
        const RowEntry& e = (*cur[k])[pos[k]];
        const std::size_t mode = factors[k].first;
        col += (static_cast<std::int64_t>(e.col) - space.digit(i, mode)) * static_cast<std::int64_t>(space.stride(mode));
        v *= e.value;
      }
      out.emplace_back(static_cast<std::int64_t>(i), col, v);
      std::size_t k = 0;
      while (k < nf && ++pos[k] == cur[k]->size()) pos[k++] = 0;
      if (k == nf) break;
    }
  }
}

inline SparseHermitian from_triplets(const ModeSpace& space, std::vector<Eigen::Triplet<cplx, std::int64_t>>& trips) {
  const auto n = static_cast<std::int64_t>(space.total_dimension());
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  double scale = 0.0;
  for (std::int64_t k = 0; k < m.nonZeros(); ++k) scale = std::max(scale, std::abs(m.valuePtr()[k]));
  const double cutoff = 1e-14 * std::max(scale, 1.0);
  m.prune([cutoff](const std::int64_t&, const std::int64_t&, const cplx& v) { return std::abs(v) > cutoff; });
  return SparseHermitian(std::move(m));
}

}  // namespace detail

/// Embeds a single-mode matrix on `mode`, identity elsewhere.
inline SparseHermitian embed(const CMatrix& single, std::size_t mode, const ModeSpace& space) {
  if (mode >= space.mode_count()) throw InvalidArgument("embed: mode index " + std::to_string(mode) + " out of range");
  if (single.rows() != space.dim(mode) || single.cols() != space.dim(mode))
    throw InvalidArgument("embed: matrix dimension does not match mode " + std::to_string(mode));
  std::vector<Eigen::Triplet<cplx, std::int64_t>> trips;
  detail::emit_product(space, cplx(1.0), {{mode, single}}, trips);
  return detail::from_triplets(space, trips);
}

/// Σ_terms coeff · Π embed(primitive^power), including the identity term.
inline SparseHermitian assemble(const OperatorPoly& poly, const ModeSpace& space) {
  std::vector<Eigen::Triplet<cplx, std::int64_t>> trips;
  for (const OperatorTerm& term : poly.terms()) {
    std::vector<std::pair<std::size_t, CMatrix>> factors;
    for (const Factor& f : term.monomial) {
      if (f.mode >= space.mode_count())
        throw InvalidArgument("assemble: mode index " + std::to_string(f.mode) + " out of range");
      if (!factors.empty() && factors.back().first == f.mode)
        throw UnsupportedMonomial("assemble: mixed primitives on mode " + std::to_string(f.mode) + " in one monomial");
      factors.emplace_back(f.mode, primitive_matrix(f.primitive, f.power, space.dim(f.mode), space.hbar()));
    }
    detail::emit_product(space, cplx(term.coeff), factors, trips);
  }
  return detail::from_triplets(space, trips);
}

/// Thread-safe memo of assembled operators keyed by (poly, space).
class OperatorCache {
 public:
  std::shared_ptr<const SparseHermitian> get(const OperatorPoly& poly, const ModeSpace& space) {
    std::string key = poly.to_string() + "|";
    for (int d : space.dims()) key += std::to_string(d) + ",";
    std::ostringstream hb;
    hb.precision(17);
    hb << space.hbar();
    key += hb.str();
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto op = std::make_shared<const SparseHermitian>(assemble(poly, space));
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(op)).first->second;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

  static OperatorCache& global() {
    static OperatorCache cache;
    return cache;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const SparseHermitian>> cache_;
};

}  // namespace bmip
