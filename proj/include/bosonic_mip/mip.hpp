#pragma once

// Mixed-integer models and their compilation into problem Hamiltonians:
// integer and binary variables become number operators, non-negative
// continuous variables become x̂², constraints become penalty terms.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/fock.hpp"

namespace bmip {

enum class VarKind { Integer, Binary, Continuous };

inline std::string to_string(VarKind k) {
  switch (k) {
    case VarKind::Integer: return "integer";
    case VarKind::Binary: return "binary";
    case VarKind::Continuous: return "continuous";
  }
  return "?";
}

inline VarKind parse_var_kind(const std::string& s) {
  if (s == "integer" || s == "nonneg-integer") return VarKind::Integer;
  if (s == "binary") return VarKind::Binary;
  if (s == "continuous" || s == "nonneg-continuous") return VarKind::Continuous;
  throw InvalidArgument("unknown variable kind '" + s + "'");
}

/// Polynomial over model variables (by index) with real coefficients.
class Polynomial {
 public:
  using Monomial = std::vector<std::pair<std::size_t, int>>;  // (variable, power), sorted by variable

  Polynomial() = default;

  static Polynomial constant(double c) {
    Polynomial p;
    p.add(c, {});
    return p;
  }
  static Polynomial var(std::size_t v, int power = 1) {
    Polynomial p;
    p.add(1.0, {{v, power}});
    return p;
  }

  Polynomial& add(double coeff, Monomial m) {
    if (!std::isfinite(coeff)) throw InvalidArgument("Polynomial: non-finite coefficient");
    m = normalize(std::move(m));
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      if (coeff != 0.0) terms_.emplace(std::move(m), coeff);
    } else {
      it->second += coeff;
      if (it->second == 0.0) terms_.erase(it);
    }
    return *this;
  }

  const std::map<Monomial, double>& terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }

  double constant_term() const {
    auto it = terms_.find(Monomial{});
    return it == terms_.end() ? 0.0 : it->second;
  }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) {
      int s = 0;
      for (const auto& [v, p] : m) s += p;
      d = std::max(d, s);
    }
    return d;
  }
  bool is_linear() const { return degree() <= 1; }

  std::size_t max_variable() const {
    std::size_t mx = 0;
    for (const auto& [m, c] : terms_)
      for (const auto& [v, p] : m) mx = std::max(mx, v);
    return mx;
  }

  double evaluate(const std::vector<double>& values) const {
    double s = 0.0;
    for (const auto& [m, c] : terms_) {
      double t = c;
      for (const auto& [v, p] : m) t *= std::pow(values.at(v), p);
      s += t;
    }
    return s;
  }

  Polynomial scaled(double f) const {
    Polynomial out;
    for (const auto& [m, c] : terms_) out.add(c * f, m);
    return out;
  }

  Polynomial& operator+=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add(c, m);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    for (const auto& [m, c] : o.terms_) add(-c, m);
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator+(Polynomial a, double c) { return a += constant(c); }
  friend Polynomial operator-(Polynomial a, double c) { return a += constant(-c); }
  friend Polynomial operator*(double s, const Polynomial& a) { return a.scaled(s); }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m = ma;
        m.insert(m.end(), mb.begin(), mb.end());
        out.add(ca * cb, std::move(m));
      }
    return out;
  }
  bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }

 private:
  static Monomial normalize(Monomial m) {
    std::sort(m.begin(), m.end());
    Monomial out;
    for (const auto& [v, p] : m) {
      if (p < 1) throw InvalidArgument("Polynomial: power must be >= 1");
      if (!out.empty() && out.back().first == v) out.back().second += p;
      else out.emplace_back(v, p);
    }
    return out;
  }

  std::map<Monomial, double> terms_;
};

struct Variable {
  std::string name;
  VarKind kind = VarKind::Integer;
  /// Penalty weight name for the binary restriction μ n̂(n̂−1).
  std::string penalty = "mu";
  /// Upper end of the brute-force grid for continuous variables.
  std::optional<double> upper;
};

enum class Relation {
  LessEqual,  ///< lhs ≤ rhs, linear lhs only; becomes an equality with a slack
  Equal,      ///< lhs = rhs, penalized by w (lhs − rhs)²
  Vanishing,  ///< lhs = 0 for a form that is non-negative on the domain, penalized by w·lhs
};

inline std::string to_string(Relation r) {
  switch (r) {
    case Relation::LessEqual: return "<=";
    case Relation::Equal: return "==";
    case Relation::Vanishing: return "vanish";
  }
  return "?";
}

inline Relation parse_relation(const std::string& s) {
  if (s == "<=" || s == "le") return Relation::LessEqual;
  if (s == "==" || s == "=" || s == "eq") return Relation::Equal;
  if (s == "vanish") return Relation::Vanishing;
  throw InvalidArgument("unknown constraint relation '" + s + "'");
}

struct Constraint {
  std::string name;
  Polynomial lhs;
  Relation relation = Relation::Equal;
  double rhs = 0.0;
  std::string penalty = "lambda";
};

/// A mixed-integer program: minimize `objective` subject to `constraints`,
/// all variables non-negative.
struct MipModel {
  std::string name;
  std::string family;  ///< e.g. "maxclique_binary"; selects penalty rules
  std::vector<Variable> variables;
  Polynomial objective;
  std::vector<Constraint> constraints;
  std::map<std::string, double> penalties;

  std::size_t add_variable(std::string vname, VarKind kind, std::string penalty = "mu") {
    variables.push_back(Variable{std::move(vname), kind, std::move(penalty), std::nullopt});
    return variables.size() - 1;
  }

  std::optional<std::size_t> index_of(const std::string& vname) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
      if (variables[i].name == vname) return i;
    return std::nullopt;
  }

  double penalty(const std::string& key) const {
    auto it = penalties.find(key);
    if (it == penalties.end()) throw InvalidArgument("model '" + name + "': missing penalty weight '" + key + "'");
    return it->second;
  }

  void validate() const {
    if (variables.empty()) throw InvalidArgument("model '" + name + "': at least one variable is required");
    for (std::size_t i = 0; i < variables.size(); ++i)
      for (std::size_t j = i + 1; j < variables.size(); ++j)
        if (variables[i].name == variables[j].name) throw InvalidArgument("model: duplicate variable '" + variables[i].name + "'");
    auto check_poly = [&](const Polynomial& p, const std::string& where) {
      if (!p.empty() && p.max_variable() >= variables.size())
        throw InvalidArgument("model '" + name + "': unknown variable in " + where);
    };
    check_poly(objective, "objective");
    for (const auto& [k, w] : penalties)
      if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("model: penalty '" + k + "' must be > 0");
    for (const Constraint& c : constraints) {
      check_poly(c.lhs, "constraint '" + c.name + "'");
      if (!std::isfinite(c.rhs)) throw InvalidArgument("model: non-finite rhs");
      if (c.relation == Relation::Vanishing && c.rhs != 0.0) throw InvalidArgument("model: vanishing constraint needs rhs 0");
      (void)penalty(c.penalty);
    }
    for (const Variable& v : variables)
      if (v.kind == VarKind::Binary) (void)penalty(v.penalty);
  }

  /// Exact feasibility check for a classical assignment.
  bool feasible(const std::vector<double>& values, double tol = 1e-9) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (values[i] < -tol) return false;
      if (variables[i].kind == VarKind::Binary && values[i] != 0.0 && values[i] != 1.0) return false;
    }
    for (const Constraint& c : constraints) {
      const double l = c.lhs.evaluate(values);
      const double scale = tol * std::max(1.0, std::abs(c.rhs));
      switch (c.relation) {
        case Relation::LessEqual:
          if (l > c.rhs + scale) return false;
          break;
        case Relation::Equal:
        case Relation::Vanishing:
          if (std::abs(l - c.rhs) > scale) return false;
          break;
      }
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Slack insertion

namespace detail {

/// Smallest denominator q ≤ max_den with v·q integral to within tolerance.
inline std::int64_t denominator_of(double v, std::int64_t max_den = 1000000) {
  for (std::int64_t q = 1; q <= max_den; ++q) {
    // allow the rounding error of v itself, scaled by q
    const double s = v * static_cast<double>(q);
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(q) * std::max(1.0, std::abs(v));
    if (std::abs(s - std::round(s)) <= tol) return q;
  }
  std::ostringstream os;
  os.precision(17);
  os << "coefficient " << v << " has no denominator <= " << max_den;
  throw IntegerizationError(os.str());
}

}  // namespace detail

struct SlackOptions {
  /// Encode slacks as non-negative continuous variables (x̂²) instead of
  /// integer (n̂) variables.
  bool continuous_slacks = false;
};

/// Rewrites every a·v ≤ b as (L·a)·v + η = L·b with a fresh non-negative
/// slack η, where L is the lowest common denominator of the row. Equalities
/// are left untouched.
inline MipModel insert_slacks(const MipModel& model, const SlackOptions& opts = {}) {
  MipModel out = model;
  out.constraints.clear();
  std::size_t slack_no = 0;
  for (const Constraint& c : model.constraints) {
    if (c.relation != Relation::LessEqual) {
      out.constraints.push_back(c);
      continue;
    }
    if (!c.lhs.is_linear())
      throw InvalidArgument("constraint '" + c.name + "': nonlinear inequality constraints are unsupported");
    std::int64_t lcd = detail::denominator_of(c.rhs);
    for (const auto& [m, coeff] : c.lhs.terms()) lcd = std::lcm(lcd, detail::denominator_of(coeff));
    Constraint eq;
    eq.name = c.name;
    eq.penalty = c.penalty;
    eq.relation = Relation::Equal;
    const double L = static_cast<double>(lcd);
    for (const auto& [m, coeff] : c.lhs.terms()) eq.lhs.add(std::round(coeff * L), m);
    eq.rhs = std::round(c.rhs * L);
    // constant terms on the left are folded with the rhs
    eq.rhs -= eq.lhs.constant_term();
    eq.lhs.add(-eq.lhs.constant_term(), {});
    std::string sname = "eta" + std::to_string(++slack_no);
    while (out.index_of(sname)) sname += "_";
    const std::size_t s = out.add_variable(sname, opts.continuous_slacks ? VarKind::Continuous : VarKind::Integer);
    eq.lhs += Polynomial::var(s);
    out.constraints.push_back(std::move(eq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Compilation

struct CompiledProblem {
  OperatorPoly poly;  ///< without the identity component
  double constant_offset = 0.0;
  std::vector<std::string> mode_names;  ///< variable name per mode
  std::vector<VarKind> mode_kinds;
  std::size_t decision_modes = 0;  ///< modes [0, decision_modes) are the original variables; slacks follow
  MipModel normalized;             ///< the slack-normalized model that was compiled

  std::size_t mode_count() const { return mode_names.size(); }
  std::size_t mode_of(const std::string& var) const {
    for (std::size_t i = 0; i < mode_names.size(); ++i)
      if (mode_names[i] == var) return i;
    throw InvalidArgument("CompiledProblem: unknown variable '" + var + "'");
  }

  OperatorPoly with_offset() const { return poly + constant_offset; }

  /// Value of the compiled polynomial with every n̂ replaced by its integer
  /// value and x̂² by the continuous value (the diagonal symbol), including
  /// the constant offset.
  double classical_energy(const std::vector<double>& mode_values) const {
    double s = constant_offset;
    for (const OperatorTerm& t : poly.terms()) {
      double v = t.coeff;
      for (const Factor& f : t.monomial) {
        const double val = mode_values.at(f.mode);
        if (f.primitive == Primitive::N) v *= std::pow(val, f.power);
        else if (f.primitive == Primitive::X) v *= std::pow(std::sqrt(std::max(0.0, val)), f.power);
        else throw InvalidArgument("classical_energy: p̂ has no diagonal symbol");
      }
      s += v;
    }
    return s;
  }
};

struct CompileOptions {
  SlackOptions slacks;
};

namespace detail {

inline OperatorPoly to_operator(const Polynomial& p, const std::vector<Variable>& vars) {
  OperatorPoly out;
  for (const auto& [m, c] : p.terms()) {
    bmip::Monomial om;
    for (const auto& [v, power] : m) {
      switch (vars.at(v).kind) {
        case VarKind::Integer:
        case VarKind::Binary: om.push_back(Factor{v, Primitive::N, power}); break;
        case VarKind::Continuous: om.push_back(Factor{v, Primitive::X, 2 * power}); break;
      }
    }
    out.add(c, std::move(om));
  }
  return out;
}

}  // namespace detail

/// H_P = objective + Σ_c w_c·penalty_c + Σ_binary μ n̂(n̂−1), with every
/// variable mapped to its mode in declaration order (slacks last). The
/// identity component is moved into `constant_offset`.
inline CompiledProblem compile(const MipModel& model, const CompileOptions& opts = {}) {
  model.validate();
  MipModel m = insert_slacks(model, opts.slacks);
  CompiledProblem cp;
  cp.decision_modes = model.variables.size();
  for (const Variable& v : m.variables) {
    cp.mode_names.push_back(v.name);
    cp.mode_kinds.push_back(v.kind);
  }
  OperatorPoly h = detail::to_operator(m.objective, m.variables);
  for (const Constraint& c : m.constraints) {
    const double w = m.penalty(c.penalty);
    const OperatorPoly lhs = detail::to_operator(c.lhs, m.variables);
    switch (c.relation) {
      case Relation::Equal: h += square(lhs - c.rhs).scaled(w); break;
      case Relation::Vanishing: h += lhs.scaled(w); break;
      case Relation::LessEqual: throw InvalidArgument("compile: inequality survived slack insertion");
    }
  }
  for (std::size_t i = 0; i < m.variables.size(); ++i) {
    if (m.variables[i].kind != VarKind::Binary) continue;
    const double mu = m.penalty(m.variables[i].penalty);
    h += (OperatorPoly::n(i) * (OperatorPoly::n(i) - 1.0)).scaled(mu);
  }
  cp.constant_offset = h.constant_term();
  cp.poly = h.without_constant();
  cp.normalized = std::move(m);
  return cp;
}

/// Multiplies every coefficient by a positive factor.
inline OperatorPoly scale(const OperatorPoly& poly, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw InvalidArgument("scale: factor must be > 0");
  return poly.scaled(factor);
}

struct PenaltyReport {
  bool ok = true;
  bool advisory_only = false;
  std::vector<std::string> messages;
};

/// Checks penalty weights against known sufficient bounds. For the binary
/// MaxClique formulation: adjacency weight λ > 1/2 and binary weight μ > 1.
inline PenaltyReport validate_penalties(const MipModel& model) {
  PenaltyReport r;
  if (model.family != "maxclique_binary") {
    r.advisory_only = true;
    r.messages.push_back("no sufficient penalty bound is known for family '" + model.family +
                         "'; weights must be tuned empirically");
    return r;
  }
  for (const Constraint& c : model.constraints) {
    if (c.relation != Relation::Vanishing) continue;
    const double lam = model.penalty(c.penalty);
    if (lam <= 0.5) {
      r.ok = false;
      r.messages.push_back("adjacency penalty " + c.penalty + "=" + std::to_string(lam) + " must exceed 1/2");
    }
  }
  for (const Variable& v : model.variables) {
    if (v.kind != VarKind::Binary) continue;
    const double mu = model.penalty(v.penalty);
    if (mu <= 1.0) {
      r.ok = false;
      r.messages.push_back("binary penalty " + v.penalty + "=" + std::to_string(mu) + " must exceed 1");
      break;
    }
  }
  if (r.ok) r.messages.push_back("penalty weights satisfy lambda > 1/2 and mu > 1");
  return r;
}

}  // namespace bmip
