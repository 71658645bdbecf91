#pragma once

// Benchmark instances and an exhaustive classical oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bosonic_mip/error.hpp"
#include "bosonic_mip/mip.hpp"

namespace bmip {

/// Undirected simple graph. Vertices are 0-based here; I/O and labels use
/// 1-based numbering.
class GraphInstance {
 public:
  GraphInstance(std::size_t vertices, std::vector<std::pair<std::size_t, std::size_t>> edges)
      : n_(vertices), edges_(std::move(edges)), adj_(vertices, std::vector<int>(vertices, 0)) {
    for (const auto& [a, b] : edges_) {
      if (a >= n_ || b >= n_ || a == b) throw InvalidArgument("GraphInstance: invalid edge");
      adj_[a][b] = adj_[b][a] = 1;
    }
  }

  std::size_t vertex_count() const noexcept { return n_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  int adjacent(std::size_t i, std::size_t j) const { return adj_.at(i).at(j); }
  const std::vector<std::vector<int>>& adjacency() const noexcept { return adj_; }

  bool is_clique(const std::vector<std::size_t>& verts) const {
    for (std::size_t a = 0; a < verts.size(); ++a)
      for (std::size_t b = a + 1; b < verts.size(); ++b)
        if (!adj_[verts[a]][verts[b]]) return false;
    return true;
  }

  /// All maximum cliques by subset enumeration (vertex_count ≤ 20).
  std::vector<std::vector<std::size_t>> maximum_cliques() const {
    if (n_ > 20) throw InvalidArgument("maximum_cliques: graph too large for enumeration");
    std::vector<std::vector<std::size_t>> best;
    std::size_t best_size = 0;
    for (std::uint32_t mask = 1; mask < (1u << n_); ++mask) {
      std::vector<std::size_t> verts;
      for (std::size_t i = 0; i < n_; ++i)
        if (mask & (1u << i)) verts.push_back(i);
      if (verts.size() < best_size || !is_clique(verts)) continue;
      if (verts.size() > best_size) {
        best.clear();
        best_size = verts.size();
      }
      best.push_back(std::move(verts));
    }
    return best;
  }

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<int>> adj_;
};

/// Five-vertex graph with edges 1-2, 1-3, 1-4, 2-4, 2-5, 3-4 (1-based).
inline GraphInstance maxclique_graph() {
  return GraphInstance(5, {{0, 1}, {0, 2}, {0, 3}, {1, 3}, {1, 4}, {2, 3}});
}

/// n1 + n2 = 5 over non-negative integers, zero objective.
inline MipModel feasibility_instance(double lambda = 1.0) {
  MipModel m;
  m.name = "feasibility";
  m.family = "ilp";
  const auto n1 = m.add_variable("n1", VarKind::Integer);
  const auto n2 = m.add_variable("n2", VarKind::Integer);
  m.constraints.push_back({"sum", Polynomial::var(n1) + Polynomial::var(n2), Relation::Equal, 5.0, "lambda"});
  m.penalties["lambda"] = lambda;
  return m;
}

/// minimize −n1 − 2 n2 subject to 4 n1 + 1.5 n2 ≤ 11.
inline MipModel knapsack_instance(double lambda = 4.0) {
  MipModel m;
  m.name = "knapsack";
  m.family = "ilp";
  const auto n1 = m.add_variable("n1", VarKind::Integer);
  const auto n2 = m.add_variable("n2", VarKind::Integer);
  m.objective = Polynomial::var(n1).scaled(-1.0) + Polynomial::var(n2).scaled(-2.0);
  m.constraints.push_back({"capacity", Polynomial::var(n1).scaled(4.0) + Polynomial::var(n2).scaled(1.5), Relation::LessEqual,
                           11.0, "lambda"});
  m.penalties["lambda"] = lambda;
  return m;
}

/// minimize −Σ n_i subject to Σ_{i≠j} (1 − A_ij) n_i n_j = 0, n binary.
inline MipModel maxclique_binary_instance(const GraphInstance& g = maxclique_graph(), double lambda = 1.0, double mu = 6.0) {
  MipModel m;
  m.name = "maxclique_binary";
  m.family = "maxclique_binary";
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    m.add_variable("n" + std::to_string(i + 1), VarKind::Binary, "mu");
    m.objective -= Polynomial::var(i);
  }
  Polynomial pen;
  for (std::size_t i = 0; i < g.vertex_count(); ++i)
    for (std::size_t j = 0; j < g.vertex_count(); ++j)
      if (i != j && !g.adjacent(i, j)) pen += Polynomial::var(i) * Polynomial::var(j);
  m.constraints.push_back({"non_edges", pen, Relation::Vanishing, 0.0, "lambda"});
  m.penalties["lambda"] = lambda;
  m.penalties["mu"] = mu;
  return m;
}

/// minimize −xᵀAx subject to Σ x_i = 1, x ≥ 0 (continuous).
inline MipModel ms_continuous_instance(const GraphInstance& g = maxclique_graph(), double lambda = 2.0) {
  MipModel m;
  m.name = "ms_continuous";
  m.family = "motzkin_straus_continuous";
  Polynomial sum;
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    m.add_variable("x" + std::to_string(i + 1), VarKind::Continuous);
    m.variables.back().upper = 1.0;
    sum += Polynomial::var(i);
  }
  for (std::size_t i = 0; i < g.vertex_count(); ++i)
    for (std::size_t j = 0; j < g.vertex_count(); ++j)
      if (g.adjacent(i, j)) m.objective -= Polynomial::var(i) * Polynomial::var(j);
  m.constraints.push_back({"simplex", sum, Relation::Equal, 1.0, "lambda"});
  m.penalties["lambda"] = lambda;
  return m;
}

/// minimize −nᵀAn subject to Σ n_i = σ over non-negative integers.
inline MipModel ms_integer_instance(int sigma = 3, const GraphInstance& g = maxclique_graph(), double lambda = 6.0) {
  if (sigma < 1) throw InvalidArgument("ms_integer_instance: sigma must be >= 1");
  MipModel m;
  m.name = "ms_integer";
  m.family = "motzkin_straus_integer";
  Polynomial sum;
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    m.add_variable("n" + std::to_string(i + 1), VarKind::Integer);
    sum += Polynomial::var(i);
  }
  for (std::size_t i = 0; i < g.vertex_count(); ++i)
    for (std::size_t j = 0; j < g.vertex_count(); ++j)
      if (g.adjacent(i, j)) m.objective -= Polynomial::var(i) * Polynomial::var(j);
  m.constraints.push_back({"sigma", sum, Relation::Equal, static_cast<double>(sigma), "lambda"});
  m.penalties["lambda"] = lambda;
  return m;
}

/// minimize Σ (x_i b_i − μ_i)² subject to Σ x_i b_i = 3, Σ b_i = 2,
/// b binary, x ≥ 0 continuous. Modes: x1..x3 then b1..b3.
inline MipModel sparse_instance(std::array<double, 3> mu = {1.0, 0.3, 2.0}, double lambda1 = 1.2, double lambda2 = 0.3,
                                double lambda3 = 0.3) {
  for (double v : mu)
    if (!std::isfinite(v)) throw InvalidArgument("sparse_instance: mu must be finite");
  MipModel m;
  m.name = "sparse";
  m.family = "sparse_mip";
  for (int i = 1; i <= 3; ++i) {
    m.add_variable("x" + std::to_string(i), VarKind::Continuous);
    m.variables.back().upper = 3.0;
  }
  for (int i = 1; i <= 3; ++i) m.add_variable("b" + std::to_string(i), VarKind::Binary, "lambda3");
  Polynomial sum_xb, sum_b;
  for (std::size_t i = 0; i < 3; ++i) {
    const Polynomial xb = Polynomial::var(i) * Polynomial::var(i + 3);
    m.objective += (xb - mu[i]) * (xb - mu[i]);
    sum_xb += xb;
    sum_b += Polynomial::var(i + 3);
  }
  m.constraints.push_back({"total", sum_xb, Relation::Equal, 3.0, "lambda1"});
  m.constraints.push_back({"cardinality", sum_b, Relation::Equal, 2.0, "lambda2"});
  m.penalties = {{"lambda1", lambda1}, {"lambda2", lambda2}, {"lambda3", lambda3}};
  return m;
}

// ---------------------------------------------------------------------------
// Brute-force oracle

struct OracleResult {
  double optimal_value = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> assignments;  ///< all optima, one value per variable
  int integer_bound = 0;                        ///< integer variables range over [0, integer_bound)
  double grid_step = 0.0;
  std::uint64_t points = 0;
};

struct BruteForceOptions {
  int integer_bound = 8;         ///< per-variable box [0, bound) for integer variables
  std::vector<int> bounds;       ///< per-variable override of integer_bound
  double grid_step = 0.1;        ///< step for continuous variables
  double continuous_upper = 3.0; ///< used when a continuous variable has no upper bound
  std::uint64_t max_points = 100000000;
  double value_tolerance = 1e-9;
};

namespace detail {

inline std::vector<std::vector<double>> variable_grids(const std::vector<Variable>& vars, const BruteForceOptions& o) {
  if (!o.bounds.empty() && o.bounds.size() != vars.size()) throw InvalidArgument("brute_force: bounds size does not match variables");
  std::vector<std::vector<double>> grids;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Variable& v = vars[i];
    const int bound = o.bounds.empty() ? o.integer_bound : o.bounds[i];
    std::vector<double> g;
    switch (v.kind) {
      case VarKind::Binary: g = {0.0, 1.0}; break;
      case VarKind::Integer:
        for (int k = 0; k < bound; ++k) g.push_back(k);
        break;
      case VarKind::Continuous: {
        const double up = v.upper.value_or(o.continuous_upper);
        const auto steps = static_cast<int>(std::floor(up / o.grid_step + 1e-9));
        for (int k = 0; k <= steps; ++k) g.push_back(k * o.grid_step);
        break;
      }
    }
    grids.push_back(std::move(g));
  }
  return grids;
}

template <class Visit>
inline std::uint64_t enumerate_grid(const std::vector<std::vector<double>>& grids, std::uint64_t max_points, Visit&& visit) {
  std::uint64_t total = 1;
  for (const auto& g : grids) {
    if (g.empty()) return 0;
    if (total > max_points / g.size()) throw InvalidArgument("brute_force: search space exceeds " + std::to_string(max_points) + " points");
    total *= g.size();
  }
  std::vector<std::size_t> pos(grids.size(), 0);
  std::vector<double> vals(grids.size());
  for (std::size_t i = 0; i < grids.size(); ++i) vals[i] = grids[i][0];
  for (std::uint64_t p = 0; p < total; ++p) {
    visit(vals);
    for (std::size_t k = grids.size(); k-- > 0;) {
      if (++pos[k] < grids[k].size()) {
        vals[k] = grids[k][pos[k]];
        break;
      }
      pos[k] = 0;
      vals[k] = grids[k][0];
    }
  }
  return total;
}

}  // namespace detail

/// Exhaustive minimization of the original model (hard constraints) over the
/// integer box and the continuous grid. Returns every optimal assignment.
inline OracleResult brute_force(const MipModel& model, const BruteForceOptions& opts = {}) {
  model.validate();
  OracleResult r;
  r.integer_bound = opts.integer_bound;
  r.grid_step = opts.grid_step;
  const auto grids = detail::variable_grids(model.variables, opts);
  r.points = detail::enumerate_grid(grids, opts.max_points, [&](const std::vector<double>& v) {
    if (!model.feasible(v)) return;
    const double f = model.objective.evaluate(v);
    const double tol = opts.value_tolerance * std::max(1.0, std::abs(f));
    if (f < r.optimal_value - tol) {
      r.optimal_value = f;
      r.assignments.clear();
      r.assignments.push_back(v);
    } else if (std::abs(f - r.optimal_value) <= tol) {
      r.assignments.push_back(v);
    }
  });
  return r;
}

/// Minimizers of the compiled Hamiltonian's diagonal symbol over the Fock
/// box [0, bound) per n̂-mode (slacks included) and the continuous grid per
/// x̂²-mode. Assignments list one value per mode.
inline OracleResult compiled_minimizers(const CompiledProblem& cp, const BruteForceOptions& opts = {}) {
  OracleResult r;
  r.integer_bound = opts.integer_bound;
  r.grid_step = opts.grid_step;
  std::vector<Variable> modes = cp.normalized.variables;
  for (Variable& v : modes)
    if (v.kind == VarKind::Binary) v.kind = VarKind::Integer;  // the Fock box admits n ≥ 2
  const auto grids = detail::variable_grids(modes, opts);
  r.points = detail::enumerate_grid(grids, opts.max_points, [&](const std::vector<double>& v) {
    const double f = cp.classical_energy(v);
    const double tol = opts.value_tolerance * std::max(1.0, std::abs(f));
    if (f < r.optimal_value - tol) {
      r.optimal_value = f;
      r.assignments.clear();
      r.assignments.push_back(v);
    } else if (std::abs(f - r.optimal_value) <= tol) {
      r.assignments.push_back(v);
    }
  });
  return r;
}

/// Comparison key of an assignment: integer and binary values verbatim.
/// When a model has no integer variables the support pattern (x > 0) of the
/// continuous variables is used instead.
inline std::vector<int> assignment_signature(const std::vector<Variable>& vars, const std::vector<double>& values) {
  bool any_integer = false;
  for (const Variable& v : vars) any_integer |= v.kind != VarKind::Continuous;
  std::vector<int> sig;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].kind == VarKind::Continuous) {
      if (!any_integer) sig.push_back(values[i] > 1e-12 ? 1 : 0);
    } else {
      sig.push_back(static_cast<int>(std::lround(values[i])));
    }
  }
  return sig;
}

inline std::set<std::vector<int>> signature_set(const std::vector<Variable>& vars, const std::vector<std::vector<double>>& as,
                                                std::size_t leading = std::numeric_limits<std::size_t>::max()) {
  std::set<std::vector<int>> out;
  const std::size_t n = std::min(leading, vars.size());
  const std::vector<Variable> head(vars.begin(), vars.begin() + static_cast<std::ptrdiff_t>(n));
  for (const auto& a : as) out.insert(assignment_signature(head, std::vector<double>(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n))));
  return out;
}

}  // namespace bmip
