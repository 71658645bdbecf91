#include <gtest/gtest.h>

#include <cmath>

#include "bosonic_mip/bench.hpp"

using namespace bmip;

namespace {

using Sig = std::set<std::vector<int>>;

const Sig kCliques = {{1, 1, 0, 1, 0}, {1, 0, 1, 1, 0}};

}  // namespace

TEST(Graph, MaximumCliques) {
  const GraphInstance g = maxclique_graph();
  EXPECT_EQ(g.vertex_count(), 5u);
  EXPECT_EQ(g.edges().size(), 6u);
  EXPECT_TRUE(g.is_clique({0, 1, 3}));
  EXPECT_FALSE(g.is_clique({0, 1, 2}));
  const auto cl = g.maximum_cliques();
  EXPECT_EQ(cl, (std::vector<std::vector<std::size_t>>{{0, 1, 3}, {0, 2, 3}}));
  EXPECT_THROW(GraphInstance(3, {{0, 3}}), InvalidArgument);
  EXPECT_THROW(GraphInstance(3, {{1, 1}}), InvalidArgument);
}

TEST(BruteForce, FeasibilitySixSolutions) {
  const OracleResult r = brute_force(feasibility_instance());
  EXPECT_NEAR(r.optimal_value, 0.0, 1e-12);
  EXPECT_EQ(r.assignments.size(), 6u);
  for (const auto& a : r.assignments) EXPECT_DOUBLE_EQ(a[0] + a[1], 5.0);
  EXPECT_EQ(r.points, 64u);
}

TEST(BruteForce, KnapsackUniqueOptimum) {
  const OracleResult r = brute_force(knapsack_instance());
  ASSERT_EQ(r.assignments.size(), 1u);
  EXPECT_EQ(r.assignments[0], (std::vector<double>{0, 7}));
  EXPECT_DOUBLE_EQ(r.optimal_value, -14.0);
  // a larger box does not change the optimum
  BruteForceOptions o;
  o.integer_bound = 20;
  EXPECT_EQ(brute_force(knapsack_instance(), o).assignments, r.assignments);
}

TEST(BruteForce, MaxCliqueFormulations) {
  const MipModel qubo = maxclique_binary_instance();
  const OracleResult rq = brute_force(qubo);
  EXPECT_DOUBLE_EQ(rq.optimal_value, -3.0);
  EXPECT_EQ(signature_set(qubo.variables, rq.assignments), kCliques);

  const MipModel msi = ms_integer_instance(3);
  BruteForceOptions o;
  o.integer_bound = 5;
  const OracleResult ri = brute_force(msi, o);
  EXPECT_DOUBLE_EQ(ri.optimal_value, -6.0);
  EXPECT_EQ(signature_set(msi.variables, ri.assignments), kCliques);

  const MipModel msc = ms_continuous_instance();
  const OracleResult rc = brute_force(msc);
  // the 0.1 grid cannot hit 1/3; the best grid points are permutations of (0.4, 0.3, 0.3).
  // With x0 = x3 = 1/3 and x1 + x2 = 1/3 the value is also 2/3, so the union of
  // both triangles is a spurious optimal support.
  EXPECT_NEAR(rc.optimal_value, -0.66, 1e-12);
  Sig with_union = kCliques;
  with_union.insert({1, 1, 1, 1, 0});
  EXPECT_EQ(signature_set(msc.variables, rc.assignments), with_union);
}

TEST(BruteForce, SparseSupport) {
  const MipModel m = sparse_instance();
  const OracleResult r = brute_force(m);
  // x2 is unconstrained once b2 = 0: one optimum per grid value of x2 in [0, 3]
  ASSERT_EQ(r.assignments.size(), 31u);
  for (const std::vector<double>& a : r.assignments) {
    EXPECT_NEAR(a[0], 1.0, 1e-12);
    EXPECT_NEAR(a[2], 2.0, 1e-12);
  }
  EXPECT_NEAR(r.optimal_value, 0.09, 1e-12);
  EXPECT_EQ(signature_set(m.variables, r.assignments), (Sig{{1, 0, 1}}));
}

TEST(Compiled, MinimizersAgreeWithBruteForce) {
  struct Case {
    MipModel model;
    int bound;
  };
  const std::vector<Case> cases = {{feasibility_instance(), 8}, {knapsack_instance(), 8}, {maxclique_binary_instance(), 5},
                                   {ms_integer_instance(3), 5}, {ms_continuous_instance(), 5}, {sparse_instance(), 5}};
  for (const Case& c : cases) {
    const CompiledProblem cp = compile(c.model);
    BruteForceOptions o;
    o.bounds.assign(cp.decision_modes, c.bound);
    const OracleResult b = brute_force(c.model, o);
    o.bounds.assign(cp.mode_count(), c.bound);
    const OracleResult m = compiled_minimizers(cp, o);
    EXPECT_EQ(signature_set(c.model.variables, b.assignments), signature_set(cp.normalized.variables, m.assignments, cp.decision_modes))
        << c.model.name;
  }
}

TEST(Compiled, KnapsackSlackValue) {
  const CompiledProblem cp = compile(knapsack_instance());
  BruteForceOptions o;
  o.integer_bound = 8;
  const OracleResult m = compiled_minimizers(cp, o);
  ASSERT_EQ(m.assignments.size(), 1u);
  EXPECT_EQ(m.assignments[0], (std::vector<double>{0, 7, 1}));
  EXPECT_NEAR(m.optimal_value, -14.0, 1e-12);
}

TEST(BruteForce, SearchOverflowIsReported) {
  BruteForceOptions o;
  o.integer_bound = 100;
  o.max_points = 1000;
  EXPECT_THROW(brute_force(ms_integer_instance(3), o), InvalidArgument);
}

TEST(Instances, SigmaVariantsAndValidation) {
  EXPECT_THROW(ms_integer_instance(0), InvalidArgument);
  for (int sigma : {3, 4, 5}) {
    BruteForceOptions o;
    o.integer_bound = sigma + 1;
    const OracleResult r = brute_force(ms_integer_instance(sigma), o);
    for (const auto& a : r.assignments) {
      double s = 0.0;
      for (double v : a) s += v;
      EXPECT_DOUBLE_EQ(s, sigma);
    }
    EXPECT_FALSE(r.assignments.empty());
  }
}
