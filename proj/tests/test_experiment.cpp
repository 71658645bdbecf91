#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bosonic_mip.hpp"

using namespace bmip;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bmip_test_" + name);
  fs::remove_all(p);
  return p;
}

json small_feasibility() {
  json j = preset("fig1");
  j["dims"] = 6;
  j["schedule"]["T"] = 5.0;
  j["schedule"]["steps"] = 200;
  return j;
}

}  // namespace

TEST(ModelIo, RoundTripPreservesCompiledHamiltonian) {
  for (const MipModel& m : {feasibility_instance(), knapsack_instance(), maxclique_binary_instance(), ms_continuous_instance(),
                            ms_integer_instance(4), sparse_instance()}) {
    const json j = model_to_json(m);
    const MipModel back = model_from_json(json::parse(j.dump()));
    EXPECT_EQ(back.name, m.name);
    EXPECT_EQ(back.penalties, m.penalties);
    const CompiledProblem a = compile(m), b = compile(back);
    EXPECT_EQ(a.poly.to_string(), b.poly.to_string()) << m.name;
    EXPECT_DOUBLE_EQ(a.constant_offset, b.constant_offset);
  }
}

TEST(ModelIo, Errors) {
  EXPECT_THROW(model_from_json(json::parse(R"({"variables": 3})")), InvalidArgument);
  EXPECT_THROW(model_from_json(json::parse(R"({"schema": "other", "variables": []})")), InvalidArgument);
  const json unknown = json::parse(R"({"variables": [{"name": "a", "kind": "integer"}],
    "objective": {"terms": [{"coeff": 1, "vars": [{"name": "b"}]}]}})");
  EXPECT_THROW(model_from_json(unknown), InvalidArgument);
}

TEST(Config, RoundTripThroughJson) {
  for (const auto& [name, j] : presets()) {
    const ExperimentConfig c = config_from_json(j);
    const json again = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(again)), again) << name;
  }
}

TEST(Config, OverridesAndValidation) {
  json j = preset("fig1");
  apply_override(j, "schedule.T=20");
  apply_override(j, "initial.p0=[0.5,0.6]");
  apply_override(j, "problem.sigma=4");
  apply_override(j, "name=custom");
  const ExperimentConfig c = config_from_json(j);
  EXPECT_DOUBLE_EQ(c.schedule.total_time, 20.0);
  EXPECT_EQ(c.p0, (std::vector<double>{0.5, 0.6}));
  EXPECT_EQ(c.sigma, 4);
  EXPECT_EQ(c.name, "custom");
  EXPECT_THROW(apply_override(j, "novalue"), InvalidArgument);

  json bad = preset("fig1");
  bad["typo"] = 1;
  EXPECT_THROW(config_from_json(bad), InvalidArgument);
  bad = preset("figS2");
  bad["sweep"]["values"] = json::array({0.5, 0.4});
  EXPECT_THROW(config_from_json(bad), InvalidArgument);
  bad["sweep"]["values"] = json::array();
  EXPECT_THROW(config_from_json(bad), InvalidArgument);
  bad["sweep"] = {{"axis", "mass"}, {"values", {1.0}}};
  EXPECT_THROW(config_from_json(bad), InvalidArgument);
  bad = preset("fig1");
  bad["schedule"]["steps"] = 0;
  EXPECT_THROW(config_from_json(bad), InvalidArgument);
  EXPECT_THROW(preset("nope"), InvalidArgument);
}

TEST(Config, ModeBroadcasting) {
  json j = preset("fig2a");
  j["dims"] = json::array({6, 6});
  EXPECT_THROW(prepare(config_from_json(j)), InvalidArgument);
  j["dims"] = json::array({6, 6, 4});
  j["initial"]["max_leaked_norm"] = 1.0;
  const bmip::Setup s = prepare(config_from_json(j));
  EXPECT_EQ(s.space.dims(), (std::vector<int>{6, 6, 4}));
  EXPECT_EQ(s.compiled.mode_names.back(), "eta1");
}

TEST(Config, PenaltyOverrides) {
  json j = preset("fig4b");
  j["penalties"] = {{"lambda", 2.5}};
  EXPECT_DOUBLE_EQ(build_model(config_from_json(j)).penalty("lambda"), 2.5);
  j["penalties"] = {{"nu", 1.0}};
  EXPECT_THROW(build_model(config_from_json(j)), InvalidArgument);
}

TEST(Numbers, RoundTripFormatting) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, 0.0}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(csv_field("|0,5>"), "\"|0,5>\"");
  EXPECT_EQ(csv_field("plain"), "plain");
}

TEST(Run, WritesArtifactsDeterministically) {
  json j = small_feasibility();
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  j["output"] = a.string();
  run(config_from_json(j));
  j["output"] = b.string();
  run(config_from_json(j));
  for (const char* f : {"trajectory.csv", "final_distribution.csv", "summary.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const std::string traj = slurp(a / "trajectory.csv");
  EXPECT_EQ(traj.substr(0, traj.find('\n')), "t,\"|0,5>\",\"|1,4>\",\"|2,3>\",\"|3,2>\",\"|4,1>\",\"|5,0>\",norm");
  const std::string dist = slurp(a / "final_distribution.csv");
  EXPECT_EQ(dist.substr(0, dist.find('\n')), "n1,n2,probability");

  // the manifest reproduces the run
  const json manifest = json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest.at("library_version"), kLibraryVersion);
  ExperimentConfig again = config_from_json(manifest);
  const fs::path c = scratch("run_c");
  again.output = c.string();
  run(again);
  EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(c / "trajectory.csv"));
}

TEST(Run, AutoTrackingAndMeasurements) {
  json j = preset("fig4a");
  j["dims"] = 3;
  j["initial"]["max_leaked_norm"] = 1.0;
  j["schedule"] = {{"T", 2.0}, {"steps", 40}};
  j["homodyne"] = {{"shots", 50}, {"threshold_vertices", 5}};
  j["output"] = scratch("auto").string();
  const PointResult r = run(config_from_json(j));
  // top-8 outcomes plus vacuum
  EXPECT_GE(r.trajectory.labels.size(), 8u);
  EXPECT_LE(r.trajectory.labels.size(), 9u);
  EXPECT_NE(std::find(r.trajectory.labels.begin(), r.trajectory.labels.end(), "|0,0,0,0,0>"), r.trajectory.labels.end());
  ASSERT_TRUE(r.homodyne.has_value());
  EXPECT_EQ(r.homodyne->shots(), 50u);
  EXPECT_TRUE(fs::exists(fs::path(j["output"].get<std::string>()) / "homodyne.csv"));
  EXPECT_TRUE(fs::exists(fs::path(j["output"].get<std::string>()) / "homodyne_patterns.csv"));
}

TEST(Run, SparseConditionalAndFrames) {
  json j = preset("fig5");
  j["dims"] = json::array({3, 3, 3, 2, 2, 2});
  j["initial"]["max_leaked_norm"] = 1.0;
  j["schedule"] = {{"T", 1.0}, {"steps", 10}};
  j["conditional"]["shots"] = 20;
  j["frames"]["shots"] = 20;
  j["output"] = scratch("sparse").string();
  const PointResult r = run(config_from_json(j));
  ASSERT_TRUE(r.marginal.has_value());
  EXPECT_EQ(r.marginal->space().dims(), (std::vector<int>{2, 2, 2}));
  ASSERT_TRUE(r.conditional.has_value());
  EXPECT_EQ(r.conditional->exact.size(), 3u);
  ASSERT_EQ(r.frames.size(), 3u);
  EXPECT_DOUBLE_EQ(r.frames[2].first, 1.0);
  EXPECT_EQ(r.frames[0].second.size(), 20u);
  for (int f = 0; f < 3; ++f) EXPECT_TRUE(fs::exists(fs::path(j["output"].get<std::string>()) / ("frame_" + std::to_string(f) + ".csv")));
}

TEST(Sweep, RowsIndependentOfThreadCount) {
  json j = small_feasibility();
  j["sweep"] = {{"axis", "p0"}, {"values", {0.3, 0.5, 0.72}}};
  j["output"] = scratch("sweep1").string();
  j["threads"] = 1;
  const auto one = sweep(config_from_json(j));
  const std::string csv1 = slurp(fs::path(j["output"].get<std::string>()) / "sweep.csv");
  j["output"] = scratch("sweep3").string();
  j["threads"] = 3;
  const auto three = sweep(config_from_json(j));
  EXPECT_EQ(csv1, slurp(fs::path(j["output"].get<std::string>()) / "sweep.csv"));
  ASSERT_EQ(one.size(), 3u);
  EXPECT_EQ(csv1.substr(0, csv1.find('\n')), "p0,success,\"p[0,5]\",\"p[1,4]\",\"p[2,3]\",\"p[3,2]\",\"p[4,1]\",\"p[5,0]\",std_dev,bias,total");
}

TEST(Sweep, LambdaAxis) {
  json j = preset("figS4a");
  j["dims"] = 3;
  j["initial"]["max_leaked_norm"] = 1.0;
  j["schedule"] = {{"T", 1.0}, {"steps", 10}};
  j["sweep"]["values"] = json::array({1.0, 2.0});
  j["output"] = scratch("lambda").string();
  const auto rows = sweep(config_from_json(j));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[1].value, 2.0);
  EXPECT_EQ(rows[0].metrics.solution_probabilities.size(), 2u);
  EXPECT_NE(rows[0].metrics.success, rows[1].metrics.success);
}

TEST(Oracle, FeasibilityAndKnapsack) {
  json j = preset("fig1");
  j["output"] = scratch("oracle").string();
  const OracleReport r = run_oracle(config_from_json(j));
  EXPECT_TRUE(r.agreement);
  EXPECT_EQ(r.brute.assignments.size(), 6u);
  ASSERT_TRUE(r.ground.has_value());
  EXPECT_EQ(r.ground->degeneracy, 6u);
  const json out = json::parse(slurp(fs::path(j["output"].get<std::string>()) / "oracle.json"));
  EXPECT_TRUE(out.at("agreement").get<bool>());

  json k = preset("fig2a");
  k["output"] = scratch("oracle_k").string();
  const OracleReport rk = oracle(config_from_json(k));
  EXPECT_TRUE(rk.agreement);
  EXPECT_EQ(rk.brute_signatures, (std::set<std::vector<int>>{{0, 7}}));
}
