#pragma once

// Experiment configuration, figure presets, and artifact writers.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bosonic_mip/bench.hpp"
#include "bosonic_mip/error.hpp"
#include "bosonic_mip/evolution.hpp"
#include "bosonic_mip/measurement.hpp"
#include "bosonic_mip/mip.hpp"
#include "bosonic_mip/model_io.hpp"
#include "bosonic_mip/state.hpp"

namespace bmip {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr const char* kConfigSchema = "bosonic-mip/experiment";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct SuccessSpec {
  enum class Measure { Fock, Homodyne };
  Measure measure = Measure::Fock;
  std::vector<std::string> solutions;  ///< Fock patterns, or bit patterns for homodyne
};

struct HomodynePlan {
  std::size_t shots = 0;
  std::vector<std::size_t> modes;          ///< empty = all modes in order
  std::size_t threshold_vertices = 0;      ///< |V| in the bit threshold; 0 = number of measured modes
};

struct ConditionalPlan {
  std::vector<std::pair<std::size_t, int>> pattern;
  std::vector<std::size_t> targets;
  std::size_t shots = 0;
  bool enabled() const { return !targets.empty(); }
};

struct FramePlan {
  std::vector<double> fractions;           ///< of T
  std::vector<std::size_t> modes;          ///< homodyne-sampled modes; the rest are Fock-sampled
  std::size_t shots = 1000;
};

struct SweepSpec {
  std::string axis;  ///< p0 | r | T | lambda | sigma | scale
  std::vector<double> values;
  std::string penalty = "lambda";
};

struct OracleSpec {
  std::vector<int> dims;  ///< ground-state truncation; empty = the run's dims
  double grid_step = 0.1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string problem = "feasibility";
  std::string model_file;
  int sigma = 3;
  std::vector<double> mu = {1.0, 0.3, 2.0};
  std::map<std::string, double> penalties;  ///< overrides of the model defaults
  double hbar = 1.0;
  std::vector<int> dims = {8};
  std::vector<double> p0 = {0.72};
  std::vector<double> r = {0.8};
  int working_dim = 0;
  double max_leaked_norm = kMaxLeakedNorm;
  Schedule schedule;
  double scale = 1.0;
  std::vector<std::string> tracked;
  std::size_t auto_track = 8;
  std::vector<std::size_t> marginal_modes;
  SuccessSpec success;
  HomodynePlan homodyne;
  ConditionalPlan conditional;
  FramePlan frames;
  std::optional<SweepSpec> sweep;
  OracleSpec oracle;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string output = "out";
  std::size_t dense_limit = PropagatorOptions{}.dense_limit;
};

namespace detail {

template <class T>
std::vector<T> scalar_or_list(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

template <class T>
std::vector<T> broadcast(const std::vector<T>& v, std::size_t n, const char* what) {
  if (v.size() == n) return v;
  if (v.size() == 1) return std::vector<T>(n, v.front());
  throw InvalidArgument(std::string("config: '") + what + "' has " + std::to_string(v.size()) + " entries for " + std::to_string(n) + " modes");
}

inline void require_sorted(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string("config: '") + what + "' grid is empty");
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw InvalidArgument(std::string("config: '") + what + "' grid must be strictly increasing");
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& jin) {
  const json& j = jin.contains("config") && jin.contains("manifest_version") ? jin.at("config") : jin;
  try {
    if (j.contains("schema") && j.at("schema") != kConfigSchema) throw InvalidArgument("config: unexpected schema");
    static const std::set<std::string> known = {"schema", "version", "name", "problem", "penalties", "hbar", "dims", "initial", "schedule",
                                                "scale", "tracked", "auto_track", "marginal", "success", "homodyne", "conditional",
                                                "frames", "sweep", "oracle", "seed", "threads", "output", "propagator", "description"};
    for (const auto& [k, v] : j.items())
      if (!known.count(k)) throw InvalidArgument("config: unknown key '" + k + "'");
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    if (j.contains("problem")) {
      const json& p = j.at("problem");
      if (p.is_string()) c.problem = p.get<std::string>();
      else {
        c.problem = p.value("id", std::string(p.contains("model_file") ? "file" : c.problem));
        c.model_file = p.value("model_file", std::string());
        c.sigma = p.value("sigma", c.sigma);
        if (p.contains("mu")) c.mu = p.at("mu").get<std::vector<double>>();
      }
    }
    if (j.contains("penalties")) c.penalties = j.at("penalties").get<std::map<std::string, double>>();
    c.hbar = j.value("hbar", c.hbar);
    if (j.contains("dims")) c.dims = detail::scalar_or_list<int>(j.at("dims"));
    if (j.contains("initial")) {
      const json& i = j.at("initial");
      if (i.contains("p0")) c.p0 = detail::scalar_or_list<double>(i.at("p0"));
      if (i.contains("r")) c.r = detail::scalar_or_list<double>(i.at("r"));
      c.working_dim = i.value("working_dim", c.working_dim);
      c.max_leaked_norm = i.value("max_leaked_norm", c.max_leaked_norm);
    }
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      const std::string variant = s.value("variant", std::string("continuous"));
      if (variant == "continuous") c.schedule.variant = Schedule::Variant::Continuous;
      else if (variant == "trotter") c.schedule.variant = Schedule::Variant::Trotter;
      else throw InvalidArgument("config: schedule.variant must be 'continuous' or 'trotter'");
      c.schedule.total_time = s.value("T", c.schedule.total_time);
      c.schedule.steps = s.value("steps", c.schedule.steps);
      c.schedule.trotter_steps = s.value("k", c.schedule.trotter_steps);
      c.schedule.snapshot_stride = s.value("snapshot_stride", c.schedule.snapshot_stride);
    }
    c.scale = j.value("scale", c.scale);
    if (j.contains("tracked")) c.tracked = j.at("tracked").get<std::vector<std::string>>();
    c.auto_track = j.value("auto_track", c.auto_track);
    if (j.contains("marginal")) c.marginal_modes = j.at("marginal").get<std::vector<std::size_t>>();
    if (j.contains("success")) {
      const json& s = j.at("success");
      const std::string m = s.value("measure", std::string("fock"));
      if (m == "fock") c.success.measure = SuccessSpec::Measure::Fock;
      else if (m == "homodyne") c.success.measure = SuccessSpec::Measure::Homodyne;
      else throw InvalidArgument("config: success.measure must be 'fock' or 'homodyne'");
      c.success.solutions = s.value("solutions", std::vector<std::string>{});
    }
    if (j.contains("homodyne")) {
      const json& h = j.at("homodyne");
      c.homodyne.shots = h.value("shots", std::size_t{0});
      c.homodyne.modes = h.value("modes", std::vector<std::size_t>{});
      c.homodyne.threshold_vertices = h.value("threshold_vertices", std::size_t{0});
    }
    if (j.contains("conditional")) {
      const json& h = j.at("conditional");
      for (const auto& [mode, n] : h.at("pattern").items()) c.conditional.pattern.emplace_back(std::stoul(mode), n.get<int>());
      c.conditional.targets = h.at("targets").get<std::vector<std::size_t>>();
      c.conditional.shots = h.value("shots", std::size_t{0});
    }
    if (j.contains("frames")) {
      const json& f = j.at("frames");
      c.frames.fractions = f.at("fractions").get<std::vector<double>>();
      c.frames.modes = f.at("modes").get<std::vector<std::size_t>>();
      c.frames.shots = f.value("shots", c.frames.shots);
    }
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
      const json& s = j.at("sweep");
      SweepSpec sw;
      sw.axis = s.at("axis").get<std::string>();
      sw.values = s.at("values").get<std::vector<double>>();
      sw.penalty = s.value("penalty", sw.penalty);
      static const std::set<std::string> axes = {"p0", "r", "T", "lambda", "sigma", "scale"};
      if (!axes.count(sw.axis)) throw InvalidArgument("config: unknown sweep axis '" + sw.axis + "'");
      detail::require_sorted(sw.values, "sweep.values");
      c.sweep = sw;
    }
    if (j.contains("oracle")) {
      const json& o = j.at("oracle");
      c.oracle.dims = o.value("dims", std::vector<int>{});
      c.oracle.grid_step = o.value("grid_step", c.oracle.grid_step);
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.output = j.value("output", c.output);
    if (j.contains("propagator")) c.dense_limit = j.at("propagator").value("dense_limit", c.dense_limit);
    c.schedule.validate();
    if (!(c.hbar > 0.0)) throw InvalidArgument("config: hbar must be > 0");
    if (!(c.scale > 0.0)) throw InvalidArgument("config: scale must be > 0");
    return c;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema"] = kConfigSchema;
  j["version"] = 1;
  j["name"] = c.name;
  j["problem"] = {{"id", c.problem}, {"sigma", c.sigma}, {"mu", c.mu}};
  if (!c.model_file.empty()) j["problem"]["model_file"] = c.model_file;
  j["penalties"] = c.penalties;
  j["hbar"] = c.hbar;
  j["dims"] = c.dims;
  j["initial"] = {{"p0", c.p0}, {"r", c.r}, {"working_dim", c.working_dim}, {"max_leaked_norm", c.max_leaked_norm}};
  j["schedule"] = {{"variant", c.schedule.variant == Schedule::Variant::Continuous ? "continuous" : "trotter"},
                   {"T", c.schedule.total_time},
                   {"steps", c.schedule.steps},
                   {"k", c.schedule.trotter_steps},
                   {"snapshot_stride", c.schedule.snapshot_stride}};
  j["scale"] = c.scale;
  j["tracked"] = c.tracked;
  j["auto_track"] = c.auto_track;
  j["marginal"] = c.marginal_modes;
  j["success"] = {{"measure", c.success.measure == SuccessSpec::Measure::Fock ? "fock" : "homodyne"}, {"solutions", c.success.solutions}};
  j["homodyne"] = {{"shots", c.homodyne.shots}, {"modes", c.homodyne.modes}, {"threshold_vertices", c.homodyne.threshold_vertices}};
  if (c.conditional.enabled()) {
    json pat = json::object();
    for (const auto& [m, n] : c.conditional.pattern) pat[std::to_string(m)] = n;
    j["conditional"] = {{"pattern", pat}, {"targets", c.conditional.targets}, {"shots", c.conditional.shots}};
  }
  if (!c.frames.fractions.empty()) j["frames"] = {{"fractions", c.frames.fractions}, {"modes", c.frames.modes}, {"shots", c.frames.shots}};
  if (c.sweep) j["sweep"] = {{"axis", c.sweep->axis}, {"values", c.sweep->values}, {"penalty", c.sweep->penalty}};
  j["oracle"] = {{"dims", c.oracle.dims}, {"grid_step", c.oracle.grid_step}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output"] = c.output;
  j["propagator"] = {{"dense_limit", c.dense_limit}};
  return j;
}

/// Sets a dotted path (e.g. "schedule.T") in a JSON config. The value is
/// parsed as JSON when possible and kept as a string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' must look like KEY=VALUE");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& next = (*node)[parts[i]];
    if (next.is_string() && parts[i] == "problem") next = json{{"id", next.get<std::string>()}};
    if (!next.is_object()) next = json::object();
    node = &next;
  }
  (*node)[parts.back()] = value;
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline json base_preset(const std::string& name, const std::string& problem, double p0, double r, int d) {
  return json{{"schema", kConfigSchema}, {"version", 1}, {"name", name}, {"problem", {{"id", problem}}},
              {"dims", d}, {"initial", {{"p0", p0}, {"r", r}}},
              {"schedule", {{"variant", "continuous"}, {"T", 50.0}, {"steps", 10001}}}};
}

inline json t_sweep(json base, const std::string& name) {
  base["name"] = name;
  base["sweep"] = {{"axis", "T"}, {"values", {5.0, 10.0, 20.0, 30.0, 40.0, 50.0}}};
  return base;
}

}  // namespace detail

/// Figure presets by name. Truncations (8 for two- and three-mode problems,
/// 5 for five- and six-mode problems) are preset choices.
inline std::map<std::string, json> presets() {
  using detail::base_preset;
  std::map<std::string, json> p;
  p["fig1"] = base_preset("fig1", "feasibility", 0.72, 0.8, 8);
  p["fig1"]["tracked"] = {"0,5", "1,4", "2,3", "3,2", "4,1", "5,0"};
  p["fig1c"] = p["fig1"];
  p["fig1c"]["name"] = "fig1c";
  p["fig1c"]["schedule"] = {{"variant", "trotter"}, {"T", 50.0}, {"k", 300}};
  p["fig2a"] = base_preset("fig2a", "knapsack", 0.25, 0.8, 8);
  p["fig2a"]["marginal"] = {0, 1};
  p["fig2b"] = base_preset("fig2b", "maxclique_binary", 0.55, 0.5, 5);
  p["fig4a"] = base_preset("fig4a", "ms_continuous", 0.55, 0.5, 5);
  p["fig4a"]["homodyne"] = {{"shots", 1000}, {"threshold_vertices", 5}};
  p["fig4b"] = base_preset("fig4b", "ms_integer", 0.55, 0.5, 5);
  p["fig5"] = base_preset("fig5", "sparse", 0.55, 0.8, 5);
  // r = 0.8 at d = 5 places 5.7% of each mode's norm above the cutoff
  p["fig5"]["initial"]["max_leaked_norm"] = 0.08;
  p["fig5"]["marginal"] = {3, 4, 5};
  p["fig5"]["conditional"] = {{"pattern", {{"3", 1}, {"4", 0}, {"5", 1}}}, {"targets", {0, 1, 2}}, {"shots", 1000}};
  p["fig5"]["frames"] = {{"fractions", {0.0, 0.5, 1.0}}, {"modes", {0, 1, 2}}, {"shots", 1000}};
  p["fig5"]["oracle"] = {{"dims", {6, 6, 6, 3, 3, 3}}};

  const std::vector<std::pair<std::string, std::string>> s1 = {
      {"figS1a", "fig1"}, {"figS1b", "fig2a"}, {"figS1c", "fig2b"}, {"figS1d", "fig4b"}, {"figS1e", "fig4a"}, {"figS1f", "fig5"}};
  for (const auto& [name, base] : s1) {
    json b = p[base];
    b.erase("tracked");
    b.erase("frames");
    b.erase("conditional");
    p[name] = detail::t_sweep(b, name);
  }
  p["figS2"] = p["fig1"];
  p["figS2"]["name"] = "figS2";
  p["figS2"]["sweep"] = {{"axis", "p0"}, {"values", {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.72, 0.8, 0.9, 1.0}}};
  for (const auto& [name, base] : std::vector<std::pair<std::string, std::string>>{{"figS3b", "fig4b"}, {"figS3c", "fig2b"}}) {
    p[name] = p[base];
    p[name]["name"] = name;
    p[name]["sweep"] = {{"axis", "p0"}, {"values", {0.2, 0.3, 0.4, 0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 1.0}}};
  }
  for (const auto& [name, sigma] : std::vector<std::pair<std::string, int>>{{"figS4a", 4}, {"figS4b", 5}}) {
    p[name] = p["fig4b"];
    p[name]["name"] = name;
    p[name]["problem"]["sigma"] = sigma;
    p[name]["success"] = {{"measure", "fock"}, {"solutions", {"+,+,0,+,0", "+,0,+,+,0"}}};
    p[name]["sweep"] = {{"axis", "lambda"}, {"values", {0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0}}};
  }
  return p;
}

inline json preset(const std::string& name) {
  const auto all = presets();
  const auto it = all.find(name);
  if (it == all.end()) throw InvalidArgument("unknown preset '" + name + "' (see 'bmip presets')");
  return it->second;
}

// ---------------------------------------------------------------------------
// Problem setup

inline MipModel build_model(const ExperimentConfig& c) {
  MipModel m;
  if (!c.model_file.empty()) {
    std::ifstream in(c.model_file);
    if (!in) throw InvalidArgument("config: cannot open model file '" + c.model_file + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw InvalidArgument("model file '" + c.model_file + "': " + e.what());
    }
    m = model_from_json(j);
  } else if (c.problem == "feasibility") {
    m = feasibility_instance();
  } else if (c.problem == "knapsack") {
    m = knapsack_instance();
  } else if (c.problem == "maxclique_binary") {
    m = maxclique_binary_instance();
  } else if (c.problem == "ms_continuous") {
    m = ms_continuous_instance();
  } else if (c.problem == "ms_integer") {
    m = ms_integer_instance(c.sigma);
  } else if (c.problem == "sparse") {
    if (c.mu.size() != 3) throw InvalidArgument("config: sparse problem needs three mu values");
    m = sparse_instance({c.mu[0], c.mu[1], c.mu[2]});
  } else {
    throw InvalidArgument("config: unknown problem '" + c.problem + "'");
  }
  for (const auto& [k, w] : c.penalties) {
    if (!m.penalties.count(k)) throw InvalidArgument("config: model has no penalty weight '" + k + "'");
    m.penalties[k] = w;
  }
  m.validate();
  return m;
}

/// Solutions and measurement used for success probabilities when the config
/// does not list them.
inline SuccessSpec default_success(const ExperimentConfig& c) {
  SuccessSpec s;
  if (c.problem == "feasibility") s.solutions = {"0,5", "1,4", "2,3", "3,2", "4,1", "5,0"};
  else if (c.problem == "knapsack") s.solutions = {"0,7,*"};
  else if (c.problem == "maxclique_binary" || c.problem == "ms_integer") s.solutions = {"1,1,0,1,0", "1,0,1,1,0"};
  else if (c.problem == "ms_continuous") {
    s.measure = SuccessSpec::Measure::Homodyne;
    s.solutions = {"1,1,0,1,0", "1,0,1,1,0"};
  } else if (c.problem == "sparse") s.solutions = {"*,*,*,1,0,1"};
  return s;
}

struct Setup {
  MipModel model;
  CompiledProblem compiled;
  ModeSpace space{std::vector<int>{2}};
  InitialStateSpec initial;
  std::shared_ptr<const SparseHermitian> hm, hp;
  PreparedState prepared;
};

inline Setup prepare(const ExperimentConfig& c) {
  Setup s;
  s.model = build_model(c);
  s.compiled = compile(s.model);
  const std::size_t modes = s.compiled.mode_count();
  s.space = ModeSpace(detail::broadcast(c.dims, modes, "dims"), c.hbar);
  const auto p0 = detail::broadcast(c.p0, modes, "initial.p0");
  const auto r = detail::broadcast(c.r, modes, "initial.r");
  for (std::size_t i = 0; i < modes; ++i) s.initial.modes.push_back({p0[i], r[i]});
  s.initial.working_dim = c.working_dim;
  s.initial.max_leaked_norm = c.max_leaked_norm;
  s.hm = OperatorCache::global().get(mixing_hamiltonian(s.initial), s.space);
  const OperatorPoly hp = c.scale == 1.0 ? s.compiled.poly : scale(s.compiled.poly, c.scale);
  s.hp = OperatorCache::global().get(hp, s.space);
  s.prepared = product_state(s.initial, s.space);
  return s;
}

// ---------------------------------------------------------------------------
// Running one configuration

struct PointResult {
  Trajectory trajectory;
  FockDistribution final_distribution;
  std::optional<FockDistribution> marginal;
  std::vector<std::string> solution_labels;
  FairnessEntry metrics;
  std::optional<HomodyneRecord> homodyne;
  std::optional<BitHistogram> bits;
  std::optional<ConditionalX2> conditional;
  std::vector<std::pair<double, std::vector<std::vector<double>>>> frames;  ///< (t, per-shot homodyne samples)
  std::vector<double> leaked_norm;
  std::vector<std::string> mode_names;
  double wall_seconds = 0.0;
};

namespace detail {

inline std::vector<FockProjector> parse_patterns(const std::vector<std::string>& pats, std::size_t modes) {
  std::vector<FockProjector> out;
  for (const std::string& s : pats) {
    FockProjector p = FockProjector::parse(s);
    if (p.mode_count() != modes)
      throw InvalidArgument("pattern '" + s + "' has " + std::to_string(p.mode_count()) + " entries, expected " + std::to_string(modes));
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<int> parse_bits(const std::string& s) {
  std::vector<int> b;
  for (char ch : s) {
    if (ch == '0' || ch == '1') b.push_back(ch - '0');
    else if (ch != ',' && ch != ' ' && ch != '|' && ch != '>') throw InvalidArgument("bit pattern '" + s + "' must contain only 0/1");
  }
  return b;
}

/// Fock-samples every mode outside `homodyne_modes`, then homodyne-samples
/// the rest of the conditioned state. Returns per-shot x samples.
inline std::vector<std::vector<double>> mixed_samples(const QuantumState& psi, const std::vector<std::size_t>& homodyne_modes,
                                                      std::size_t shots, std::uint64_t seed) {
  const ModeSpace& space = psi.space();
  std::vector<std::size_t> fock_modes;
  for (std::size_t m = 0; m < space.mode_count(); ++m)
    if (std::find(homodyne_modes.begin(), homodyne_modes.end(), m) == homodyne_modes.end()) fock_modes.push_back(m);
  if (fock_modes.empty()) return homodyne_sample(psi, homodyne_modes, shots, seed).samples;

  const FockDistribution marg = marginal(psi, fock_modes);
  // multinomial split of the shots over Fock patterns, drawn from one stream
  std::mt19937_64 rng = shot_rng(seed, ~std::uint64_t{0});
  std::vector<std::size_t> counts(static_cast<std::size_t>(marg.probabilities().size()), 0);
  std::vector<double> cdf(counts.size());
  std::partial_sum(marg.probabilities().data(), marg.probabilities().data() + marg.probabilities().size(), cdf.begin());
  for (std::size_t s = 0; s < shots; ++s) {
    const double u = uniform01(rng) * cdf.back();
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), counts.size() - 1);
    ++counts[k];
  }
  std::vector<std::vector<double>> out;
  const SubsetIndexer ix(space, homodyne_modes);
  std::vector<std::size_t> order(homodyne_modes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    const std::vector<int> occ = marg.space().occupation_of(k);
    std::vector<ModeCondition> conds(space.mode_count(), ModeCondition::any());
    for (std::size_t i = 0; i < fock_modes.size(); ++i) conds[fock_modes[i]] = ModeCondition::exactly(occ[i]);
    CVector sub = CVector::Zero(static_cast<Eigen::Index>(ix.kept_size()));
    for (std::size_t i : FockProjector(conds).indices(space)) sub(static_cast<Eigen::Index>(ix.kept_of[i])) += psi.amplitudes()(static_cast<Eigen::Index>(i));
    if (sub.norm() < 1e-12) continue;
    const QuantumState target(ModeSpace(ix.kept_dims, space.hbar()), sub / sub.norm());
    auto rec = homodyne_sample(target, order, counts[k], splitmix64(seed ^ (k + 1)));
    for (auto& shot : rec.samples) out.push_back(std::move(shot));
  }
  return out;
}

}  // namespace detail

/// With `record` false only the final state is kept (sweeps).
inline PointResult run_point(const ExperimentConfig& c, bool record = true) {
  const auto start = std::chrono::steady_clock::now();
  const Setup s = prepare(c);
  const std::size_t modes = s.space.mode_count();
  PointResult res;
  res.leaked_norm = s.prepared.leaked_norm;
  res.mode_names = s.compiled.mode_names;

  EvolutionOptions eo;
  eo.propagator.dense_limit = c.dense_limit;
  if (!c.tracked.empty()) eo.tracked = detail::parse_patterns(c.tracked, modes);
  else eo.record_distributions = record;
  for (double f : c.frames.fractions) eo.full_state_times.push_back(f * c.schedule.total_time);

  res.trajectory = evolve(*s.hm, *s.hp, s.prepared.state, c.schedule, eo);
  Trajectory& tr = res.trajectory;
  res.final_distribution = fock_probabilities(tr.final_state);

  if (c.tracked.empty() && record) {
    // top outcomes by final probability, plus vacuum
    std::vector<std::vector<int>> chosen;
    for (const auto& [occ, p] : res.final_distribution.top(c.auto_track)) chosen.push_back(occ);
    const std::vector<int> vac(modes, 0);
    if (std::find(chosen.begin(), chosen.end(), vac) == chosen.end()) chosen.push_back(vac);
    for (const auto& occ : chosen) {
      const FockProjector p = FockProjector::basis(occ);
      const std::size_t idx = s.space.index_of(occ);
      tr.labels.push_back(p.label());
      std::vector<double> series;
      for (const RVector& d : tr.distributions) series.push_back(d(static_cast<Eigen::Index>(idx)));
      tr.tracked.push_back(std::move(series));
    }
    tr.distributions.clear();
  }

  if (!c.marginal_modes.empty()) res.marginal = marginal(res.final_distribution, c.marginal_modes);

  if (c.homodyne.shots > 0) {
    std::vector<std::size_t> order = c.homodyne.modes;
    if (order.empty()) {
      order.resize(modes);
      std::iota(order.begin(), order.end(), std::size_t{0});
    }
    res.homodyne = homodyne_sample(tr.final_state, order, c.homodyne.shots, c.seed);
    res.bits = threshold_bits(*res.homodyne, c.homodyne.threshold_vertices ? c.homodyne.threshold_vertices : order.size(), c.hbar);
  }
  if (c.conditional.enabled()) {
    ConditionalX2Options o;
    o.shots = c.conditional.shots;
    o.seed = splitmix64(c.seed + 1);
    res.conditional = conditional_x2(tr.final_state, c.conditional.pattern, c.conditional.targets, o);
  }
  for (std::size_t k = 0; k < tr.full_states.size(); ++k) {
    const auto& [t, state] = tr.full_states[k];
    res.frames.emplace_back(t, detail::mixed_samples(state, c.frames.modes, c.frames.shots, splitmix64(c.seed + 100 + k)));
  }

  const SuccessSpec succ = c.success.solutions.empty() ? default_success(c) : c.success;
  res.solution_labels = succ.solutions;
  std::vector<double> probs;
  if (succ.measure == SuccessSpec::Measure::Fock) {
    for (const FockProjector& p : detail::parse_patterns(succ.solutions, modes)) probs.push_back(res.final_distribution.probability(p));
  } else {
    if (!res.bits) throw InvalidArgument("config: homodyne success needs homodyne.shots > 0");
    for (const std::string& b : succ.solutions) probs.push_back(res.bits->frequency(detail::parse_bits(b)));
  }
  if (probs.size() >= 2) {
    res.metrics = fairness_metrics(probs, res.final_distribution.total());
  } else {
    res.metrics.solution_probabilities = probs;
    res.metrics.success = probs.empty() ? 0.0 : probs.front();
    res.metrics.total = res.final_distribution.total();
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

// ---------------------------------------------------------------------------
// Artifact writing

/// Shortest round-trip text with 17 significant digits, independent of locale.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw InvalidArgument("cannot write '" + path.string() + "'");
  }
  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "," : "") << csv_field(cols[i]);
    out_ << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline std::string occupation_label(const std::vector<int>& occ) {
  std::string s;
  for (std::size_t i = 0; i < occ.size(); ++i) s += (i ? "," : "") + std::to_string(occ[i]);
  return s;
}

inline void write_distribution(const std::filesystem::path& path, const FockDistribution& d, const std::vector<std::string>& names) {
  CsvWriter w(path);
  std::vector<std::string> cols = names;
  cols.push_back("probability");
  w.header(cols);
  for (std::size_t i = 0; i < d.space().total_dimension(); ++i) {
    std::vector<std::string> cells;
    for (int v : d.space().occupation_of(i)) cells.push_back(std::to_string(v));
    cells.push_back(format_number(d.probabilities()(static_cast<Eigen::Index>(i))));
    w.row(cells);
  }
}

inline json metrics_json(const FairnessEntry& m, const std::vector<std::string>& labels) {
  json j = {{"success", m.success}, {"std_dev", m.std_dev}, {"total", m.total}};
  json per = json::object();
  for (std::size_t i = 0; i < labels.size() && i < m.solution_probabilities.size(); ++i) per[labels[i]] = m.solution_probabilities[i];
  j["solutions"] = per;
  if (m.bias) j["bias"] = *m.bias;
  if (m.bias_undefined) j["bias"] = "undefined";
  return j;
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& c, const json& extra, double wall) {
  json m;
  m["manifest_version"] = 1;
  m["library_version"] = kLibraryVersion;
  m["config"] = config_to_json(c);
  m["seed"] = c.seed;
  m["wall_seconds"] = wall;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
}

/// Writes trajectory.csv, final_distribution.csv, optional marginal,
/// homodyne, conditional and frame CSVs, summary.json and manifest.json.
inline PointResult run(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output);
  fs::create_directories(dir);
  PointResult res = run_point(c);
  const std::vector<std::string>& mode_names = res.mode_names;

  {
    CsvWriter w(dir / "trajectory.csv");
    std::vector<std::string> cols = {"t"};
    cols.insert(cols.end(), res.trajectory.labels.begin(), res.trajectory.labels.end());
    cols.push_back("norm");
    w.header(cols);
    for (std::size_t s = 0; s < res.trajectory.times.size(); ++s) {
      std::vector<std::string> cells = {format_number(res.trajectory.times[s])};
      for (const auto& series : res.trajectory.tracked) cells.push_back(format_number(series[s]));
      cells.push_back(format_number(1.0 + res.trajectory.norm_drift[s]));
      w.row(cells);
    }
  }
  write_distribution(dir / "final_distribution.csv", res.final_distribution, mode_names);
  if (res.marginal) {
    std::vector<std::string> names;
    for (std::size_t m : c.marginal_modes) names.push_back(mode_names.at(m));
    write_distribution(dir / "marginal.csv", *res.marginal, names);
  }
  if (res.homodyne) {
    CsvWriter w(dir / "homodyne.csv");
    std::vector<std::string> cols = {"shot"};
    for (std::size_t m : res.homodyne->modes) cols.push_back("x_" + mode_names.at(m));
    cols.push_back("bits");
    w.header(cols);
    for (std::size_t s = 0; s < res.homodyne->shots(); ++s) {
      std::vector<std::string> cells = {std::to_string(s)};
      for (double x : res.homodyne->samples[s]) cells.push_back(format_number(x));
      std::string b;
      for (int v : res.bits->bits[s]) b += std::to_string(v);
      cells.push_back(b);
      w.row(cells);
    }
    CsvWriter h(dir / "homodyne_patterns.csv");
    h.header({"pattern", "count", "frequency"});
    for (const auto& [pat, n] : res.bits->counts) {
      std::string b;
      for (int v : pat) b += std::to_string(v);
      h.row({b, std::to_string(n), format_number(static_cast<double>(n) / static_cast<double>(res.homodyne->shots()))});
    }
  }
  if (res.conditional) {
    CsvWriter w(dir / "conditional_x2.csv");
    w.header({"mode", "exact", "sampled", "standard_error", "shots", "condition_probability"});
    for (std::size_t k = 0; k < c.conditional.targets.size(); ++k) {
      w.row({mode_names.at(c.conditional.targets[k]), format_number(res.conditional->exact[k]),
             res.conditional->sampled.empty() ? "" : format_number(res.conditional->sampled[k]),
             res.conditional->standard_error.empty() ? "" : format_number(res.conditional->standard_error[k]),
             std::to_string(res.conditional->shots), format_number(res.conditional->condition_probability)});
    }
  }
  for (std::size_t f = 0; f < res.frames.size(); ++f) {
    CsvWriter w(dir / ("frame_" + std::to_string(f) + ".csv"));
    std::vector<std::string> cols;
    for (std::size_t m : c.frames.modes) cols.push_back("x_" + mode_names.at(m));
    w.header(cols);
    for (const auto& shot : res.frames[f].second) {
      std::vector<std::string> cells;
      for (double x : shot) cells.push_back(format_number(x));
      w.row(cells);
    }
  }
  json summary = metrics_json(res.metrics, res.solution_labels);
  summary["max_norm_drift"] = res.trajectory.max_norm_drift();
  summary["leaked_norm"] = res.leaked_norm;
  if (!res.frames.empty()) {
    json times = json::array();
    for (const auto& fr : res.frames) times.push_back(fr.first);
    summary["frame_times"] = times;
  }
  {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    out << summary.dump(2) << '\n';
  }
  write_manifest(dir, c, {{"summary", summary}}, res.wall_seconds);
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  double value = 0.0;
  FairnessEntry metrics;
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BOSONIC_MIP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline ExperimentConfig sweep_point(const ExperimentConfig& c, double value) {
  ExperimentConfig p = c;
  p.sweep.reset();
  const std::string& axis = c.sweep->axis;
  if (axis == "p0") p.p0 = {value};
  else if (axis == "r") p.r = {value};
  else if (axis == "T") p.schedule.total_time = value;
  else if (axis == "lambda") p.penalties[c.sweep->penalty] = value;
  else if (axis == "sigma") p.sigma = static_cast<int>(std::lround(value));
  else if (axis == "scale") p.scale = value;
  p.tracked.clear();
  p.auto_track = 0;
  p.frames = {};
  return p;
}

/// Runs every grid point (in parallel) and writes sweep.csv plus a manifest.
inline std::vector<SweepRow> sweep(const ExperimentConfig& c, bool write = true) {
  if (!c.sweep) throw InvalidArgument("sweep: config has no sweep axis");
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double>& values = c.sweep->values;
  std::vector<SweepRow> rows(values.size());
  std::vector<std::string> errors(values.size());
  std::vector<int> error_kind(values.size(), 0);
  std::atomic<std::size_t> next{0};
  const int threads = std::min<int>(resolve_threads(c.threads), static_cast<int>(values.size()));
  auto worker = [&] {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      try {
        ExperimentConfig p = sweep_point(c, values[i]);
        PointResult r = run_point(p, false);
        rows[i] = {values[i], r.metrics};
      } catch (const InvalidArgument& e) {
        errors[i] = e.what();
        error_kind[i] = 2;
      } catch (const std::exception& e) {
        errors[i] = e.what();
        error_kind[i] = 3;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (error_kind[i] == 2) throw InvalidArgument("sweep point " + format_number(values[i]) + ": " + errors[i]);
    if (error_kind[i] == 3) throw NumericalError("sweep point " + format_number(values[i]) + ": " + errors[i]);
  }
  if (write) {
    namespace fs = std::filesystem;
    const fs::path dir(c.output);
    fs::create_directories(dir);
    const SuccessSpec succ = c.success.solutions.empty() ? default_success(c) : c.success;
    CsvWriter w(dir / "sweep.csv");
    std::vector<std::string> cols = {c.sweep->axis, "success"};
    for (const std::string& s : succ.solutions) cols.push_back("p[" + s + "]");
    cols.insert(cols.end(), {"std_dev", "bias", "total"});
    w.header(cols);
    for (const SweepRow& r : rows) {
      std::vector<std::string> cells = {format_number(r.value), format_number(r.metrics.success)};
      for (double p : r.metrics.solution_probabilities) cells.push_back(format_number(p));
      cells.push_back(format_number(r.metrics.std_dev));
      cells.push_back(r.metrics.bias ? format_number(*r.metrics.bias) : "");
      cells.push_back(format_number(r.metrics.total));
      w.row(cells);
    }
    write_manifest(dir, c, json::object(), std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Oracle

struct OracleReport {
  OracleResult brute;
  OracleResult compiled;
  std::optional<GroundSpace> ground;
  double ground_energy = 0.0;  ///< including the constant offset
  std::set<std::vector<int>> brute_signatures, compiled_signatures, ground_signatures;
  bool ground_applicable = false;
  bool agreement = false;
};

/// Basis states of the ground space whose weight, summed over every mode
/// outside the integer/binary decision modes, is at least one half.
inline std::set<std::vector<int>> dominant_signatures(const GroundSpace& gs, const ModeSpace& space, const CompiledProblem& cp) {
  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < cp.decision_modes; ++m)
    if (cp.mode_kinds[m] != VarKind::Continuous) keep.push_back(m);
  const FockDistribution marg = marginal(FockDistribution(space.dims(), gs.weights), keep);
  std::set<std::vector<int>> out;
  for (std::size_t i = 0; i < marg.space().total_dimension(); ++i)
    if (marg.probabilities()(static_cast<Eigen::Index>(i)) >= 0.5) out.insert(marg.space().occupation_of(i));
  return out;
}

inline OracleReport oracle(const ExperimentConfig& c) {
  OracleReport rep;
  const MipModel model = build_model(c);
  const CompiledProblem cp = compile(model);
  const std::vector<int> dims = detail::broadcast(c.dims, cp.mode_count(), "dims");

  BruteForceOptions bo;
  bo.grid_step = c.oracle.grid_step;
  bo.bounds.assign(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(cp.decision_modes));
  rep.brute = brute_force(model, bo);
  rep.brute_signatures = signature_set(model.variables, rep.brute.assignments);

  BruteForceOptions co = bo;
  co.bounds = dims;
  rep.compiled = compiled_minimizers(cp, co);
  rep.compiled_signatures = signature_set(cp.normalized.variables, rep.compiled.assignments, cp.decision_modes);

  bool any_discrete = false;
  for (std::size_t m = 0; m < cp.decision_modes; ++m) any_discrete |= cp.mode_kinds[m] != VarKind::Continuous;
  rep.ground_applicable = any_discrete;
  if (any_discrete) {
    const std::vector<int> gdims = c.oracle.dims.empty() ? dims : detail::broadcast(c.oracle.dims, cp.mode_count(), "oracle.dims");
    const ModeSpace space(gdims, c.hbar);
    const SparseHermitian hp = assemble(cp.poly, space);
    rep.ground = ground_space(hp);
    rep.ground_energy = rep.ground->energy + cp.constant_offset;
    rep.ground_signatures = dominant_signatures(*rep.ground, space, cp);
  }
  rep.agreement = rep.brute_signatures == rep.compiled_signatures && (!any_discrete || rep.ground_signatures == rep.brute_signatures);
  return rep;
}

inline json oracle_json(const OracleReport& r, const MipModel& model) {
  auto assignments = [&](const OracleResult& o) {
    json a = json::array();
    for (const auto& v : o.assignments) a.push_back(v);
    return a;
  };
  auto sigs = [](const std::set<std::vector<int>>& s) {
    json a = json::array();
    for (const auto& v : s) a.push_back(v);
    return a;
  };
  json j;
  j["model"] = model.name;
  j["brute_force"] = {{"optimal_value", r.brute.optimal_value}, {"assignments", assignments(r.brute)}, {"points", r.brute.points},
                      {"signatures", sigs(r.brute_signatures)}};
  j["compiled"] = {{"minimum", r.compiled.optimal_value}, {"assignments", assignments(r.compiled)}, {"points", r.compiled.points},
                   {"signatures", sigs(r.compiled_signatures)}};
  if (r.ground) {
    j["ground_state"] = {{"energy", r.ground_energy}, {"degeneracy", r.ground->degeneracy}, {"signatures", sigs(r.ground_signatures)}};
  } else {
    j["ground_state"] = "not applicable: no integer or binary decision variables";
  }
  j["agreement"] = r.agreement;
  return j;
}

inline OracleReport run_oracle(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const OracleReport rep = oracle(c);
  fs::create_directories(c.output);
  std::ofstream out(fs::path(c.output) / "oracle.json", std::ios::binary);
  out << oracle_json(rep, build_model(c)).dump(2) << '\n';
  return rep;
}

}  // namespace bmip
