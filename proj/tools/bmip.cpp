// bmip: run evolutions, sweeps and oracles from presets or JSON configs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bosonic_mip.hpp"

namespace {

using bmip::json;

struct Common {
  std::string config_path;
  std::string preset;
  std::string out;
  std::vector<std::string> overrides;
  long long seed = -1;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "experiment config or manifest JSON");
  app->add_option("--preset", c.preset, "named preset (see 'presets')");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--override", c.overrides, "KEY=VALUE with dotted keys, e.g. schedule.T=20");
  app->add_option("--seed", c.seed, "rng seed");
  app->add_option("--threads", c.threads, "sweep worker threads (default BOSONIC_MIP_THREADS or all cores)");
}

json load_config_json(const Common& c) {
  if (c.config_path.empty() == c.preset.empty()) throw bmip::InvalidArgument("give exactly one of --config or --preset");
  json j;
  if (!c.preset.empty()) {
    j = bmip::preset(c.preset);
  } else {
    std::ifstream in(c.config_path);
    if (!in) throw bmip::InvalidArgument("cannot open config '" + c.config_path + "'");
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw bmip::InvalidArgument("config '" + c.config_path + "': " + e.what());
    }
    if (j.contains("manifest_version") && j.contains("config")) j = j.at("config");
  }
  for (const std::string& o : c.overrides) bmip::apply_override(j, o);
  if (!c.out.empty()) j["output"] = c.out;
  if (c.seed >= 0) j["seed"] = c.seed;
  if (c.threads > 0) j["threads"] = c.threads;
  return j;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adiabatic bosonic optimization experiments"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, oracle_opts, validate_opts;
  CLI::App* run = app.add_subcommand("run", "evolve one configuration and write artifacts");
  add_common(run, run_opts);
  CLI::App* sweep = app.add_subcommand("sweep", "run every point of the config's sweep axis");
  add_common(sweep, sweep_opts);
  CLI::App* oracle = app.add_subcommand("oracle", "brute-force and ground-state cross-check");
  add_common(oracle, oracle_opts);
  CLI::App* validate = app.add_subcommand("validate", "parse and check a config without running it");
  add_common(validate, validate_opts);
  CLI::App* presets = app.add_subcommand("presets", "list presets or print one as JSON");
  std::string show;
  presets->add_option("name", show, "preset to print");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      if (show.empty()) {
        for (const auto& [name, cfg] : bmip::presets()) std::cout << name << '\t' << cfg.at("problem").at("id").get<std::string>() << '\n';
      } else {
        std::cout << bmip::preset(show).dump(2) << '\n';
      }
      return 0;
    }
    if (validate->parsed()) {
      const bmip::ExperimentConfig c = bmip::config_from_json(load_config_json(validate_opts));
      const bmip::MipModel m = bmip::build_model(c);
      const bmip::CompiledProblem cp = bmip::compile(m);
      std::cout << json{{"valid", true}, {"modes", cp.mode_names}, {"hamiltonian", cp.poly.to_string()},
                        {"constant_offset", cp.constant_offset}}.dump(2)
                << '\n';
      return 0;
    }
    if (run->parsed()) {
      const bmip::ExperimentConfig c = bmip::config_from_json(load_config_json(run_opts));
      if (c.sweep) throw bmip::InvalidArgument("config defines a sweep axis; use 'sweep'");
      const bmip::PointResult r = bmip::run(c);
      std::cout << bmip::metrics_json(r.metrics, r.solution_labels).dump() << '\n';
      return 0;
    }
    if (sweep->parsed()) {
      const bmip::ExperimentConfig c = bmip::config_from_json(load_config_json(sweep_opts));
      const auto rows = bmip::sweep(c);
      for (const auto& row : rows) std::cout << bmip::format_number(row.value) << '\t' << bmip::format_number(row.metrics.success) << '\n';
      return 0;
    }
    if (oracle->parsed()) {
      const bmip::ExperimentConfig c = bmip::config_from_json(load_config_json(oracle_opts));
      const bmip::OracleReport rep = bmip::run_oracle(c);
      std::cout << json{{"agreement", rep.agreement}}.dump() << '\n';
      return rep.agreement ? 0 : 1;
    }
  } catch (const bmip::InvalidArgument& e) {
    return fail(2, "config", e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(2, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(2, "io", e.what());
  } catch (const std::exception& e) {
    return fail(3, "numerical", e.what());
  }
  return 0;
}
