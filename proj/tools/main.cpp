// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: run, compare, replay, export-net.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fedstitch/archive.hpp"
#include "fedstitch/config.hpp"
#include "fedstitch/errors.hpp"
#include "fedstitch/simulation.hpp"
#include "fedstitch/trace.hpp"

namespace fs = std::filesystem;
using namespace fedstitch;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string mode;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode) {
  cmd->add_option("--config", c.config, "JSON config file (defaults apply when omitted)");
  cmd->add_option("--seed", c.seed, "Global seed, overrides the config");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  if (with_mode) {
    cmd->add_option("--mode", c.mode, "full, fedavg_voting, no_prune, max_frequency or local_only");
  }
}

SimConfig resolve(const Common& c) {
  SimConfig cfg = c.config.empty() ? SimConfig{} : load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
  }
  if (!c.mode.empty()) {
    cfg.mode = parse_mode(c.mode);
  }
  cfg.validate();
  return cfg;
}

int cmd_run(const Common& c, const std::string& trace_path) {
  const SimConfig cfg = resolve(c);
  const sim::Setup setup = sim::prepare(cfg);
  fs::create_directories(c.out);
  const fs::path tpath = trace_path.empty() ? fs::path(c.out) / "trace.jsonl" : fs::path(trace_path);
  std::ofstream trace_out(tpath, std::ios::binary);
  if (!trace_out) {
    throw Error("cannot write " + tpath.string());
  }
  sim::RunHooks hooks;
  hooks.on_report = [&](const trace::Entry& e) { trace::write(trace_out, e); };
  const sim::RunResult result = sim::run_simulation(cfg, setup, hooks);
  sim::write_outputs(c.out, cfg, setup, result);
  std::ofstream(fs::path(c.out) / "config.json") << config_to_json(cfg);
  sim::write_report(std::cout, cfg, result);
  return 0;
}

int cmd_compare(const Common& c, const std::vector<std::string>& mode_names) {
  SimConfig cfg = resolve(c);
  std::vector<Mode> modes;
  for (const std::string& m : mode_names) {
    modes.push_back(parse_mode(m));
  }
  if (modes.empty()) {
    modes = all_modes();
  }
  if (modes.size() < 2) {
    throw ConfigError("--modes", "compare needs at least two modes");
  }
  const std::vector<sim::RunSummary> summaries = sim::compare_modes(cfg, modes);
  fs::create_directories(c.out);
  std::ofstream f(fs::path(c.out) / "summary.csv", std::ios::binary);
  sim::write_summary_csv(f, summaries);
  sim::write_summary_csv(std::cout, summaries);
  return 0;
}

int cmd_replay(const Common& c, const std::string& trace_path) {
  const SimConfig cfg = resolve(c);
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) {
    throw Error("cannot open trace " + trace_path);
  }
  const sim::Setup setup = sim::prepare(cfg);
  sim::RunHooks hooks;
  hooks.source = sim::replay_source(trace::read_all(in));
  const sim::RunResult result = sim::run_simulation(cfg, setup, hooks);
  sim::write_outputs(c.out, cfg, setup, result);
  sim::write_report(std::cout, cfg, result);
  return 0;
}

int cmd_export(const Common& c, std::optional<std::uint32_t> net_id) {
  const SimConfig cfg = resolve(c);
  const sim::Setup setup = sim::prepare(cfg);
  const sim::RunResult result = sim::run_simulation(cfg, setup);
  std::optional<NetId> want = net_id ? std::optional<NetId>(NetId{*net_id}) : result.summary.best_net;
  if (!want) {
    throw Error("export-net: the run finished no classifier network");
  }
  archive::Contents contents{setup.zoo, {}, {}, result.final_weights};
  for (const stitch::StitchedNetwork& n : result.finished) {
    if (n.id == *want) {
      contents.networks.push_back(n);
      if (auto it = result.lineage.find(n.id); it != result.lineage.end()) {
        contents.lineage.insert(*it);
      }
    }
  }
  if (contents.networks.empty()) {
    throw Error(fmt::format("export-net: network {} is not among the finished networks", want->value));
  }
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / fmt::format("net_{}.json", want->value);
  std::ofstream(path, std::ios::binary) << archive::write(contents);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated stitching of pre-trained blocks: simulator and tools"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, rep_opts, exp_opts;
  std::string run_trace, rep_trace;
  std::vector<std::string> modes;
  std::optional<std::uint32_t> net_id;

  auto* run = app.add_subcommand("run", "Run one simulation and write rounds.csv, summary.csv, report.txt");
  add_common(run, run_opts, true);
  run->add_option("--trace", run_trace, "Report trace path (default <out>/trace.jsonl)");

  auto* cmp = app.add_subcommand("compare", "Run several modes on identical data and compare them");
  add_common(cmp, cmp_opts, false);
  cmp->add_option("--modes", modes, "Modes to compare (default: all)");

  auto* rep = app.add_subcommand("replay", "Feed a recorded report trace back through the server");
  add_common(rep, rep_opts, true);
  rep->add_option("--trace", rep_trace, "Trace written by `run`")->required();

  auto* exp = app.add_subcommand("export-net", "Run, then archive one finished network");
  add_common(exp, exp_opts, true);
  exp->add_option("--net", net_id, "Network id (default: best by held-out accuracy)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      return cmd_run(run_opts, run_trace);
    }
    if (*cmp) {
      return cmd_compare(cmp_opts, modes);
    }
    if (*rep) {
      return cmd_replay(rep_opts, rep_trace);
    }
    return cmd_export(exp_opts, net_id);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
