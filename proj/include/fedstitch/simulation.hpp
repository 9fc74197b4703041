// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedstitch/config.hpp"
#include "fedstitch/data.hpp"
#include "fedstitch/fed_client.hpp"
#include "fedstitch/fed_server.hpp"
#include "fedstitch/model_zoo.hpp"
#include "fedstitch/trace.hpp"

namespace fedstitch::sim {

/// Everything a run derives from (config, seed) before the first round.
/// Clients hold fresh rng streams; copy before reuse.
struct Setup {
  zoo::ModelZoo zoo;
  data::Task task;
  data::Partition partition;
  std::vector<client::ClientContext> clients;
  /// Device class index per client.
  std::vector<std::size_t> device_of;
};

Setup prepare(const SimConfig& config);

struct RunSummary {
  Mode mode = Mode::Full;
  std::uint64_t seed = 0;
  int macro_rounds = 0;
  int steps = 0;
  int rounds = 0;
  bool budget_hit = false;
  std::size_t finished = 0;
  std::size_t classifiers = 0;
  /// Best held-out accuracy over classifier networks; absent when none finished.
  std::optional<double> best_accuracy;
  std::optional<NetId> best_net;
  double total_time_s = 0.0;
  double total_energy_j = 0.0;
  std::uint64_t block_evaluations = 0;
  std::uint64_t deadline_misses = 0;
};

struct RunResult {
  RunSummary summary;
  std::vector<server::RoundRecord> records;
  std::vector<stitch::StitchedNetwork> finished;
  std::map<NetId, server::Lineage> lineage;
  std::map<NetId, double> accuracy;  // classifier networks only
  std::vector<double> final_weights;
};

/// Produces the reports for one dispatched round. The default source runs
/// local selection on the simulated clients.
using ReportSource = std::function<std::vector<client::ClientReport>(
    int round, const server::Coordinator::Dispatch& dispatch, const stitch::StitchedNetwork& net)>;

struct RunHooks {
  /// Receives every report as it is produced.
  std::function<void(const trace::Entry&)> on_report;
  /// Replaces local selection, e.g. with a recorded trace.
  ReportSource source;
  /// Called after each voting round with the record and the updated weights.
  std::function<void(const server::RoundRecord&, const server::AggregatorState&)> on_round;
};

/// Runs the protocol until every candidate finishes or the macro-round
/// budget runs out. Deterministic for a fixed config.
RunResult run_simulation(const SimConfig& config, const RunHooks& hooks = {});
/// As above on an already prepared setup (its clients are copied).
RunResult run_simulation(const SimConfig& config, const Setup& setup, const RunHooks& hooks = {});

/// Source that replays recorded reports in order, checking that each matches
/// the dispatched participant and round.
ReportSource replay_source(std::vector<trace::Entry> entries);

/// Runs each mode on the same zoo, task and partition.
std::vector<RunSummary> compare_modes(const SimConfig& config, std::span<const Mode> modes);

void write_rounds_csv(std::ostream& os, std::span<const server::RoundRecord> records);
void write_summary_csv(std::ostream& os, std::span<const RunSummary> summaries);
void write_report(std::ostream& os, const SimConfig& config, const RunResult& result);

/// Writes rounds.csv, summary.csv, report.txt and networks.json into `dir`.
void write_outputs(const std::filesystem::path& dir, const SimConfig& config, const Setup& setup,
                   const RunResult& result);

}  // namespace fedstitch::sim
