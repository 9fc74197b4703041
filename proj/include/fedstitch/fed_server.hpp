// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedstitch/fed_client.hpp"
#include "fedstitch/ids.hpp"
#include "fedstitch/rng.hpp"
#include "fedstitch/stitcher.hpp"

namespace fedstitch::server {

using client::ClientReport;
using numerics::Matrix;

struct AggregatorParams {
  double epsilon0 = 0.2;
  /// Per-depth decay of the exploration rate.
  double gamma = 0.9;
  double alpha = 0.1;
  double beta = 0.1;
  double theta = 0.5;
  int k = 3;

  void validate() const;
};

struct AggregatorState {
  std::vector<double> weights;  // indexed by ClientId::value
  AggregatorParams params;

  static AggregatorState uniform(std::size_t num_clients, AggregatorParams params);
  /// epsilon0 * gamma^depth for a candidate of the given depth.
  double epsilon_at(int depth) const;
  double weight(ClientId id) const { return weights.at(id.value); }
};

/// Mean, over the target's selected blocks and every other reporting client
/// u, of the percentile of u's score for that block within u's own scores:
/// average rank over ties, divided by pool size, so u's best block is 1 and
/// its worst is 1/p. A round without other clients yields `theta`.
double rank_calculation(std::span<const ClientReport> reports, ClientId target, double theta);

/// Participants ranked at or above theta are scaled by 1 + alpha, the rest by
/// 1 - beta; then all weights are renormalized to sum to one.
AggregatorState update_weights(const AggregatorState& state, const std::map<ClientId, double>& ranks);

/// Weighted vote counts accumulated across the voting rounds of one stitch
/// step, plus the running score sums used for tie-breaking.
class VoteTally {
 public:
  /// Adds one round of reports voted with `state`'s current weights.
  void add(const AggregatorState& state, std::span<const ClientReport> reports);

  double votes(BlockId block) const;
  double mean_score(BlockId block) const;
  /// Blocks with any vote, ordered by (votes desc, mean score desc, id asc).
  std::vector<std::pair<BlockId, double>> ranking() const;
  std::vector<BlockId> winners(int k) const;
  bool empty() const { return votes_.empty(); }

 private:
  std::map<BlockId, double> votes_;
  std::map<BlockId, std::pair<double, int>> score_sums_;
};

/// Single-round voting: the k blocks with the highest weight-mass of votes.
std::vector<BlockId> weighted_voting(const AggregatorState& state, std::span<const ClientReport> reports,
                                     int k);

/// For each source model, tombstones its alive blocks that start shallower
/// than its alive block with the highest mean score across `reports`
/// (ties to the shallower block).
stitch::BlockPool prune_pool(const stitch::BlockPool& pool, std::span<const ClientReport> reports);

/// max(times) scaled by depth and pool-size changes; results at or below zero
/// fall back to `floor`.
double compute_deadline(std::span<const double> last_round_times, double depth_ratio, double pool_ratio,
                        double mu, double sigma, double floor = 1e-2);

struct ClientRow {
  ClientId client;
  double rank = 0.0;
  double vote_weight = 0.0;  // weight the client voted with this round
  double weight_after = 0.0;
  std::vector<BlockId> selected;
  bool explored = false;
  std::size_t level = 0;
  double freq = 0.0;
  double time_s = 0.0;
  double energy_j = 0.0;
  bool over_deadline = false;
  std::uint64_t block_evaluations = 0;
};

/// Telemetry for one voting round.
struct RoundRecord {
  int round = 0;
  int step = 0;
  int vote = 0;  // index within the step
  NetId net;
  int net_depth = 0;
  double epsilon = 0.0;
  std::size_t pool_before = 0;
  std::size_t pool_after = 0;
  double deadline_s = 0.0;
  /// Simulated wall time of the round: the deadline or the slowest straggler.
  double duration_s = 0.0;
  std::vector<ClientRow> clients;
  /// Filled on the last round of a step.
  std::vector<std::pair<BlockId, double>> tallies;
  std::vector<BlockId> winners;
  std::vector<NetId> children;
};

struct Lineage {
  NetId net;
  std::optional<NetId> parent;
  int created_step = -1;
  /// Weighted votes behind the block that created this network.
  double votes = 0.0;
};

struct CoordinatorOptions {
  AggregatorParams aggregator;
  int rounds_per_step = 5;
  int participants_per_round = 10;
  std::size_t num_clients = 100;
  double mu = 0.5;
  double sigma = 1.0;
  double bootstrap_deadline_s = 5.0;
  double min_deadline_s = 1e-2;
  bool freeze_weights = false;
  bool prune = true;
  /// Restricts every round to this one client.
  std::optional<ClientId> only_client;
  double rel_tol = 0.0;
};

/// Supplies the rows used to fit a winning block's adapter. Receives the
/// step's reports and the client chosen to calibrate.
using CalibrationSource = std::function<Matrix(const ClientReport& calibrator, int step)>;

/// The server's state machine. One voting round at a time; every mutation
/// (weights, pools, candidate set) happens inside submit_round or
/// finish_step, in order.
class Coordinator {
 public:
  Coordinator(const zoo::ModelZoo& zoo, CoordinatorOptions options, std::uint64_t seed, int max_depth);

  bool done() const { return growing_.empty(); }
  int steps_completed() const { return step_; }
  int rounds_completed() const { return round_; }

  /// Picks N_t uniformly among growing candidates. Must precede the step's rounds.
  const stitch::StitchedNetwork& begin_step();
  const stitch::StitchedNetwork& current() const;
  bool step_open() const { return current_.has_value(); }
  bool step_ready() const { return step_open() && vote_ == options_.rounds_per_step; }

  /// Participants and deadline for the next voting round of the current step.
  struct Dispatch {
    std::vector<ClientId> participants;
    double deadline_s = 0.0;
    double epsilon = 0.0;
  };
  Dispatch dispatch();

  /// Ranks, updates weights, accumulates votes and appends a RoundRecord.
  void submit_round(const Dispatch& dispatched, std::vector<ClientReport> reports);

  /// Stitches the step's winners onto N_t and retires it.
  void finish_step(const CalibrationSource& calib);

  const AggregatorState& state() const { return state_; }
  const std::vector<RoundRecord>& records() const { return records_; }
  const std::vector<stitch::StitchedNetwork>& finished() const { return finished_; }
  const std::vector<stitch::StitchedNetwork>& growing() const { return growing_; }
  const std::map<NetId, Lineage>& lineage() const { return lineage_; }
  std::uint64_t deadline_misses() const { return misses_; }

 private:
  const zoo::ModelZoo& zoo_;
  CoordinatorOptions options_;
  int max_depth_;
  Rng rng_;
  AggregatorState state_;
  std::vector<stitch::StitchedNetwork> growing_;
  std::vector<stitch::StitchedNetwork> finished_;
  std::map<NetId, Lineage> lineage_;
  std::vector<RoundRecord> records_;
  std::optional<stitch::StitchedNetwork> current_;
  VoteTally tally_;
  std::vector<ClientReport> step_reports_;
  int step_ = 0;
  int round_ = 0;
  int vote_ = 0;
  std::uint32_t next_net_ = 0;
  std::uint64_t misses_ = 0;
  // Previous round's context for the deadline rule.
  std::vector<double> last_times_;
  int last_depth_ = 0;
  std::size_t last_pool_ = 0;
};

}  // namespace fedstitch::server
