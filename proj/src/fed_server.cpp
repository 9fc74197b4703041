// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/fed_server.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "fedstitch/errors.hpp"

namespace fedstitch::server {

void AggregatorParams::validate() const {
  if (!(epsilon0 >= 0.0 && epsilon0 <= 1.0)) {
    throw ConfigError("aggregator.epsilon0", "must lie in [0, 1]");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("aggregator.gamma", "must lie in (0, 1]");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("aggregator.alpha", "must lie in (0, 1)");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("aggregator.beta", "must lie in (0, 1)");
  }
  if (!(theta > 0.0 && theta < 1.0)) {
    throw ConfigError("aggregator.theta", "must lie in (0, 1)");
  }
  if (k < 1) {
    throw ConfigError("protocol.k", "must be at least 1");
  }
}

AggregatorState AggregatorState::uniform(std::size_t num_clients, AggregatorParams params) {
  if (num_clients == 0) {
    throw SpecError("aggregator: need at least one client");
  }
  params.validate();
  return AggregatorState{std::vector<double>(num_clients, 1.0 / static_cast<double>(num_clients)), params};
}

double AggregatorState::epsilon_at(int depth) const {
  return params.epsilon0 * std::pow(params.gamma, depth);
}

double rank_calculation(std::span<const ClientReport> reports, ClientId target, double theta) {
  const ClientReport* mine = nullptr;
  for (const ClientReport& r : reports) {
    if (r.client == target) {
      mine = &r;
    }
  }
  if (mine == nullptr) {
    throw IndexError("rank_calculation: client " + std::to_string(target.value) + " did not report");
  }
  if (reports.size() < 2 || mine->selected.empty()) {
    return theta;
  }
  double total = 0.0;
  int pairs = 0;
  for (const ClientReport& other : reports) {
    if (other.client == target) {
      continue;
    }
    const double pool = static_cast<double>(other.scores.size());
    for (BlockId b : mine->selected) {
      const double s = other.score_of(b);
      // 1-based ascending rank with ties sharing their average position.
      double below = 0.0;
      double equal = 0.0;
      for (const client::ScoredBlock& e : other.scores) {
        below += e.score < s ? 1.0 : 0.0;
        equal += e.score == s ? 1.0 : 0.0;
      }
      total += (below + (equal + 1.0) / 2.0) / pool;
      ++pairs;
    }
  }
  return total / pairs;
}

AggregatorState update_weights(const AggregatorState& state, const std::map<ClientId, double>& ranks) {
  AggregatorState next = state;
  for (const auto& [id, raw_rank] : ranks) {
    if (id.value >= next.weights.size()) {
      throw IndexError("update_weights: unknown client " + std::to_string(id.value));
    }
    const double rank = std::clamp(raw_rank, 0.0, 1.0);
    next.weights[id.value] *= rank < state.params.theta ? 1.0 - state.params.beta : 1.0 + state.params.alpha;
  }
  const double sum = std::accumulate(next.weights.begin(), next.weights.end(), 0.0);
  for (double& w : next.weights) {
    w /= sum;
  }
  return next;
}

void VoteTally::add(const AggregatorState& state, std::span<const ClientReport> reports) {
  for (const ClientReport& r : reports) {
    for (BlockId b : r.selected) {
      votes_[b] += state.weight(r.client);
    }
    for (const client::ScoredBlock& s : r.scores) {
      auto& [sum, n] = score_sums_[s.block];
      sum += s.score;
      ++n;
    }
  }
}

double VoteTally::votes(BlockId block) const {
  auto it = votes_.find(block);
  return it == votes_.end() ? 0.0 : it->second;
}

double VoteTally::mean_score(BlockId block) const {
  auto it = score_sums_.find(block);
  return it == score_sums_.end() ? 0.0 : it->second.first / it->second.second;
}

std::vector<std::pair<BlockId, double>> VoteTally::ranking() const {
  std::vector<std::pair<BlockId, double>> out(votes_.begin(), votes_.end());
  std::stable_sort(out.begin(), out.end(), [this](const auto& a, const auto& b) {
    if (a.second != b.second) {
      return a.second > b.second;
    }
    const double sa = mean_score(a.first);
    const double sb = mean_score(b.first);
    if (sa != sb) {
      return sa > sb;
    }
    return a.first < b.first;
  });
  return out;
}

std::vector<BlockId> VoteTally::winners(int k) const {
  std::vector<BlockId> out;
  for (const auto& [block, v] : ranking()) {
    if (static_cast<int>(out.size()) == k) {
      break;
    }
    out.push_back(block);
  }
  return out;
}

std::vector<BlockId> weighted_voting(const AggregatorState& state, std::span<const ClientReport> reports,
                                     int k) {
  VoteTally tally;
  tally.add(state, reports);
  return tally.winners(k);
}

stitch::BlockPool prune_pool(const stitch::BlockPool& pool, std::span<const ClientReport> reports) {
  if (reports.empty()) {
    return pool;
  }
  std::map<BlockId, std::pair<double, int>> sums;
  for (const ClientReport& r : reports) {
    for (const client::ScoredBlock& s : r.scores) {
      auto& [sum, n] = sums[s.block];
      sum += s.score;
      ++n;
    }
  }
  // Per model: layer_start of the best-scoring alive block.
  std::map<ModelId, std::pair<double, int>> best;
  for (const auto& e : pool.entries()) {
    if (!e.alive) {
      continue;
    }
    auto it = sums.find(e.id);
    if (it == sums.end()) {
      continue;
    }
    const double mean = it->second.first / it->second.second;
    auto [slot, inserted] = best.try_emplace(e.model, mean, e.layer_start);
    if (!inserted && (mean > slot->second.first ||
                      (mean == slot->second.first && e.layer_start < slot->second.second))) {
      slot->second = {mean, e.layer_start};
    }
  }
  stitch::BlockPool pruned = pool;
  for (const auto& e : pool.entries()) {
    auto it = best.find(e.model);
    if (e.alive && it != best.end() && e.layer_start < it->second.second) {
      pruned.tombstone(e.id);
    }
  }
  return pruned;
}

double compute_deadline(std::span<const double> last_round_times, double depth_ratio, double pool_ratio,
                        double mu, double sigma, double floor) {
  if (last_round_times.empty()) {
    throw SpecError("compute_deadline: no previous round times");
  }
  const double longest = *std::max_element(last_round_times.begin(), last_round_times.end());
  const double d = longest * (1.0 + mu * (depth_ratio - 1.0)) * (1.0 + sigma * (pool_ratio - 1.0));
  return d > 0.0 && std::isfinite(d) ? d : floor;
}

Coordinator::Coordinator(const zoo::ModelZoo& zoo, CoordinatorOptions options, std::uint64_t seed,
                         int max_depth)
    : zoo_(zoo),
      options_(std::move(options)),
      max_depth_(max_depth),
      rng_(make_rng(seed, "server")),
      state_(AggregatorState::uniform(options_.num_clients, options_.aggregator)) {
  if (options_.rounds_per_step < 1) {
    throw ConfigError("protocol.rounds_per_step", "must be at least 1");
  }
  if (options_.participants_per_round < 1 ||
      static_cast<std::size_t>(options_.participants_per_round) > options_.num_clients) {
    throw ConfigError("federation.participants_per_round", "must lie in [1, num_clients]");
  }
  if (options_.only_client && options_.only_client->value >= options_.num_clients) {
    throw ConfigError("mode", "local client outside the population");
  }
  const stitch::BlockPool pool = stitch::BlockPool::initial(zoo_);
  for (BlockId start : zoo_.starting_blocks()) {
    const NetId id{next_net_++};
    growing_.push_back(stitch::make_root(zoo_, start, id, pool, max_depth_));
    lineage_[id] = Lineage{id, std::nullopt, -1, 0.0};
  }
}

const stitch::StitchedNetwork& Coordinator::current() const {
  if (!current_) {
    throw StateError("coordinator: no step in progress");
  }
  return *current_;
}

const stitch::StitchedNetwork& Coordinator::begin_step() {
  if (current_) {
    throw StateError("coordinator: previous step not finished");
  }
  if (growing_.empty()) {
    throw StateError("coordinator: no growing candidates left");
  }
  std::uniform_int_distribution<std::size_t> pick(0, growing_.size() - 1);
  const std::size_t i = pick(rng_);
  current_ = std::move(growing_[i]);
  growing_.erase(growing_.begin() + static_cast<std::ptrdiff_t>(i));
  tally_ = VoteTally{};
  step_reports_.clear();
  vote_ = 0;
  return *current_;
}

Coordinator::Dispatch Coordinator::dispatch() {
  const stitch::StitchedNetwork& net = current();
  if (step_ready()) {
    throw StateError("coordinator: all voting rounds of this step are done");
  }
  Dispatch d;
  if (options_.only_client) {
    d.participants = {*options_.only_client};
  } else {
    std::vector<ClientId> all;
    all.reserve(options_.num_clients);
    for (std::uint32_t c = 0; c < options_.num_clients; ++c) {
      all.emplace_back(c);
    }
    const auto n = static_cast<std::size_t>(options_.participants_per_round);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng_)]);
    }
    d.participants.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(d.participants.begin(), d.participants.end());
  }
  if (last_times_.empty()) {
    d.deadline_s = options_.bootstrap_deadline_s;
  } else {
    const double depth_ratio = static_cast<double>(net.depth()) / last_depth_;
    const double pool_ratio = static_cast<double>(net.pool.size()) / static_cast<double>(last_pool_);
    d.deadline_s = std::max(options_.min_deadline_s,
                            compute_deadline(last_times_, depth_ratio, pool_ratio, options_.mu,
                                             options_.sigma, options_.min_deadline_s));
  }
  d.epsilon = state_.epsilon_at(net.depth());
  return d;
}

void Coordinator::submit_round(const Dispatch& dispatched, std::vector<ClientReport> reports) {
  const stitch::StitchedNetwork& net = current();
  if (reports.size() != dispatched.participants.size()) {
    throw StateError("coordinator: expected " + std::to_string(dispatched.participants.size()) +
                     " reports, got " + std::to_string(reports.size()));
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].client != dispatched.participants[i] || reports[i].net != net.id) {
      throw StateError("coordinator: report " + std::to_string(i) + " does not match the dispatch");
    }
    if (reports[i].scores.size() != net.pool.size()) {
      throw StateError("coordinator: report of client " + std::to_string(reports[i].client.value) +
                       " does not cover the alive pool");
    }
  }

  RoundRecord rec;
  rec.round = round_;
  rec.step = step_;
  rec.vote = vote_;
  rec.net = net.id;
  rec.net_depth = net.depth();
  rec.epsilon = dispatched.epsilon;
  rec.pool_before = net.pool.size();
  rec.pool_after = net.pool.size();
  rec.deadline_s = dispatched.deadline_s;

  std::map<ClientId, double> ranks;
  for (const ClientReport& r : reports) {
    ranks[r.client] = rank_calculation(reports, r.client, state_.params.theta);
  }
  if (!options_.freeze_weights && reports.size() >= 2) {
    state_ = update_weights(state_, ranks);
  }
  tally_.add(state_, reports);

  last_times_.clear();
  double duration = dispatched.deadline_s;
  for (const ClientReport& r : reports) {
    ClientRow row;
    row.client = r.client;
    row.rank = ranks[r.client];
    row.vote_weight = state_.weight(r.client);
    row.weight_after = state_.weight(r.client);
    row.selected = r.selected;
    row.explored = r.explored;
    row.level = r.plan.level;
    row.freq = r.plan.freq;
    row.time_s = r.plan.busy();
    row.energy_j = r.plan.energy;
    row.over_deadline = r.plan.over_deadline;
    row.block_evaluations = r.block_evaluations;
    misses_ += r.plan.over_deadline ? 1 : 0;
    duration = std::max(duration, r.plan.busy());
    last_times_.push_back(r.plan.busy());
    rec.clients.push_back(std::move(row));
  }
  rec.duration_s = duration;
  last_depth_ = net.depth();
  last_pool_ = net.pool.size();

  step_reports_.insert(step_reports_.end(), std::make_move_iterator(reports.begin()),
                       std::make_move_iterator(reports.end()));
  records_.push_back(std::move(rec));
  ++round_;
  ++vote_;
}

void Coordinator::finish_step(const CalibrationSource& calib) {
  if (!step_ready()) {
    throw StateError("coordinator: step has outstanding voting rounds");
  }
  const stitch::StitchedNetwork parent = std::move(*current_);
  current_.reset();

  const std::vector<BlockId> winners = tally_.winners(state_.params.k);
  const stitch::BlockPool child_pool =
      options_.prune ? prune_pool(parent.pool, step_reports_) : parent.pool;

  RoundRecord& rec = records_.back();
  rec.tallies = tally_.ranking();
  rec.winners = winners;
  rec.pool_after = child_pool.size();

  for (BlockId block : winners) {
    // Calibrate on the batch of the heaviest client that voted for the block,
    // using its most recent such report; ties go to the lower client id.
    const ClientReport* calibrator = nullptr;
    for (const ClientReport& r : step_reports_) {
      if (std::find(r.selected.begin(), r.selected.end(), block) == r.selected.end()) {
        continue;
      }
      if (calibrator == nullptr || state_.weight(r.client) > state_.weight(calibrator->client) ||
          (state_.weight(r.client) == state_.weight(calibrator->client) &&
           r.client <= calibrator->client)) {
        calibrator = &r;
      }
    }
    const Matrix rows = calib(*calibrator, step_);
    const NetId id{next_net_++};
    stitch::StitchedNetwork child = stitch::stitch_append(zoo_, parent, block, rows, id, options_.rel_tol);
    child.pool = child_pool;
    // A block joins a network at most once.
    child.pool.tombstone(block);
    if (child.growing() && child.pool.size() == 0) {
      child.status = stitch::Status::Finished;
      child.reason = stitch::FinishReason::MaxDepth;
    }
    lineage_[id] = Lineage{id, parent.id, step_, tally_.votes(block)};
    rec.children.push_back(id);
    if (child.growing()) {
      growing_.push_back(std::move(child));
    } else {
      finished_.push_back(std::move(child));
    }
  }
  ++step_;
}

}  // namespace fedstitch::server
