// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/fed_client.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "fedstitch/errors.hpp"

namespace fedstitch::client {

ClientContext ClientContext::make(ClientId id, std::vector<std::size_t> shard, energy::DeviceProfile device,
                                  std::uint64_t global_seed) {
  if (shard.empty()) {
    throw SpecError("client " + std::to_string(id.value) + ": empty shard");
  }
  return ClientContext{id, std::move(shard), std::move(device), make_rng(global_seed, "client", id.value)};
}

double ClientReport::score_of(BlockId block) const {
  auto it = std::lower_bound(scores.begin(), scores.end(), block,
                             [](const ScoredBlock& s, BlockId b) { return s.block < b; });
  if (it == scores.end() || it->block != block) {
    throw IndexError("report of client " + std::to_string(client.value) + " has no score for block " +
                     std::to_string(block.value));
  }
  return it->score;
}

bool ClientReport::operator==(const ClientReport& o) const {
  auto plan_eq = [](const energy::Plan& a, const energy::Plan& b) {
    return a.level == b.level && a.freq == b.freq && a.t_sn == b.t_sn && a.t_pn == b.t_pn &&
           a.t_idle == b.t_idle && a.energy == b.energy && a.over_deadline == b.over_deadline;
  };
  return client == o.client && net == o.net && batch == o.batch && scores == o.scores &&
         selected == o.selected && explored == o.explored && epsilon == o.epsilon &&
         workload.d_sn == o.workload.d_sn && workload.d_pn == o.workload.d_pn && plan_eq(plan, o.plan) &&
         block_evaluations == o.block_evaluations;
}

std::vector<BlockId> top_k(std::span<const ScoredBlock> scores, int k) {
  std::vector<ScoredBlock> sorted(scores.begin(), scores.end());
  const auto take = std::min(sorted.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take), sorted.end(),
                    [](const ScoredBlock& a, const ScoredBlock& b) {
                      return a.score != b.score ? a.score > b.score : a.block < b.block;
                    });
  std::vector<BlockId> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back(sorted[i].block);
  }
  return out;
}

std::pair<std::vector<BlockId>, bool> epsilon_greedy_select(std::span<const ScoredBlock> scores,
                                                            double epsilon, int k, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw SpecError("epsilon_greedy_select: epsilon must lie in [0, 1]");
  }
  if (k < 1) {
    throw SpecError("epsilon_greedy_select: k must be at least 1");
  }
  if (scores.empty()) {
    throw PoolError("epsilon_greedy_select: no blocks to choose from");
  }
  const bool explore = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon;
  if (!explore) {
    return {top_k(scores, k), false};
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(k));
  // Partial Fisher-Yates: the first `take` slots end up a uniform sample.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<BlockId> chosen;
  chosen.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    chosen.push_back(scores[order[i]].block);
  }
  std::sort(chosen.begin(), chosen.end());
  return {chosen, true};
}

std::vector<std::size_t> sample_batch(std::span<const std::size_t> shard, int batch_size, Rng& rng) {
  if (shard.empty()) {
    throw SpecError("sample_batch: empty shard");
  }
  if (batch_size < 2) {
    throw SpecError("sample_batch: batch size must be at least 2");
  }
  const auto b = static_cast<std::size_t>(batch_size);
  std::vector<std::size_t> out;
  out.reserve(b);
  if (shard.size() >= b) {
    std::vector<std::size_t> pool(shard.begin(), shard.end());
    for (std::size_t i = 0; i < b; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, shard.size() - 1);
    for (std::size_t i = 0; i < b; ++i) {
      out.push_back(shard[pick(rng)]);
    }
  }
  return out;
}

ClientReport local_select(ClientContext& ctx, const zoo::ModelZoo& zoo, const data::Dataset& train,
                          const stitch::StitchedNetwork& net, double epsilon, int k, double deadline,
                          const SelectOptions& options) {
  if (!net.growing()) {
    throw StateError("local_select: network " + std::to_string(net.id.value) + " is finished");
  }
  const std::vector<BlockId> alive = net.pool.alive_ids();
  if (alive.empty()) {
    throw PoolError("local_select: pool of network " + std::to_string(net.id.value) + " is exhausted");
  }

  ClientReport report;
  report.client = ctx.id;
  report.net = net.id;
  report.epsilon = epsilon;
  report.batch = sample_batch(ctx.shard, options.batch_size, ctx.rng);
  const numerics::Matrix batch = train.rows(report.batch);

  const std::uint64_t evals_before = zoo::thread_block_evaluations();
  stitch::BatchScorer scorer(zoo, net, batch, options.rel_tol);
  report.scores.reserve(alive.size());
  double sn_blocks = 0.0;
  double pn_blocks = 0.0;
  for (BlockId id : alive) {
    report.scores.push_back(ScoredBlock{id, scorer.score(id)});
    sn_blocks += net.depth() + 1;
    pn_blocks += zoo.block(id).position;
  }
  report.block_evaluations = zoo::thread_block_evaluations() - evals_before;

  auto [selected, explored] = epsilon_greedy_select(report.scores, epsilon, k, ctx.rng);
  report.selected = std::move(selected);
  report.explored = explored;

  const double rows = static_cast<double>(batch.rows());
  report.workload = energy::Workload{rows * sn_blocks, rows * pn_blocks};
  report.plan = options.fixed_level
                    ? energy::plan_at(ctx.device, report.workload, deadline, *options.fixed_level)
                    : energy::choose_frequency(ctx.device, report.workload, deadline);
  return report;
}

}  // namespace fedstitch::client
