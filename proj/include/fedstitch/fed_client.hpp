// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedstitch/data.hpp"
#include "fedstitch/energy.hpp"
#include "fedstitch/ids.hpp"
#include "fedstitch/rng.hpp"
#include "fedstitch/stitcher.hpp"

namespace fedstitch::client {

/// A simulated participant. The rng stream belongs to this client alone and
/// advances only when the client itself draws from it.
struct ClientContext {
  ClientId id;
  std::vector<std::size_t> shard;  // indices into the task's training set
  energy::DeviceProfile device;
  Rng rng;

  static ClientContext make(ClientId id, std::vector<std::size_t> shard, energy::DeviceProfile device,
                            std::uint64_t global_seed);
};

struct ScoredBlock {
  BlockId block;
  double score = 0.0;

  bool operator==(const ScoredBlock&) const = default;
};

/// Everything a client uploads for one round.
struct ClientReport {
  ClientId client;
  NetId net;
  /// Rows of the training set used for scoring, in draw order.
  std::vector<std::size_t> batch;
  /// One entry per alive block of the network's pool, ascending block id.
  std::vector<ScoredBlock> scores;
  std::vector<BlockId> selected;
  bool explored = false;
  double epsilon = 0.0;
  energy::Workload workload;
  energy::Plan plan;
  std::uint64_t block_evaluations = 0;

  /// Score of `block`; throws IndexError if the block was not scored.
  double score_of(BlockId block) const;

  bool operator==(const ClientReport&) const;
};

struct SelectOptions {
  int batch_size = 64;
  double rel_tol = 0.0;
  /// Bypasses the energy chooser and runs at this ladder index.
  std::optional<std::size_t> fixed_level;
};

/// With probability 1 - epsilon the k highest scores (ties to the lower block
/// id), otherwise k blocks drawn uniformly without replacement. A single coin
/// decides the branch. Returns the selection (ascending id when exploring,
/// descending score when exploiting) and whether the random branch was taken.
std::pair<std::vector<BlockId>, bool> epsilon_greedy_select(std::span<const ScoredBlock> scores,
                                                            double epsilon, int k, Rng& rng);

/// The k best entries of `scores`, best first, ties to the lower block id.
std::vector<BlockId> top_k(std::span<const ScoredBlock> scores, int k);

/// `batch_size` shard indices: without replacement when the shard is large
/// enough, with replacement otherwise.
std::vector<std::size_t> sample_batch(std::span<const std::size_t> shard, int batch_size, Rng& rng);

/// One round of local block selection against `net`'s pool.
ClientReport local_select(ClientContext& ctx, const zoo::ModelZoo& zoo, const data::Dataset& train,
                          const stitch::StitchedNetwork& net, double epsilon, int k, double deadline,
                          const SelectOptions& options = {});

}  // namespace fedstitch::client
