// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fedstitch/ids.hpp"
#include "fedstitch/model_zoo.hpp"

namespace fedstitch::stitch {

using numerics::Matrix;

/// Candidate blocks available to one stitched network. Every zoo block has an
/// entry; pruned blocks are tombstoned rather than erased so pool history stays
/// observable.
class BlockPool {
 public:
  struct Entry {
    BlockId id;
    ModelId model;
    int layer_start = 1;
    bool alive = false;

    bool operator==(const Entry&) const = default;
  };

  BlockPool() = default;

  /// All non-starting blocks alive; starting blocks only open a network.
  static BlockPool initial(const zoo::ModelZoo& zoo);
  /// Every block alive.
  static BlockPool all(const zoo::ModelZoo& zoo);

  bool alive(BlockId id) const;
  std::size_t size() const { return alive_count_; }
  std::size_t capacity() const { return entries_.size(); }
  std::vector<BlockId> alive_ids() const;
  const std::vector<Entry>& entries() const { return entries_; }

  void tombstone(BlockId id);

  bool operator==(const BlockPool&) const = default;

 private:
  std::vector<Entry> entries_;
  std::size_t alive_count_ = 0;
};

enum class Status { Growing, Finished };
enum class FinishReason { None, TerminatingPicked, MaxDepth };

const char* to_string(FinishReason reason);

struct Segment {
  /// Absent only for the opening (starting) block.
  std::optional<Matrix> adapter;
  zoo::BlockRef block;
};

/// Chain of (adapter, block) segments. Treated as an immutable value:
/// stitch_append returns a new network and leaves its input untouched.
struct StitchedNetwork {
  NetId id;
  std::optional<NetId> parent;
  std::vector<Segment> segments;
  Status status = Status::Growing;
  FinishReason reason = FinishReason::None;
  BlockPool pool;
  int max_depth = 10;

  int depth() const { return static_cast<int>(segments.size()); }
  bool growing() const { return status == Status::Growing; }
  bool is_classifier() const { return reason == FinishReason::TerminatingPicked; }
  int input_dim() const;
  std::vector<BlockId> block_ids() const;
};

/// Opening network holding only `starting` block.
StitchedNetwork make_root(const zoo::ModelZoo& zoo, BlockId starting, NetId id, BlockPool pool,
                          int max_depth);

/// Adapter-then-block per segment; returns the last block's activation.
Matrix network_forward(const StitchedNetwork& net, const Matrix& x);

/// Source-model activation entering `block` (raw input for a starting block).
Matrix native_input(const zoo::ModelZoo& zoo, const zoo::Block& block, const Matrix& x);

/// Appends `block` behind `net`, fitting its adapter on `calib_batch` so the
/// network's output maps onto the block's native input. The child's status
/// flips to Finished when the block terminates or the depth limit is reached.
StitchedNetwork stitch_append(const zoo::ModelZoo& zoo, const StitchedNetwork& net, BlockId block,
                              const Matrix& calib_batch, NetId child_id, double rel_tol = 0.0);

/// CKA between the candidate network's output on `batch` and the block's
/// source-model activation at its last layer. Degenerate CKA scores 0.
/// Performs exactly depth + 1 + block.position block evaluations.
double score_block(const zoo::ModelZoo& zoo, const StitchedNetwork& net, BlockId block,
                   const Matrix& batch, double rel_tol = 0.0);

/// Scores many blocks against one (network, batch) pair. Each score runs the
/// same forward passes as score_block, so evaluation counts are identical;
/// only the pseudoinverse of the network output, which does not depend on the
/// candidate block, is factored once and reused. Scores are bitwise equal to
/// score_block's.
class BatchScorer {
 public:
  BatchScorer(const zoo::ModelZoo& zoo, const StitchedNetwork& net, const Matrix& batch,
              double rel_tol = 0.0);

  double score(BlockId block);

 private:
  const zoo::ModelZoo& zoo_;
  const StitchedNetwork& net_;
  const Matrix& batch_;
  double rel_tol_;
  std::optional<Matrix> output_pinv_;
};

/// Top-1 accuracy of a network finished with a terminating block.
double evaluate_accuracy(const StitchedNetwork& net, const Matrix& test_inputs,
                         std::span<const int> test_labels);

}  // namespace fedstitch::stitch
