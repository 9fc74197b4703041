// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/stitcher.hpp"

#include <string>

#include "fedstitch/errors.hpp"

namespace fedstitch::stitch {

namespace {

BlockPool::Entry entry_for(const zoo::Block& b, bool alive) {
  return BlockPool::Entry{b.id, b.source_model, b.layer_start, alive};
}

void require_growing_and_alive(const StitchedNetwork& net, BlockId block, const char* what) {
  if (!net.growing()) {
    throw StateError(std::string(what) + ": network " + std::to_string(net.id.value) + " is finished");
  }
  if (!net.pool.alive(block)) {
    throw PoolError(std::string(what) + ": block " + std::to_string(block.value) +
                    " is not alive in the pool of network " + std::to_string(net.id.value));
  }
}

}  // namespace

BlockPool BlockPool::initial(const zoo::ModelZoo& zoo) {
  BlockPool pool;
  for (const zoo::BlockRef& b : zoo.blocks) {
    const bool alive = b->kind != zoo::BlockKind::Starting;
    pool.entries_.push_back(entry_for(*b, alive));
    pool.alive_count_ += alive ? 1 : 0;
  }
  return pool;
}

BlockPool BlockPool::all(const zoo::ModelZoo& zoo) {
  BlockPool pool;
  for (const zoo::BlockRef& b : zoo.blocks) {
    pool.entries_.push_back(entry_for(*b, true));
  }
  pool.alive_count_ = pool.entries_.size();
  return pool;
}

bool BlockPool::alive(BlockId id) const {
  return id.value < entries_.size() && entries_[id.value].alive;
}

std::vector<BlockId> BlockPool::alive_ids() const {
  std::vector<BlockId> ids;
  ids.reserve(alive_count_);
  for (const Entry& e : entries_) {
    if (e.alive) {
      ids.push_back(e.id);
    }
  }
  return ids;
}

void BlockPool::tombstone(BlockId id) {
  if (alive(id)) {
    entries_[id.value].alive = false;
    --alive_count_;
  }
}

const char* to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::None:
      return "growing";
    case FinishReason::TerminatingPicked:
      return "terminating_picked";
    case FinishReason::MaxDepth:
      return "max_depth";
  }
  return "?";
}

int StitchedNetwork::input_dim() const {
  return segments.empty() ? 0 : segments.front().block->in_dim;
}

std::vector<BlockId> StitchedNetwork::block_ids() const {
  std::vector<BlockId> ids;
  ids.reserve(segments.size());
  for (const Segment& s : segments) {
    ids.push_back(s.block->id);
  }
  return ids;
}

StitchedNetwork make_root(const zoo::ModelZoo& zoo, BlockId starting, NetId id, BlockPool pool,
                          int max_depth) {
  const zoo::BlockRef& block = zoo.block_ref(starting);
  if (block->kind != zoo::BlockKind::Starting) {
    throw StateError("make_root: block " + std::to_string(starting.value) + " is not a starting block");
  }
  if (max_depth < 2) {
    throw SpecError("make_root: max_depth must be at least 2");
  }
  StitchedNetwork net;
  net.id = id;
  net.segments.push_back(Segment{std::nullopt, block});
  net.pool = std::move(pool);
  net.max_depth = max_depth;
  return net;
}

Matrix network_forward(const StitchedNetwork& net, const Matrix& x) {
  if (net.segments.empty()) {
    throw StateError("network_forward: empty network");
  }
  if (x.cols() != net.input_dim()) {
    throw ShapeError("network_forward: network expects " + std::to_string(net.input_dim()) +
                     " features, got " + std::to_string(x.cols()));
  }
  Matrix out = zoo::block_forward(*net.segments.front().block, x);
  for (std::size_t i = 1; i < net.segments.size(); ++i) {
    const Segment& seg = net.segments[i];
    if (!seg.adapter) {
      throw StateError("network_forward: segment " + std::to_string(i) + " has no adapter");
    }
    out = zoo::block_forward(*seg.block, numerics::apply_adapter(*seg.adapter, out));
  }
  return out;
}

Matrix native_input(const zoo::ModelZoo& zoo, const zoo::Block& block, const Matrix& x) {
  if (block.layer_start == 1) {
    return x;
  }
  return zoo::model_forward_to_layer(zoo.model(block.source_model), block.layer_start - 1, x);
}

StitchedNetwork stitch_append(const zoo::ModelZoo& zoo, const StitchedNetwork& net, BlockId block,
                              const Matrix& calib_batch, NetId child_id, double rel_tol) {
  require_growing_and_alive(net, block, "stitch_append");
  const zoo::BlockRef& ref = zoo.block_ref(block);
  const Matrix x_out = network_forward(net, calib_batch);
  const Matrix y_native = native_input(zoo, *ref, calib_batch);

  StitchedNetwork child;
  child.id = child_id;
  child.parent = net.id;
  child.segments = net.segments;
  child.segments.push_back(Segment{numerics::fit_adapter(x_out, y_native, rel_tol), ref});
  child.pool = net.pool;
  child.max_depth = net.max_depth;
  if (ref->kind == zoo::BlockKind::Terminating) {
    child.status = Status::Finished;
    child.reason = FinishReason::TerminatingPicked;
  } else if (child.depth() >= child.max_depth) {
    child.status = Status::Finished;
    child.reason = FinishReason::MaxDepth;
  }
  return child;
}

double score_block(const zoo::ModelZoo& zoo, const StitchedNetwork& net, BlockId block,
                   const Matrix& batch, double rel_tol) {
  return BatchScorer(zoo, net, batch, rel_tol).score(block);
}

BatchScorer::BatchScorer(const zoo::ModelZoo& zoo, const StitchedNetwork& net, const Matrix& batch,
                         double rel_tol)
    : zoo_(zoo), net_(net), batch_(batch), rel_tol_(rel_tol) {}

double BatchScorer::score(BlockId block) {
  require_growing_and_alive(net_, block, "score_block");
  const zoo::Block& target = zoo_.block(block);
  const zoo::PretrainedModel& source = zoo_.model(target.source_model);

  // Reference pass through the source model up to the block's last layer; the
  // activation entering the block is captured on the way for the adapter fit.
  Matrix native_in = batch_;
  for (const zoo::BlockRef& b : source.blocks) {
    if (b->id == block) {
      break;
    }
    native_in = zoo::block_forward(*b, native_in);
  }
  const Matrix native_out = zoo::block_forward(target, native_in);

  const Matrix x_out = network_forward(net_, batch_);
  if (!output_pinv_) {
    if (x_out.rows() < 2) {
      throw DegenerateError("score_block: need at least 2 batch rows");
    }
    output_pinv_ = numerics::pseudoinverse(
        x_out, rel_tol_ > 0.0 ? rel_tol_ : numerics::default_rel_tol(x_out));
  }
  const Matrix adapter = numerics::adapter_from_pinv(*output_pinv_, native_in);
  const Matrix candidate = zoo::block_forward(target, numerics::apply_adapter(adapter, x_out));
  try {
    return numerics::cka(candidate, native_out);
  } catch (const DegenerateError&) {
    return 0.0;
  }
}

double evaluate_accuracy(const StitchedNetwork& net, const Matrix& test_inputs,
                         std::span<const int> test_labels) {
  if (net.status != Status::Finished || !net.is_classifier()) {
    throw StateError("evaluate_accuracy: network " + std::to_string(net.id.value) +
                     " does not end in a terminating block");
  }
  return zoo::argmax_accuracy(network_forward(net, test_inputs), test_labels);
}

}  // namespace fedstitch::stitch
