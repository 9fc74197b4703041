// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedstitch/ids.hpp"
#include "fedstitch/numerics.hpp"
#include "fedstitch/rng.hpp"

namespace fedstitch::zoo {

using numerics::Matrix;
using numerics::Vector;

enum class BlockKind { Starting, Intermediate, Terminating };
enum class Activation { Relu, Identity };

const char* to_string(BlockKind kind);
const char* to_string(Activation act);

/// One affine layer: y = act(x W^T + b), weight is out x in.
struct Layer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::Relu;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// A contiguous span of layers [layer_start, layer_end] (1-based, inclusive)
/// cut from a source model. Immutable once built.
struct Block {
  BlockId id;
  ModelId source_model;
  int layer_start = 1;
  int layer_end = 1;
  /// 1-based index of this block within its source model.
  int position = 1;
  BlockKind kind = BlockKind::Intermediate;
  int in_dim = 0;
  int out_dim = 0;
  std::vector<Layer> layers;
};

using BlockRef = std::shared_ptr<const Block>;

struct PretrainedModel {
  ModelId id;
  std::string name;
  int input_dim = 0;
  int num_classes = 0;
  std::vector<BlockRef> blocks;

  int depth() const { return blocks.empty() ? 0 : blocks.back()->layer_end; }
};

/// Contiguous 1-based inclusive layer span.
using LayerSpan = std::pair<int, int>;

/// Cuts `layers` into blocks along `split_spec`. Block ids are assigned
/// sequentially starting at `first_block_id`. Throws SpecError when the spans
/// do not partition 1..layers.size() in order, or when the shapes do not chain.
PretrainedModel split_model(ModelId model_id, std::string name, std::vector<Layer> layers,
                            std::span<const LayerSpan> split_spec, int num_classes,
                            std::uint32_t first_block_id);

/// Spec that puts `layers_per_block` consecutive layers into each block.
std::vector<LayerSpan> uniform_split(int depth, int layers_per_block);

// -- evaluation --------------------------------------------------------------

/// Applies every layer of `block`. Counts as one block evaluation.
Matrix block_forward(const Block& block, const Matrix& x);

/// Applies the first `layer_count` layers of `block`. Counts as one block evaluation.
Matrix block_forward_partial(const Block& block, const Matrix& x, int layer_count);

/// Activation after layer `layer` (1-based) of `model`.
Matrix model_forward_to_layer(const PretrainedModel& model, int layer, const Matrix& x);

/// Total block evaluations performed by this process.
std::uint64_t block_evaluations();
/// Block evaluations performed by the calling thread.
std::uint64_t thread_block_evaluations();

// -- synthetic zoo -------------------------------------------------------------

/// Shared generative world: class prototypes that every pre-training
/// distribution and downstream task perturbs.
struct WorldConfig {
  int input_dim = 32;
  int num_classes = 10;
  double prototype_scale = 1.0;
};

struct World {
  WorldConfig config;
  Matrix prototypes;  // num_classes x input_dim
};

World make_world(const WorldConfig& cfg, std::uint64_t seed);

/// Class-conditional Gaussian mixture around shifted prototypes.
struct Distribution {
  Matrix class_means;  // num_classes x input_dim
  double noise = 1.0;
};

/// Prototype means perturbed by N(0, shift^2) per coordinate.
Distribution shifted_distribution(const World& world, double shift, double noise, Rng& rng);

/// Draws `per_class` samples of every class; labels are sorted by class.
std::pair<Matrix, std::vector<int>> sample_distribution(const Distribution& dist, int per_class,
                                                        Rng& rng);

struct ModelSpec {
  std::string name;
  int blocks = 6;
  int layers_per_block = 1;
  int width = 24;
  /// 1 minus the relative size of the random mixing added to each hidden layer.
  double residual = 0.75;
  /// How far this model's pre-training distribution sits from the prototypes.
  double shift = 0.35;
  double noise = 1.0;
  /// How far the hidden layers pull activations toward a class embedding
  /// overall; 0 keeps only random mixing.
  double focus = 0.8;
};

struct ZooConfig {
  WorldConfig world;
  std::vector<ModelSpec> models;
  int pretrain_per_class = 200;
  double ridge = 1e-2;

  /// Five models with 6/6/20/6/14 blocks (52 blocks in total).
  static ZooConfig desk_default();
};

struct ModelZoo {
  World world;
  std::vector<PretrainedModel> models;
  std::vector<Distribution> pretrain_distributions;
  /// Indexed by BlockId::value.
  std::vector<BlockRef> blocks;

  const Block& block(BlockId id) const;
  const BlockRef& block_ref(BlockId id) const;
  const PretrainedModel& model(ModelId id) const;
  std::vector<BlockId> starting_blocks() const;
};

/// Builds a deterministic zoo: random ReLU layers per model and a terminating
/// classifier fit in closed form (ridge least squares) on samples of the
/// model's own pre-training distribution.
ModelZoo generate_model_zoo(const ZooConfig& cfg, std::uint64_t seed);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double argmax_accuracy(const Matrix& logits, std::span<const int> labels);

}  // namespace fedstitch::zoo
