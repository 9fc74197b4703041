// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/model_zoo.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "fedstitch/errors.hpp"

namespace fedstitch::zoo {

namespace {

std::atomic<std::uint64_t> g_block_evaluations{0};
thread_local std::uint64_t t_block_evaluations = 0;

void count_evaluation() {
  g_block_evaluations.fetch_add(1, std::memory_order_relaxed);
  ++t_block_evaluations;
}

Matrix apply_layer(const Layer& layer, const Matrix& x) {
  Matrix out = x * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::Relu) {
    out = out.cwiseMax(0.0);
  }
  return out;
}

Matrix apply_layers(std::span<const Layer> layers, const Matrix& x) {
  Matrix out = x;
  for (const Layer& layer : layers) {
    out = apply_layer(layer, out);
  }
  return out;
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = normal(rng);
    }
  }
  return m;
}

Vector uniform_vector(Eigen::Index n, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> uni(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = uni(rng);
  }
  return v;
}

// Ridge solution of [x 1] [W^T; b^T] ~= t, returned as a layer.
Layer ridge_layer(const Matrix& x, const Matrix& t, double ridge, Activation act) {
  const Eigen::Index n = x.rows();
  const Eigen::Index f = x.cols() + 1;
  Matrix design = Matrix::Zero(n + f, f);
  design.topLeftCorner(n, f - 1) = x;
  design.block(0, f - 1, n, 1).setOnes();
  design.bottomRows(f) = std::sqrt(ridge * static_cast<double>(n)) * Matrix::Identity(f, f);
  Matrix targets = Matrix::Zero(n + f, t.cols());
  targets.topRows(n) = t;
  const Matrix coef = numerics::fit_adapter(design, targets);  // t.cols() x f
  return Layer{coef.leftCols(f - 1), coef.col(f - 1), act};
}

// Layer 1 is a random ReLU projection of the input. Each later hidden layer
// is fit in closed form to move the current activation a fixed fraction of
// the way toward a model-specific class embedding, plus random mixing of
// relative size 1 - residual. The share of non-class variation left after
// layer l falls linearly in l, reaching about `1 - focus` at the last hidden
// layer.
std::vector<Layer> hidden_layers(const ModelSpec& spec, const Matrix& sample, std::span<const int> labels,
                                 int classes, int depth, Rng& rng) {
  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(depth));
  const int w = spec.width;
  const auto input_dim = static_cast<int>(sample.cols());
  layers.push_back(Layer{gaussian(w, input_dim, std::sqrt(2.0 / input_dim), rng),
                         uniform_vector(w, 0.0, 0.5, rng), Activation::Relu});
  Matrix h = apply_layer(layers.back(), sample);
  const double scale = std::sqrt(h.squaredNorm() / static_cast<double>(h.size()));
  const Matrix embedding = gaussian(classes, w, scale, rng).cwiseAbs();
  const double mix = (1.0 - spec.residual) * std::sqrt(1.0 / w);
  for (int l = 2; l < depth; ++l) {
    // Remaining non-class share falls linearly from 1 to 1 - focus.
    const double before = 1.0 - spec.focus * (l - 2) / (depth - 2);
    const double after = 1.0 - spec.focus * (l - 1) / (depth - 2);
    const double step = 1.0 - after / before;
    Matrix target = h;
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      target.row(r) += step * (embedding.row(labels[static_cast<std::size_t>(r)]) - h.row(r));
    }
    Layer layer = ridge_layer(h, target, 1e-3, Activation::Relu);
    layer.weight += gaussian(w, w, mix, rng);
    layers.push_back(std::move(layer));
    h = apply_layer(layers.back(), h);
  }
  return layers;
}

}  // namespace

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Starting:
      return "starting";
    case BlockKind::Intermediate:
      return "intermediate";
    case BlockKind::Terminating:
      return "terminating";
  }
  return "?";
}

const char* to_string(Activation act) { return act == Activation::Relu ? "relu" : "identity"; }

PretrainedModel split_model(ModelId model_id, std::string name, std::vector<Layer> layers,
                            std::span<const LayerSpan> split_spec, int num_classes,
                            std::uint32_t first_block_id) {
  const int depth = static_cast<int>(layers.size());
  if (depth == 0) {
    throw SpecError("split_model: model has no layers");
  }
  if (split_spec.size() < 2) {
    throw SpecError("split_model: need at least a starting and a terminating block");
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in_dim() != layers[i - 1].out_dim()) {
      throw SpecError("split_model: layer " + std::to_string(i + 1) + " input does not match layer " +
                      std::to_string(i) + " output");
    }
  }
  for (const Layer& layer : layers) {
    if (layer.bias.size() != layer.out_dim()) {
      throw SpecError("split_model: bias length does not match layer output");
    }
  }
  if (layers.back().out_dim() != num_classes) {
    throw SpecError("split_model: final layer must emit num_classes logits");
  }
  if (layers.back().activation != Activation::Identity) {
    throw SpecError("split_model: classifier layer must use the identity activation");
  }

  int expected = 1;
  for (const auto& [start, end] : split_spec) {
    if (start != expected) {
      throw SpecError("split_model: span starting at layer " + std::to_string(start) +
                      " leaves a gap or overlap (expected " + std::to_string(expected) + ")");
    }
    if (end < start) {
      throw SpecError("split_model: empty span [" + std::to_string(start) + ", " + std::to_string(end) + "]");
    }
    expected = end + 1;
  }
  if (expected != depth + 1) {
    throw SpecError("split_model: spans cover layers 1.." + std::to_string(expected - 1) + " of " +
                    std::to_string(depth));
  }

  PretrainedModel model;
  model.id = model_id;
  model.name = std::move(name);
  model.input_dim = static_cast<int>(layers.front().in_dim());
  model.num_classes = num_classes;
  const std::size_t count = split_spec.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto [start, end] = split_spec[i];
    auto block = std::make_shared<Block>();
    block->id = BlockId(first_block_id + static_cast<std::uint32_t>(i));
    block->source_model = model_id;
    block->layer_start = start;
    block->layer_end = end;
    block->position = static_cast<int>(i) + 1;
    block->kind = i == 0 ? BlockKind::Starting
                         : (i + 1 == count ? BlockKind::Terminating : BlockKind::Intermediate);
    for (int l = start; l <= end; ++l) {
      block->layers.push_back(std::move(layers[static_cast<std::size_t>(l - 1)]));
    }
    block->in_dim = static_cast<int>(block->layers.front().in_dim());
    block->out_dim = static_cast<int>(block->layers.back().out_dim());
    model.blocks.push_back(std::move(block));
  }
  return model;
}

std::vector<LayerSpan> uniform_split(int depth, int layers_per_block) {
  if (layers_per_block < 1 || depth < 1) {
    throw SpecError("uniform_split: depth and layers_per_block must be positive");
  }
  std::vector<LayerSpan> spans;
  for (int start = 1; start <= depth; start += layers_per_block) {
    spans.emplace_back(start, std::min(depth, start + layers_per_block - 1));
  }
  return spans;
}

Matrix block_forward(const Block& block, const Matrix& x) {
  return block_forward_partial(block, x, static_cast<int>(block.layers.size()));
}

Matrix block_forward_partial(const Block& block, const Matrix& x, int layer_count) {
  if (x.cols() != block.in_dim) {
    throw ShapeError("block_forward: block " + std::to_string(block.id.value) + " expects " +
                     std::to_string(block.in_dim) + " features, got " + std::to_string(x.cols()));
  }
  if (layer_count < 1 || layer_count > static_cast<int>(block.layers.size())) {
    throw IndexError("block_forward: layer count out of range");
  }
  count_evaluation();
  return apply_layers(std::span<const Layer>(block.layers).first(static_cast<std::size_t>(layer_count)), x);
}

Matrix model_forward_to_layer(const PretrainedModel& model, int layer, const Matrix& x) {
  if (layer < 1 || layer > model.depth()) {
    throw IndexError("model_forward_to_layer: layer " + std::to_string(layer) + " outside 1.." +
                     std::to_string(model.depth()));
  }
  if (x.cols() != model.input_dim) {
    throw ShapeError("model_forward_to_layer: model expects " + std::to_string(model.input_dim) +
                     " features, got " + std::to_string(x.cols()));
  }
  Matrix out = x;
  for (const BlockRef& block : model.blocks) {
    if (block->layer_start > layer) {
      break;
    }
    if (block->layer_end <= layer) {
      out = block_forward(*block, out);
    } else {
      out = block_forward_partial(*block, out, layer - block->layer_start + 1);
    }
  }
  return out;
}

std::uint64_t block_evaluations() { return g_block_evaluations.load(std::memory_order_relaxed); }
std::uint64_t thread_block_evaluations() { return t_block_evaluations; }

World make_world(const WorldConfig& cfg, std::uint64_t seed) {
  if (cfg.num_classes < 2) {
    throw SpecError("world: num_classes must be at least 2");
  }
  if (cfg.input_dim < 1) {
    throw SpecError("world: input_dim must be positive");
  }
  Rng rng = make_rng(seed, "world");
  return World{cfg, gaussian(cfg.num_classes, cfg.input_dim, cfg.prototype_scale, rng)};
}

Distribution shifted_distribution(const World& world, double shift, double noise, Rng& rng) {
  Distribution dist;
  dist.class_means = world.prototypes +
                     gaussian(world.prototypes.rows(), world.prototypes.cols(), shift, rng);
  dist.noise = noise;
  return dist;
}

std::pair<Matrix, std::vector<int>> sample_distribution(const Distribution& dist, int per_class,
                                                        Rng& rng) {
  const auto classes = dist.class_means.rows();
  const auto dim = dist.class_means.cols();
  Matrix x(classes * per_class, dim);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(x.rows()));
  std::normal_distribution<double> normal(0.0, dist.noise);
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < classes; ++c) {
    for (int s = 0; s < per_class; ++s, ++row) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        x(row, d) = dist.class_means(c, d) + normal(rng);
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  return {std::move(x), std::move(labels)};
}

ZooConfig ZooConfig::desk_default() {
  ZooConfig cfg;
  cfg.models = {
      ModelSpec{"m0", 6, 1, 24, 0.92, 0.30, 1.0, 0.99},
      ModelSpec{"m1", 6, 1, 32, 0.95, 0.45, 1.0, 0.99},
      ModelSpec{"m2", 20, 1, 16, 0.97, 0.35, 1.0, 0.99},
      ModelSpec{"m3", 6, 1, 28, 0.90, 0.25, 1.0, 0.99},
      ModelSpec{"m4", 14, 1, 20, 0.96, 0.40, 1.0, 0.99},
  };
  return cfg;
}

const Block& ModelZoo::block(BlockId id) const { return *block_ref(id); }

const BlockRef& ModelZoo::block_ref(BlockId id) const {
  if (id.value >= blocks.size()) {
    throw IndexError("zoo: unknown block " + std::to_string(id.value));
  }
  return blocks[id.value];
}

const PretrainedModel& ModelZoo::model(ModelId id) const {
  if (id.value >= models.size()) {
    throw IndexError("zoo: unknown model " + std::to_string(id.value));
  }
  return models[id.value];
}

std::vector<BlockId> ModelZoo::starting_blocks() const {
  std::vector<BlockId> ids;
  for (const PretrainedModel& m : models) {
    ids.push_back(m.blocks.front()->id);
  }
  return ids;
}

ModelZoo generate_model_zoo(const ZooConfig& cfg, std::uint64_t seed) {
  if (cfg.models.empty()) {
    throw SpecError("zoo: no models configured");
  }
  ModelZoo zoo;
  zoo.world = make_world(cfg.world, seed);
  const int classes = cfg.world.num_classes;
  std::uint32_t next_block = 0;
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    const ModelSpec& spec = cfg.models[i];
    if (spec.width < 1 || spec.blocks < 2 || spec.layers_per_block < 1) {
      throw SpecError("zoo.models[" + std::to_string(i) + "]: width, blocks and layers_per_block must be positive (blocks >= 2)");
    }
    if (!(spec.focus >= 0.0 && spec.focus < 1.0)) {
      throw SpecError("zoo.models[" + std::to_string(i) + "]: focus must lie in [0, 1)");
    }
    if (spec.residual < 0.0 || spec.residual > 1.0) {
      throw SpecError("zoo.models[" + std::to_string(i) + "]: residual must lie in [0, 1]");
    }
    Rng rng = make_rng(seed, "zoo.model", i);
    const int depth = spec.blocks * spec.layers_per_block;
    Distribution dist = shifted_distribution(zoo.world, spec.shift, spec.noise, rng);
    auto [inputs, labels] = sample_distribution(dist, cfg.pretrain_per_class, rng);
    std::vector<Layer> layers = hidden_layers(spec, inputs, labels, classes, depth, rng);
    const Matrix features = apply_layers(layers, inputs);

    Matrix onehot = Matrix::Zero(features.rows(), classes);
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      onehot(r, labels[static_cast<std::size_t>(r)]) = 1.0;
    }
    layers.push_back(ridge_layer(features, onehot, cfg.ridge, Activation::Identity));

    const auto spans = uniform_split(depth, spec.layers_per_block);
    PretrainedModel model = split_model(ModelId(static_cast<std::uint32_t>(i)), spec.name, std::move(layers),
                                        spans, classes, next_block);
    next_block += static_cast<std::uint32_t>(model.blocks.size());
    for (const BlockRef& b : model.blocks) {
      zoo.blocks.push_back(b);
    }
    zoo.models.push_back(std::move(model));
    zoo.pretrain_distributions.push_back(std::move(dist));
  }
  return zoo;
}

double argmax_accuracy(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ShapeError("accuracy: logits and labels disagree on sample count");
  }
  if (labels.empty()) {
    throw DegenerateError("accuracy: empty test set");
  }
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) {
        best = c;
      }
    }
    if (best == labels[static_cast<std::size_t>(r)]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace fedstitch::zoo
