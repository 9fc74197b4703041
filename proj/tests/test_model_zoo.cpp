// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <vector>

#include "fedstitch/errors.hpp"
#include "fedstitch/model_zoo.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace zoo = fedstitch::zoo;
using fedstitch::BlockId;
using fedstitch::ModelId;
using zoo::Matrix;

namespace {

std::vector<zoo::Layer> random_chain(std::vector<int> dims, std::mt19937_64& rng) {
  std::vector<zoo::Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers.push_back(zoo::Layer{oracle::gaussian(dims[i + 1], dims[i], rng),
                                oracle::gaussian(dims[i + 1], 1, rng).col(0),
                                last ? zoo::Activation::Identity : zoo::Activation::Relu});
  }
  return layers;
}

Matrix reference_forward(const std::vector<zoo::Layer>& layers, Matrix x) {
  for (const zoo::Layer& l : layers) {
    Matrix y = x * l.weight.transpose();
    y.rowwise() += l.bias.transpose();
    if (l.activation == zoo::Activation::Relu) {
      y = y.cwiseMax(0.0);
    }
    x = y;
  }
  return x;
}

}  // namespace

TEST_CASE("split_model cuts layers into typed, sequentially numbered blocks") {
  std::mt19937_64 rng(1);
  const auto layers = random_chain({5, 7, 7, 6, 3}, rng);
  const std::vector<zoo::LayerSpan> spans{{1, 1}, {2, 3}, {4, 4}};
  const zoo::PretrainedModel m = zoo::split_model(ModelId(2), "m", layers, spans, 3, 10);
  REQUIRE(m.blocks.size() == 3);
  CHECK(m.depth() == 4);
  CHECK(m.blocks[0]->kind == zoo::BlockKind::Starting);
  CHECK(m.blocks[1]->kind == zoo::BlockKind::Intermediate);
  CHECK(m.blocks[2]->kind == zoo::BlockKind::Terminating);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m.blocks[i]->id == BlockId(10 + static_cast<std::uint32_t>(i)));
    CHECK(m.blocks[i]->position == static_cast<int>(i) + 1);
    CHECK(m.blocks[i]->source_model == ModelId(2));
  }
  CHECK(m.blocks[1]->layer_start == 2);
  CHECK(m.blocks[1]->layer_end == 3);
  CHECK(m.blocks[1]->in_dim == 7);
  CHECK(m.blocks[1]->out_dim == 6);

  const Matrix x = oracle::gaussian(9, 5, rng);
  Matrix chained = x;
  for (const auto& b : m.blocks) {
    chained = zoo::block_forward(*b, chained);
  }
  CHECK((chained - reference_forward(layers, x)).norm() < 1e-12);
  CHECK((zoo::model_forward_to_layer(m, 3, x) -
         reference_forward({layers.begin(), layers.begin() + 3}, x))
            .norm() < 1e-12);
}

TEST_CASE("split_model rejects malformed specifications") {
  std::mt19937_64 rng(2);
  const auto layers = random_chain({5, 7, 6, 3}, rng);
  using Spans = std::vector<zoo::LayerSpan>;
  CHECK_THROWS_AS(zoo::split_model(ModelId(0), "m", layers, Spans{{1, 1}, {3, 3}}, 3, 0), fedstitch::SpecError);
  CHECK_THROWS_AS(zoo::split_model(ModelId(0), "m", layers, Spans{{1, 2}}, 3, 0), fedstitch::SpecError);
  CHECK_THROWS_AS(zoo::split_model(ModelId(0), "m", layers, Spans{{1, 1}, {2, 2}}, 3, 0), fedstitch::SpecError);
  CHECK_THROWS_AS(zoo::split_model(ModelId(0), "m", layers, Spans{{1, 1}, {2, 3}}, 4, 0), fedstitch::SpecError);
  auto broken = layers;
  broken[1].weight = oracle::gaussian(6, 4, rng);
  CHECK_THROWS_AS(zoo::split_model(ModelId(0), "m", broken, Spans{{1, 1}, {2, 3}}, 3, 0), fedstitch::SpecError);
  CHECK(zoo::uniform_split(6, 2) == Spans{{1, 2}, {3, 4}, {5, 6}});
  CHECK(zoo::uniform_split(5, 2) == Spans{{1, 2}, {3, 4}, {5, 5}});
}

TEST_CASE("block evaluations are counted once per block call") {
  std::mt19937_64 rng(3);
  const auto layers = random_chain({4, 5, 5, 2}, rng);
  const std::vector<zoo::LayerSpan> spans{{1, 1}, {2, 2}, {3, 3}};
  const zoo::PretrainedModel m = zoo::split_model(ModelId(0), "m", layers, spans, 2, 0);
  const Matrix x = oracle::gaussian(3, 4, rng);
  const auto before = zoo::thread_block_evaluations();
  zoo::block_forward(*m.blocks[0], x);
  zoo::block_forward_partial(*m.blocks[0], x, 1);
  CHECK(zoo::thread_block_evaluations() - before == 2);
  CHECK_THROWS_AS(zoo::block_forward(*m.blocks[1], x), fedstitch::ShapeError);
}

TEST_CASE("argmax_accuracy resolves ties to the lower class") {
  Matrix logits(3, 3);
  logits << 1, 1, 0,  //
      0, 2, 2,        //
      0, 0, 5;
  const std::vector<int> labels{0, 1, 2};
  CHECK(zoo::argmax_accuracy(logits, labels) == doctest::Approx(1.0));
  const std::vector<int> other{1, 2, 2};
  CHECK(zoo::argmax_accuracy(logits, other) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("generated zoo is deterministic and well formed") {
  const zoo::ZooConfig cfg = fixture::small_zoo();
  const zoo::ModelZoo a = zoo::generate_model_zoo(cfg, 5);
  const zoo::ModelZoo b = zoo::generate_model_zoo(cfg, 5);
  const zoo::ModelZoo c = zoo::generate_model_zoo(cfg, 6);
  REQUIRE(a.blocks.size() == 4 + 5 + 3);
  CHECK(a.starting_blocks().size() == 3);
  bool differs = false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    CHECK(a.blocks[i]->id == BlockId(static_cast<std::uint32_t>(i)));
    for (std::size_t l = 0; l < a.blocks[i]->layers.size(); ++l) {
      CHECK(a.blocks[i]->layers[l].weight == b.blocks[i]->layers[l].weight);
      differs = differs || a.blocks[i]->layers[l].weight != c.blocks[i]->layers[l].weight;
    }
  }
  CHECK(differs);
  CHECK(a.model(ModelId(2)).blocks.front()->layers.size() == 2);
  CHECK(a.model(ModelId(2)).depth() == 6);
  CHECK_THROWS_AS(a.block(BlockId(99)), fedstitch::IndexError);
}

TEST_CASE("desk zoo models classify their own distributions well above chance") {
  const zoo::ZooConfig cfg = zoo::ZooConfig::desk_default();
  const zoo::ModelZoo z = zoo::generate_model_zoo(cfg, 1);
  CHECK(z.blocks.size() == 52);
  for (std::size_t i = 0; i < z.models.size(); ++i) {
    fedstitch::Rng rng(100 + i);
    auto [x, y] = zoo::sample_distribution(z.pretrain_distributions[i], 100, rng);
    const Matrix logits = zoo::model_forward_to_layer(z.models[i], z.models[i].depth(), x);
    CHECK(zoo::argmax_accuracy(logits, y) > 0.5);
  }
}

TEST_CASE("zoo generation validates model specs") {
  zoo::ZooConfig cfg = fixture::small_zoo();
  cfg.models[0].focus = 1.0;
  CHECK_THROWS_AS(zoo::generate_model_zoo(cfg, 1), fedstitch::SpecError);
  cfg = fixture::small_zoo();
  cfg.models[1].blocks = 1;
  CHECK_THROWS_AS(zoo::generate_model_zoo(cfg, 1), fedstitch::SpecError);
  cfg.models.clear();
  CHECK_THROWS_AS(zoo::generate_model_zoo(cfg, 1), fedstitch::SpecError);
}
