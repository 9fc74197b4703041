// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "fedstitch/config.hpp"
#include "fedstitch/model_zoo.hpp"

namespace fixture {

/// Three shallow models; quick to build and to score against.
inline fedstitch::zoo::ZooConfig small_zoo() {
  fedstitch::zoo::ZooConfig cfg;
  cfg.world.input_dim = 12;
  cfg.world.num_classes = 4;
  cfg.pretrain_per_class = 60;
  cfg.models = {
      fedstitch::zoo::ModelSpec{"a", 4, 1, 10, 0.9, 0.3, 1.0, 0.8},
      fedstitch::zoo::ModelSpec{"b", 5, 1, 8, 0.95, 0.4, 1.0, 0.8},
      fedstitch::zoo::ModelSpec{"c", 3, 2, 12, 0.9, 0.2, 1.0, 0.5},
  };
  return cfg;
}

/// A complete simulation small enough to run many times per test.
inline fedstitch::SimConfig small_sim(std::uint64_t seed = 3) {
  fedstitch::SimConfig cfg;
  cfg.seed = seed;
  cfg.zoo = small_zoo();
  cfg.task.world = cfg.zoo.world;
  cfg.task.train_samples = 800;
  cfg.task.test_samples = 200;
  cfg.federation.num_clients = 12;
  cfg.federation.participants_per_round = 4;
  cfg.protocol.cka_batch = 24;
  cfg.protocol.rounds_per_step = 2;
  cfg.protocol.max_depth = 5;
  cfg.protocol.round_budget = 12;
  cfg.protocol.k = 2;
  return cfg;
}

}  // namespace fixture
