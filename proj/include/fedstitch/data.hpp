// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fedstitch/model_zoo.hpp"

namespace fedstitch::data {

using numerics::Matrix;

struct Dataset {
  Matrix inputs;  // n x input_dim
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Rows of `inputs` selected by `indices`, in that order.
  Matrix rows(std::span<const std::size_t> indices) const;
  std::vector<int> labels_of(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_histogram() const;
};

/// Downstream task drawn around the same world prototypes as the zoo's
/// pre-training distributions; `shift` controls how far it drifts from them.
struct TaskConfig {
  zoo::WorldConfig world;
  int train_samples = 6000;
  int test_samples = 2000;
  double shift = 0.3;
  double noise = 1.0;
};

struct Task {
  Dataset train;
  /// Held out for simulator-level evaluation only; never handed to clients.
  Dataset test;
};

/// Deterministic for a fixed seed. The seed must match the zoo's for the task
/// to share its world.
Task generate_task(const TaskConfig& cfg, std::uint64_t seed);

struct Partition {
  std::vector<std::vector<std::size_t>> shards;
  double concentration = 0.0;
  /// Number of redraws needed before every client was non-empty.
  int resamples = 0;

  std::size_t total() const;
};

/// For each class, client proportions are drawn from Dirichlet(alpha) and the
/// class's shuffled indices are cut at the cumulative proportions. A draw that
/// leaves a client empty is discarded and redrawn from the next seed.
Partition dirichlet_partition(const Dataset& dataset, std::size_t num_clients, double alpha,
                              std::uint64_t seed);

/// Clients [0, balanced_clients) receive `per_class` samples of every class;
/// the remaining samples are split among the other clients by Dirichlet(alpha).
Partition dirichlet_partition_with_balanced(const Dataset& dataset, std::size_t num_clients,
                                            double alpha, std::size_t balanced_clients,
                                            std::size_t per_class, std::uint64_t seed);

/// Each client holds `classes_per_client` distinct classes; each class's
/// samples are split evenly among the clients holding it.
Partition class_count_partition(const Dataset& dataset, std::size_t num_clients,
                                int classes_per_client, std::uint64_t seed);

/// Columnar text: header `index,label,x0,...` then one row per sample.
void write_dataset(std::ostream& os, const Dataset& dataset);
/// Columnar text: header `client,index` then one row per assignment.
void write_partition(std::ostream& os, const Partition& partition);

}  // namespace fedstitch::data
