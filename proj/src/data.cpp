// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/data.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "fedstitch/errors.hpp"

namespace fedstitch::data {

namespace {

constexpr int kMaxResamples = 10000;

using ClassIndex = std::vector<std::vector<std::size_t>>;

ClassIndex indices_by_class(const Dataset& dataset) {
  ClassIndex by_class(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }
  return by_class;
}

// One Dirichlet draw per class over `num_clients`; empty clients allowed.
std::vector<std::vector<std::size_t>> dirichlet_draw(const ClassIndex& by_class, std::size_t num_clients,
                                                     double alpha, Rng& rng) {
  std::vector<std::vector<std::size_t>> shards(num_clients);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> share(num_clients);
  for (const auto& class_indices : by_class) {
    std::vector<std::size_t> idx = class_indices;
    std::shuffle(idx.begin(), idx.end(), rng);
    double total = 0.0;
    for (double& s : share) {
      s = gamma(rng);
      total += s;
    }
    if (!(total > 0.0)) {
      // Every gamma draw underflowed (tiny alpha): give the class to one client.
      std::fill(share.begin(), share.end(), 0.0);
      share[std::uniform_int_distribution<std::size_t>(0, num_clients - 1)(rng)] = 1.0;
      total = 1.0;
    }
    const double m = static_cast<double>(idx.size());
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      cumulative += share[c] / total;
      std::size_t end = c + 1 == num_clients ? idx.size()
                                              : std::min(idx.size(), static_cast<std::size_t>(cumulative * m));
      end = std::max(end, begin);
      shards[c].insert(shards[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                       idx.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }
  for (auto& shard : shards) {
    std::sort(shard.begin(), shard.end());
  }
  return shards;
}

Partition dirichlet_over(const ClassIndex& by_class, std::size_t available, std::size_t num_clients,
                         double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0)) {
    throw SpecError("dirichlet_partition: alpha must be positive");
  }
  if (num_clients == 0) {
    throw SpecError("dirichlet_partition: need at least one client");
  }
  if (num_clients > available) {
    throw SpecError("dirichlet_partition: " + std::to_string(num_clients) + " clients exceed " +
                    std::to_string(available) + " samples");
  }
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    Rng rng = make_rng(seed, "dirichlet", static_cast<std::uint64_t>(attempt));
    auto shards = dirichlet_draw(by_class, num_clients, alpha, rng);
    const bool complete = std::none_of(shards.begin(), shards.end(), [](const auto& s) { return s.empty(); });
    if (complete) {
      return Partition{std::move(shards), alpha, attempt};
    }
  }
  throw SpecError("dirichlet_partition: could not give every client a sample after " +
                  std::to_string(kMaxResamples) + " draws");
}

}  // namespace

Matrix Dataset::rows(std::span<const std::size_t> indices) const {
  Matrix out(static_cast<Eigen::Index>(indices.size()), inputs.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size()) {
      throw IndexError("dataset: sample index " + std::to_string(indices[r]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(indices[r]));
  }
  return out;
}

std::vector<int> Dataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    out.push_back(labels.at(i));
  }
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> hist(static_cast<std::size_t>(num_classes), 0);
  for (int label : labels) {
    ++hist[static_cast<std::size_t>(label)];
  }
  return hist;
}

std::size_t Partition::total() const {
  std::size_t n = 0;
  for (const auto& s : shards) {
    n += s.size();
  }
  return n;
}

Task generate_task(const TaskConfig& cfg, std::uint64_t seed) {
  if (cfg.world.num_classes < 2) {
    throw SpecError("task: num_classes must be at least 2");
  }
  if (cfg.train_samples < cfg.world.num_classes || cfg.test_samples < cfg.world.num_classes) {
    throw SpecError("task: every class needs at least one train and one test sample");
  }
  const zoo::World world = zoo::make_world(cfg.world, seed);
  Rng rng = make_rng(seed, "task");
  const zoo::Distribution dist = zoo::shifted_distribution(world, cfg.shift, cfg.noise, rng);

  auto draw = [&](int n) {
    const int classes = cfg.world.num_classes;
    const int base = n / classes;
    const int extra = n % classes;
    auto [x, y] = zoo::sample_distribution(dist, base + (extra > 0 ? 1 : 0), rng);
    const int per_class = base + (extra > 0 ? 1 : 0);
    std::vector<std::size_t> order;
    order.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < classes; ++c) {
      const int take = base + (c < extra ? 1 : 0);
      for (int s = 0; s < take; ++s) {
        order.push_back(static_cast<std::size_t>(c * per_class + s));
      }
    }
    std::shuffle(order.begin(), order.end(), rng);
    Dataset ds;
    ds.num_classes = classes;
    ds.inputs.resize(n, x.cols());
    ds.labels.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
      ds.inputs.row(r) = x.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]));
      ds.labels.push_back(y[order[static_cast<std::size_t>(r)]]);
    }
    return ds;
  };
  Task task;
  task.train = draw(cfg.train_samples);
  task.test = draw(cfg.test_samples);
  return task;
}

Partition dirichlet_partition(const Dataset& dataset, std::size_t num_clients, double alpha,
                              std::uint64_t seed) {
  return dirichlet_over(indices_by_class(dataset), dataset.size(), num_clients, alpha, seed);
}

Partition dirichlet_partition_with_balanced(const Dataset& dataset, std::size_t num_clients,
                                            double alpha, std::size_t balanced_clients,
                                            std::size_t per_class, std::uint64_t seed) {
  if (balanced_clients == 0) {
    return dirichlet_partition(dataset, num_clients, alpha, seed);
  }
  if (balanced_clients >= num_clients) {
    throw SpecError("partition: balanced clients must leave at least one Dirichlet client");
  }
  if (per_class == 0) {
    throw SpecError("partition: balanced clients need at least one sample per class");
  }
  ClassIndex by_class = indices_by_class(dataset);
  Rng rng = make_rng(seed, "balanced");
  std::vector<std::vector<std::size_t>> planted(balanced_clients);
  std::size_t remaining = 0;
  for (auto& idx : by_class) {
    if (idx.size() < balanced_clients * per_class) {
      throw SpecError("partition: not enough samples of a class for the balanced clients");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t b = 0; b < balanced_clients; ++b) {
      auto first = idx.begin() + static_cast<std::ptrdiff_t>(b * per_class);
      planted[b].insert(planted[b].end(), first, first + static_cast<std::ptrdiff_t>(per_class));
    }
    idx.erase(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(balanced_clients * per_class));
    std::sort(idx.begin(), idx.end());
    remaining += idx.size();
  }
  Partition rest = dirichlet_over(by_class, remaining, num_clients - balanced_clients, alpha, seed);
  for (auto& shard : planted) {
    std::sort(shard.begin(), shard.end());
  }
  planted.insert(planted.end(), std::make_move_iterator(rest.shards.begin()),
                 std::make_move_iterator(rest.shards.end()));
  return Partition{std::move(planted), alpha, rest.resamples};
}

Partition class_count_partition(const Dataset& dataset, std::size_t num_clients, int classes_per_client,
                                std::uint64_t seed) {
  if (classes_per_client < 1 || classes_per_client > dataset.num_classes) {
    throw SpecError("partition: classes_per_client must lie in [1, num_classes]");
  }
  if (num_clients == 0 || num_clients > dataset.size()) {
    throw SpecError("partition: invalid client count");
  }
  Rng rng = make_rng(seed, "class_count");
  const auto classes = static_cast<std::size_t>(dataset.num_classes);
  std::vector<std::vector<std::size_t>> holders(classes);
  std::vector<std::size_t> all(classes);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t c = 0; c < num_clients; ++c) {
    std::shuffle(all.begin(), all.end(), rng);
    for (int k = 0; k < classes_per_client; ++k) {
      holders[all[static_cast<std::size_t>(k)]].push_back(c);
    }
  }
  ClassIndex by_class = indices_by_class(dataset);
  std::vector<std::vector<std::size_t>> shards(num_clients);
  for (std::size_t cls = 0; cls < classes; ++cls) {
    auto& idx = by_class[cls];
    const auto& who = holders[cls];
    if (who.empty()) {
      continue;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      shards[who[i % who.size()]].push_back(idx[i]);
    }
  }
  for (auto& shard : shards) {
    if (shard.empty()) {
      throw SpecError("partition: a client received no samples; use fewer clients or more data");
    }
    std::sort(shard.begin(), shard.end());
  }
  return Partition{std::move(shards), 0.0, 0};
}

void write_dataset(std::ostream& os, const Dataset& dataset) {
  os << "index,label";
  for (Eigen::Index d = 0; d < dataset.inputs.cols(); ++d) {
    os << ",x" << d;
  }
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    os << i << ',' << dataset.labels[i];
    for (Eigen::Index d = 0; d < dataset.inputs.cols(); ++d) {
      os << ',' << dataset.inputs(static_cast<Eigen::Index>(i), d);
    }
    os << '\n';
  }
  os.precision(old_precision);
}

void write_partition(std::ostream& os, const Partition& partition) {
  os << "client,index\n";
  for (std::size_t c = 0; c < partition.shards.size(); ++c) {
    for (std::size_t i : partition.shards[c]) {
      os << c << ',' << i << '\n';
    }
  }
}

}  // namespace fedstitch::data
