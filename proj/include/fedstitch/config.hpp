// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedstitch/data.hpp"
#include "fedstitch/energy.hpp"
#include "fedstitch/fed_server.hpp"
#include "fedstitch/model_zoo.hpp"

namespace fedstitch {

enum class Mode { Full, FedAvgVoting, NoPrune, MaxFrequency, LocalOnly };

const char* to_string(Mode mode);
/// Throws ConfigError for unknown names.
Mode parse_mode(const std::string& name);
std::vector<Mode> all_modes();

enum class PartitionKind { Dirichlet, ClassCount };

struct FederationConfig {
  std::size_t num_clients = 100;
  int participants_per_round = 10;
  PartitionKind partition = PartitionKind::Dirichlet;
  double alpha = 1.0;
  int classes_per_client = 2;
  /// Clients 0..balanced_clients-1 receive every class.
  std::size_t balanced_clients = 0;
  std::size_t balanced_per_class = 10;
};

struct ProtocolConfig {
  int k = 3;
  int cka_batch = 64;
  int rounds_per_step = 5;
  int max_depth = 10;
  /// Macro-round budget; a macro-round expands candidates_per_step candidates.
  int round_budget = 200;
  int candidates_per_step = 1;
  /// Rows for a dedicated adapter-calibration batch; 0 reuses the scoring batch.
  int calib_rows = 0;
  /// Pseudoinverse truncation; 0 selects the size-scaled default.
  double rel_tol = 0.0;
};

struct DeadlineConfig {
  double mu = 0.5;
  double sigma = 1.0;
  double bootstrap_s = 5.0;
  double min_s = 1e-2;
};

struct DeviceClass {
  std::string name;
  /// Fraction of the population; shares are normalized over all classes.
  double share = 0.25;
  double nominal_ghz = 1.0;
  double p_nominal = 5.0;
  double p_idle = 1.0;
  double c_sn = 1e5;
  double c_pn = 1e5;
  /// Relative speeds of extra levels below nominal.
  std::vector<double> slow_speeds{0.55, 0.7, 0.85};

  energy::DeviceProfile profile() const;
};

struct SimConfig {
  std::uint64_t seed = 1;
  zoo::ZooConfig zoo = zoo::ZooConfig::desk_default();
  data::TaskConfig task;
  FederationConfig federation;
  ProtocolConfig protocol;
  server::AggregatorParams aggregator;
  DeadlineConfig deadline;
  std::vector<DeviceClass> devices = default_devices();
  Mode mode = Mode::Full;
  /// Threads scoring clients in parallel within a round; results never depend on it.
  int workers = 1;

  /// Four groups with 30/30/30/10% shares, fastest last.
  static std::vector<DeviceClass> default_devices();
  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

/// Strict JSON decoding: every key must be known, every value well-typed.
/// Missing keys keep their defaults.
SimConfig config_from_json(const std::string& text);
SimConfig load_config(const std::filesystem::path& path);
/// Every field, including defaults; config_from_json(config_to_json(c)) == c.
std::string config_to_json(const SimConfig& config);

}  // namespace fedstitch
