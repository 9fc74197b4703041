// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>

#include <json.hpp>

#include "fedstitch/errors.hpp"

namespace fedstitch {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed so that any
// leftover key can be reported with its full path.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    out = convert<T>(*v, field(key));
  }

  template <typename F>
  void section(const char* key, F&& body) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    Reader sub(*v, field(key));
    body(sub);
    sub.finish();
  }

  template <typename T, typename F>
  void list(const char* key, std::vector<T>& out, F&& body) {
    const json* v = take(key);
    if (v == nullptr) {
      return;
    }
    if (!v->is_array()) {
      throw ConfigError(field(key), "expected an array");
    }
    out.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      Reader item((*v)[i], field(key) + "[" + std::to_string(i) + "]");
      T value{};
      body(item, value);
      item.finish();
      out.push_back(std::move(value));
    }
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.contains(key)) {
        throw ConfigError(field(key.c_str()), "unknown key");
      }
    }
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json* take(const char* key) {
    used_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) {
        throw ConfigError(where, "expected a boolean");
      }
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {
        throw ConfigError(where, "expected an integer");
      }
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          throw ConfigError(where, "must be non-negative");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) {
        throw ConfigError(where, "expected a number");
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) {
        throw ConfigError(where, "expected a string");
      }
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
        throw ConfigError(where, "expected an array of numbers");
      }
    }
    return v.get<T>();
  }

  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

const char* to_string(PartitionKind kind) {
  return kind == PartitionKind::Dirichlet ? "dirichlet" : "class_count";
}

PartitionKind parse_partition(const std::string& name, const std::string& where) {
  if (name == "dirichlet") {
    return PartitionKind::Dirichlet;
  }
  if (name == "class_count") {
    return PartitionKind::ClassCount;
  }
  throw ConfigError(where, "unknown partition '" + name + "' (dirichlet, class_count)");
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Full:
      return "full";
    case Mode::FedAvgVoting:
      return "fedavg_voting";
    case Mode::NoPrune:
      return "no_prune";
    case Mode::MaxFrequency:
      return "max_frequency";
    case Mode::LocalOnly:
      return "local_only";
  }
  return "?";
}

std::vector<Mode> all_modes() {
  return {Mode::Full, Mode::FedAvgVoting, Mode::NoPrune, Mode::MaxFrequency, Mode::LocalOnly};
}

Mode parse_mode(const std::string& name) {
  for (Mode m : all_modes()) {
    if (name == to_string(m)) {
      return m;
    }
  }
  throw ConfigError("mode", "unknown mode '" + name + "'");
}

energy::DeviceProfile DeviceClass::profile() const {
  return energy::extended_profile(name, nominal_ghz * 1e9, slow_speeds, p_nominal, p_idle, c_sn, c_pn);
}

std::vector<DeviceClass> SimConfig::default_devices() {
  std::vector<DeviceClass> devices(4);
  const char* names[] = {"low", "mid", "high", "top"};
  const double shares[] = {0.3, 0.3, 0.3, 0.1};
  const double ghz[] = {0.6, 0.8, 1.0, 1.4};
  for (std::size_t i = 0; i < devices.size(); ++i) {
    devices[i].name = names[i];
    devices[i].share = shares[i];
    devices[i].nominal_ghz = ghz[i];
  }
  return devices;
}

void SimConfig::validate() const {
  const auto& f = federation;
  if (f.num_clients < 1) {
    throw ConfigError("federation.num_clients", "must be at least 1");
  }
  if (f.participants_per_round < 1 || static_cast<std::size_t>(f.participants_per_round) > f.num_clients) {
    throw ConfigError("federation.participants_per_round", "must lie in [1, num_clients]");
  }
  if (!(f.alpha > 0.0)) {
    throw ConfigError("federation.alpha", "must be positive");
  }
  if (f.balanced_clients >= f.num_clients && f.balanced_clients > 0) {
    throw ConfigError("federation.balanced_clients", "must leave at least one other client");
  }
  if (f.classes_per_client < 1 || f.classes_per_client > zoo.world.num_classes) {
    throw ConfigError("federation.classes_per_client", "must lie in [1, num_classes]");
  }
  if (protocol.k < 1) {
    throw ConfigError("protocol.k", "must be at least 1");
  }
  if (protocol.cka_batch < 2) {
    throw ConfigError("protocol.cka_batch", "must be at least 2");
  }
  if (protocol.rounds_per_step < 1) {
    throw ConfigError("protocol.rounds_per_step", "must be at least 1");
  }
  if (protocol.max_depth < 2) {
    throw ConfigError("protocol.max_depth", "must be at least 2");
  }
  if (protocol.round_budget < 1) {
    throw ConfigError("protocol.round_budget", "must be at least 1");
  }
  if (protocol.candidates_per_step < 1) {
    throw ConfigError("protocol.candidates_per_step", "must be at least 1");
  }
  if (protocol.calib_rows < 0 || protocol.calib_rows == 1) {
    throw ConfigError("protocol.calib_rows", "must be 0 or at least 2");
  }
  if (protocol.rel_tol < 0.0 || protocol.rel_tol >= 1.0) {
    throw ConfigError("protocol.rel_tol", "must lie in [0, 1)");
  }
  aggregator.validate();
  if (!(deadline.bootstrap_s > 0.0)) {
    throw ConfigError("deadline.bootstrap_s", "must be positive");
  }
  if (!(deadline.min_s > 0.0)) {
    throw ConfigError("deadline.min_s", "must be positive");
  }
  if (devices.empty()) {
    throw ConfigError("devices", "need at least one device class");
  }
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const std::string where = "devices[" + std::to_string(i) + "]";
    if (!(devices[i].share > 0.0)) {
      throw ConfigError(where + ".share", "must be positive");
    }
    try {
      (void)devices[i].profile();
    } catch (const SpecError& e) {
      throw ConfigError(where, e.what());
    }
  }
  if (workers < 1) {
    throw ConfigError("workers", "must be at least 1");
  }
  if (task.world.input_dim != zoo.world.input_dim || task.world.num_classes != zoo.world.num_classes ||
      task.world.prototype_scale != zoo.world.prototype_scale) {
    throw ConfigError("world", "task and zoo must share one world");
  }
}

SimConfig config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  SimConfig cfg;
  Reader r(root, "");
  try {
    r.get("seed", cfg.seed);
    r.section("world", [&](Reader& w) {
      w.get("input_dim", cfg.zoo.world.input_dim);
      w.get("num_classes", cfg.zoo.world.num_classes);
      w.get("prototype_scale", cfg.zoo.world.prototype_scale);
    });
    cfg.task.world = cfg.zoo.world;
    r.section("zoo", [&](Reader& z) {
      z.get("pretrain_per_class", cfg.zoo.pretrain_per_class);
      z.get("ridge", cfg.zoo.ridge);
      z.list("models", cfg.zoo.models, [](Reader& m, zoo::ModelSpec& spec) {
        m.get("name", spec.name);
        m.get("blocks", spec.blocks);
        m.get("layers_per_block", spec.layers_per_block);
        m.get("width", spec.width);
        m.get("residual", spec.residual);
        m.get("shift", spec.shift);
        m.get("noise", spec.noise);
        m.get("focus", spec.focus);
      });
    });
    r.section("task", [&](Reader& t) {
      t.get("train_samples", cfg.task.train_samples);
      t.get("test_samples", cfg.task.test_samples);
      t.get("shift", cfg.task.shift);
      t.get("noise", cfg.task.noise);
    });
    r.section("federation", [&](Reader& f) {
      auto& fed = cfg.federation;
      f.get("num_clients", fed.num_clients);
      f.get("participants_per_round", fed.participants_per_round);
      std::string partition = to_string(fed.partition);
      f.get("partition", partition);
      fed.partition = parse_partition(partition, f.field("partition"));
      f.get("alpha", fed.alpha);
      f.get("classes_per_client", fed.classes_per_client);
      f.get("balanced_clients", fed.balanced_clients);
      f.get("balanced_per_class", fed.balanced_per_class);
    });
    r.section("protocol", [&](Reader& p) {
      auto& pr = cfg.protocol;
      p.get("k", pr.k);
      p.get("cka_batch", pr.cka_batch);
      p.get("rounds_per_step", pr.rounds_per_step);
      p.get("max_depth", pr.max_depth);
      p.get("round_budget", pr.round_budget);
      p.get("candidates_per_step", pr.candidates_per_step);
      p.get("calib_rows", pr.calib_rows);
      p.get("rel_tol", pr.rel_tol);
    });
    r.section("aggregator", [&](Reader& a) {
      auto& ag = cfg.aggregator;
      a.get("epsilon0", ag.epsilon0);
      a.get("gamma", ag.gamma);
      a.get("alpha", ag.alpha);
      a.get("beta", ag.beta);
      a.get("theta", ag.theta);
    });
    cfg.aggregator.k = cfg.protocol.k;
    r.section("deadline", [&](Reader& d) {
      d.get("mu", cfg.deadline.mu);
      d.get("sigma", cfg.deadline.sigma);
      d.get("bootstrap_s", cfg.deadline.bootstrap_s);
      d.get("min_s", cfg.deadline.min_s);
    });
    r.list("devices", cfg.devices, [](Reader& d, DeviceClass& dev) {
      dev = DeviceClass{};
      d.get("name", dev.name);
      d.get("share", dev.share);
      d.get("nominal_ghz", dev.nominal_ghz);
      d.get("p_nominal", dev.p_nominal);
      d.get("p_idle", dev.p_idle);
      d.get("c_sn", dev.c_sn);
      d.get("c_pn", dev.c_pn);
      d.get("slow_speeds", dev.slow_speeds);
    });
    std::string mode = to_string(cfg.mode);
    r.get("mode", mode);
    cfg.mode = parse_mode(mode);
    r.get("workers", cfg.workers);
    r.finish();
  } catch (const json::exception& e) {
    throw ConfigError("<root>", e.what());
  }
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("--config", "cannot open " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_json(text.str());
}

std::string config_to_json(const SimConfig& c) {
  json models = json::array();
  for (const auto& m : c.zoo.models) {
    models.push_back({{"name", m.name},
                      {"blocks", m.blocks},
                      {"layers_per_block", m.layers_per_block},
                      {"width", m.width},
                      {"residual", m.residual},
                      {"shift", m.shift},
                      {"noise", m.noise},
                      {"focus", m.focus}});
  }
  json devices = json::array();
  for (const auto& d : c.devices) {
    devices.push_back({{"name", d.name},
                       {"share", d.share},
                       {"nominal_ghz", d.nominal_ghz},
                       {"p_nominal", d.p_nominal},
                       {"p_idle", d.p_idle},
                       {"c_sn", d.c_sn},
                       {"c_pn", d.c_pn},
                       {"slow_speeds", d.slow_speeds}});
  }
  json root = {
      {"seed", c.seed},
      {"world",
       {{"input_dim", c.zoo.world.input_dim},
        {"num_classes", c.zoo.world.num_classes},
        {"prototype_scale", c.zoo.world.prototype_scale}}},
      {"zoo", {{"pretrain_per_class", c.zoo.pretrain_per_class}, {"ridge", c.zoo.ridge}, {"models", models}}},
      {"task",
       {{"train_samples", c.task.train_samples},
        {"test_samples", c.task.test_samples},
        {"shift", c.task.shift},
        {"noise", c.task.noise}}},
      {"federation",
       {{"num_clients", c.federation.num_clients},
        {"participants_per_round", c.federation.participants_per_round},
        {"partition", to_string(c.federation.partition)},
        {"alpha", c.federation.alpha},
        {"classes_per_client", c.federation.classes_per_client},
        {"balanced_clients", c.federation.balanced_clients},
        {"balanced_per_class", c.federation.balanced_per_class}}},
      {"protocol",
       {{"k", c.protocol.k},
        {"cka_batch", c.protocol.cka_batch},
        {"rounds_per_step", c.protocol.rounds_per_step},
        {"max_depth", c.protocol.max_depth},
        {"round_budget", c.protocol.round_budget},
        {"candidates_per_step", c.protocol.candidates_per_step},
        {"calib_rows", c.protocol.calib_rows},
        {"rel_tol", c.protocol.rel_tol}}},
      {"aggregator",
       {{"epsilon0", c.aggregator.epsilon0},
        {"gamma", c.aggregator.gamma},
        {"alpha", c.aggregator.alpha},
        {"beta", c.aggregator.beta},
        {"theta", c.aggregator.theta}}},
      {"deadline",
       {{"mu", c.deadline.mu},
        {"sigma", c.deadline.sigma},
        {"bootstrap_s", c.deadline.bootstrap_s},
        {"min_s", c.deadline.min_s}}},
      {"devices", devices},
      {"mode", to_string(c.mode)},
      {"workers", c.workers},
  };
  return root.dump(2) + "\n";
}

}  // namespace fedstitch
