// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sstream>
#include <string>

#include <json.hpp>

#include "fedstitch/archive.hpp"
#include "fedstitch/config.hpp"
#include "fedstitch/errors.hpp"
#include "fedstitch/simulation.hpp"
#include "fedstitch/trace.hpp"
#include "fixtures.hpp"

namespace st = fedstitch::stitch;
namespace zoo = fedstitch::zoo;
using fedstitch::ConfigError;
using fedstitch::config_from_json;
using fedstitch::config_to_json;

namespace {

std::string field_of(const std::string& text) {
  try {
    config_from_json(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  fedstitch::SimConfig c = fixture::small_sim(17);
  c.mode = fedstitch::Mode::NoPrune;
  c.federation.partition = fedstitch::PartitionKind::ClassCount;
  c.zoo.models[1].focus = 0.33;
  c.devices[2].slow_speeds = {0.6};
  const std::string text = config_to_json(c);
  const fedstitch::SimConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.seed == 17);
  CHECK(back.mode == fedstitch::Mode::NoPrune);
  CHECK(back.zoo.models.size() == 3);
  CHECK(back.zoo.models[1].focus == 0.33);
  CHECK(back.task.world.num_classes == c.zoo.world.num_classes);
  CHECK(config_to_json(config_from_json("{}")) == config_to_json(fedstitch::SimConfig{}));
}

TEST_CASE("config decoding is strict and names the offending field") {
  CHECK(field_of(R"({"protocol": {"kk": 3}})") == "protocol.kk");
  CHECK(field_of(R"({"protocol": {"k": "three"}})") == "protocol.k");
  CHECK(field_of(R"({"federation": {"num_clients": -4}})") == "federation.num_clients");
  CHECK(field_of(R"({"zoo": {"models": [{"name": "x", "depth": 3}]}})") == "zoo.models[0].depth");
  CHECK(field_of(R"({"mode": "turbo"})") == "mode");
  CHECK(field_of(R"({"federation": {"participants_per_round": 500}})") == "federation.participants_per_round");
  CHECK(field_of(R"({"devices": []})") == "devices");
  CHECK(field_of("{not json") == "<root>");
  CHECK(field_of("[1, 2]") == "<root>");
  CHECK_THROWS_AS(fedstitch::load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("mode names round trip") {
  for (fedstitch::Mode m : fedstitch::all_modes()) {
    CHECK(fedstitch::parse_mode(fedstitch::to_string(m)) == m);
  }
  CHECK(fedstitch::all_modes().size() == 5);
}

TEST_CASE("trace lines parse back to equal reports") {
  fedstitch::client::ClientReport r;
  r.client = fedstitch::ClientId(7);
  r.net = fedstitch::NetId(3);
  r.batch = {5, 1, 9};
  r.scores = {{fedstitch::BlockId(2), 0.1 + 0.2}, {fedstitch::BlockId(8), 1.0 / 3.0}};
  r.selected = {fedstitch::BlockId(8)};
  r.explored = true;
  r.epsilon = 0.2 * 0.9;
  r.workload = {123.0, 4.5e7};
  r.plan = fedstitch::energy::Plan{2, 1.21e9, 0.0123456789, 1e-17, 3.3, 17.000000000000004, false};
  r.block_evaluations = 44;
  const fedstitch::trace::Entry e{12, r};
  const std::string line = fedstitch::trace::to_line(e);
  const fedstitch::trace::Entry back = fedstitch::trace::parse_line(line);
  CHECK(back.round == 12);
  CHECK(back.report == r);
  CHECK(fedstitch::trace::to_line(back) == line);

  std::stringstream ss;
  fedstitch::trace::write(ss, e);
  fedstitch::trace::write(ss, e);
  ss << "\n";
  CHECK(fedstitch::trace::read_all(ss).size() == 2);
  std::stringstream bad("{\"round\": 1}\n");
  CHECK_THROWS_AS(fedstitch::trace::read_all(bad), fedstitch::Error);
}

TEST_CASE("archive round trip is byte-stable and preserves behaviour") {
  const fedstitch::SimConfig cfg = fixture::small_sim(4);
  const fedstitch::sim::Setup setup = fedstitch::sim::prepare(cfg);
  const fedstitch::sim::RunResult run = fedstitch::sim::run_simulation(cfg, setup);
  REQUIRE_FALSE(run.finished.empty());

  fedstitch::archive::Contents contents{setup.zoo, run.finished, run.lineage, run.final_weights};
  const std::string text = fedstitch::archive::write(contents);
  const fedstitch::archive::Contents back = fedstitch::archive::read(text);
  CHECK(fedstitch::archive::write(back) == text);
  REQUIRE(back.networks.size() == run.finished.size());
  CHECK(back.weights == run.final_weights);
  const auto& x = setup.task.test.inputs;
  for (std::size_t i = 0; i < back.networks.size(); ++i) {
    CHECK(back.networks[i].id == run.finished[i].id);
    CHECK(back.networks[i].pool == run.finished[i].pool);
    CHECK(st::network_forward(back.networks[i], x) == st::network_forward(run.finished[i], x));
  }
  CHECK(back.zoo.blocks.size() == setup.zoo.blocks.size());

  auto j = nlohmann::json::parse(text);
  j["version"] = 99;
  CHECK_THROWS_AS(fedstitch::archive::read(j.dump()), fedstitch::Error);
  CHECK_THROWS_AS(fedstitch::archive::read("{}"), fedstitch::Error);
  CHECK_THROWS_AS(fedstitch::archive::read("not json"), fedstitch::Error);
}
