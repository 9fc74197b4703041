// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/trace.hpp"

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "fedstitch/errors.hpp"

namespace fedstitch::trace {

using nlohmann::json;

std::string to_line(const Entry& e) {
  const client::ClientReport& r = e.report;
  json scores = json::array();
  for (const client::ScoredBlock& s : r.scores) {
    scores.push_back({s.block.value, s.score});
  }
  json selected = json::array();
  for (BlockId b : r.selected) {
    selected.push_back(b.value);
  }
  json j = {{"round", e.round},
            {"client", r.client.value},
            {"net", r.net.value},
            {"batch", r.batch},
            {"scores", std::move(scores)},
            {"selected", std::move(selected)},
            {"explored", r.explored},
            {"epsilon", r.epsilon},
            {"d_sn", r.workload.d_sn},
            {"d_pn", r.workload.d_pn},
            {"plan",
             {{"level", r.plan.level},
              {"freq", r.plan.freq},
              {"t_sn", r.plan.t_sn},
              {"t_pn", r.plan.t_pn},
              {"t_idle", r.plan.t_idle},
              {"energy", r.plan.energy},
              {"over_deadline", r.plan.over_deadline}}},
            {"evals", r.block_evaluations}};
  return j.dump();
}

Entry parse_line(const std::string& line) {
  const json j = json::parse(line);
  Entry e;
  client::ClientReport& r = e.report;
  e.round = j.at("round").get<int>();
  r.client = ClientId{j.at("client").get<std::uint32_t>()};
  r.net = NetId{j.at("net").get<std::uint32_t>()};
  r.batch = j.at("batch").get<std::vector<std::size_t>>();
  for (const json& s : j.at("scores")) {
    r.scores.push_back(client::ScoredBlock{BlockId{s.at(0).get<std::uint32_t>()}, s.at(1).get<double>()});
  }
  for (const json& b : j.at("selected")) {
    r.selected.emplace_back(b.get<std::uint32_t>());
  }
  r.explored = j.at("explored").get<bool>();
  r.epsilon = j.at("epsilon").get<double>();
  r.workload.d_sn = j.at("d_sn").get<double>();
  r.workload.d_pn = j.at("d_pn").get<double>();
  const json& p = j.at("plan");
  r.plan.level = p.at("level").get<std::size_t>();
  r.plan.freq = p.at("freq").get<double>();
  r.plan.t_sn = p.at("t_sn").get<double>();
  r.plan.t_pn = p.at("t_pn").get<double>();
  r.plan.t_idle = p.at("t_idle").get<double>();
  r.plan.energy = p.at("energy").get<double>();
  r.plan.over_deadline = p.at("over_deadline").get<bool>();
  r.block_evaluations = j.at("evals").get<std::uint64_t>();
  return e;
}

void write(std::ostream& os, const Entry& entry) { os << to_line(entry) << '\n'; }

std::vector<Entry> read_all(std::istream& is) {
  std::vector<Entry> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (line.empty()) {
      continue;
    }
    try {
      out.push_back(parse_line(line));
    } catch (const json::exception& e) {
      throw Error("trace line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace fedstitch::trace
