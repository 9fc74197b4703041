// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "fedstitch/errors.hpp"
#include "fedstitch/simulation.hpp"
#include "fixtures.hpp"

namespace sim = fedstitch::sim;
using fedstitch::Mode;

namespace {

std::string rounds_csv(const sim::RunResult& r) {
  std::ostringstream os;
  sim::write_rounds_csv(os, r.records);
  return os.str();
}

}  // namespace

TEST_CASE("prepare assigns devices by share and keeps shards disjoint") {
  fedstitch::SimConfig cfg = fixture::small_sim();
  cfg.federation.num_clients = 20;
  const sim::Setup s = sim::prepare(cfg);
  CHECK(s.clients.size() == 20);
  std::vector<int> per_class(cfg.devices.size(), 0);
  for (std::size_t d : s.device_of) {
    ++per_class[d];
  }
  // 30/30/30/10 of 20 clients.
  CHECK(per_class == std::vector<int>{6, 6, 6, 2});
  std::size_t total = 0;
  for (const auto& c : s.clients) {
    total += c.shard.size();
  }
  CHECK(total == s.task.train.size());
}

TEST_CASE("runs are deterministic and independent of the worker count") {
  fedstitch::SimConfig cfg = fixture::small_sim(8);
  const sim::RunResult a = sim::run_simulation(cfg);
  const sim::RunResult b = sim::run_simulation(cfg);
  cfg.workers = 3;
  const sim::RunResult c = sim::run_simulation(cfg);
  CHECK(rounds_csv(a) == rounds_csv(b));
  CHECK(rounds_csv(a) == rounds_csv(c));
  CHECK(a.final_weights == c.final_weights);
  CHECK(a.summary.block_evaluations == c.summary.block_evaluations);
}

TEST_CASE("a recorded trace replays to the same outcome") {
  const fedstitch::SimConfig cfg = fixture::small_sim(9);
  const sim::Setup setup = sim::prepare(cfg);
  std::vector<fedstitch::trace::Entry> entries;
  sim::RunHooks rec;
  rec.on_report = [&](const fedstitch::trace::Entry& e) { entries.push_back(e); };
  const sim::RunResult live = sim::run_simulation(cfg, setup, rec);
  REQUIRE_FALSE(entries.empty());

  std::stringstream ss;
  for (const auto& e : entries) {
    fedstitch::trace::write(ss, e);
  }
  sim::RunHooks rep;
  rep.source = sim::replay_source(fedstitch::trace::read_all(ss));
  const sim::RunResult replayed = sim::run_simulation(cfg, setup, rep);
  CHECK(rounds_csv(replayed) == rounds_csv(live));
  CHECK(replayed.accuracy == live.accuracy);

  entries.pop_back();
  sim::RunHooks cut;
  cut.source = sim::replay_source(entries);
  CHECK_THROWS_AS(sim::run_simulation(cfg, setup, cut), fedstitch::Error);
}

TEST_CASE("protocol invariants hold across a full run") {
  const fedstitch::SimConfig cfg = fixture::small_sim(10);
  const sim::RunResult r = sim::run_simulation(cfg);
  CHECK(r.summary.macro_rounds <= cfg.protocol.round_budget);
  CHECK(r.summary.rounds == r.summary.steps * cfg.protocol.rounds_per_step);
  CHECK(std::accumulate(r.final_weights.begin(), r.final_weights.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  std::uint64_t evals = 0;
  double energy = 0.0;
  for (const auto& rec : r.records) {
    CHECK(rec.pool_after <= rec.pool_before);
    CHECK(rec.clients.size() == static_cast<std::size_t>(cfg.federation.participants_per_round));
    CHECK(rec.duration_s >= rec.deadline_s);
    double w = 0.0;
    for (const auto& c : rec.clients) {
      evals += c.block_evaluations;
      energy += c.energy_j;
      w += c.weight_after;
      CHECK(c.selected.size() <= static_cast<std::size_t>(cfg.protocol.k));
    }
    CHECK(w <= 1.0 + 1e-12);
  }
  CHECK(evals == r.summary.block_evaluations);
  CHECK(energy == doctest::Approx(r.summary.total_energy_j));
  // A child's pool never holds a block its parent's pool had dropped.
  std::map<fedstitch::NetId, const fedstitch::stitch::StitchedNetwork*> by_id;
  for (const auto& n : r.finished) {
    by_id[n.id] = &n;
    CHECK(n.depth() <= cfg.protocol.max_depth);
    std::set<fedstitch::BlockId> used;
    for (const auto& seg : n.segments) {
      CHECK(used.insert(seg.block->id).second);
    }
  }
  for (const auto& [id, acc] : r.accuracy) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(by_id.at(id)->is_classifier());
  }
}

TEST_CASE("mode switches change only what they promise") {
  const fedstitch::SimConfig base = fixture::small_sim(11);
  const sim::Setup setup = sim::prepare(base);

  fedstitch::SimConfig frozen = base;
  frozen.mode = Mode::FedAvgVoting;
  const sim::RunResult f = sim::run_simulation(frozen, setup);
  for (double w : f.final_weights) {
    CHECK(w == doctest::Approx(1.0 / static_cast<double>(base.federation.num_clients)));
  }

  fedstitch::SimConfig keep = base;
  keep.mode = Mode::NoPrune;
  const sim::RunResult n = sim::run_simulation(keep, setup);
  for (const auto& rec : n.records) {
    if (!rec.winners.empty()) {
      CHECK(rec.pool_after == rec.pool_before);
    }
  }

  fedstitch::SimConfig fast = base;
  fast.mode = Mode::MaxFrequency;
  const sim::RunResult m = sim::run_simulation(fast, setup);
  for (const auto& rec : m.records) {
    for (const auto& c : rec.clients) {
      CHECK(c.level == setup.clients[c.client.value].device.top());
    }
  }
  const sim::RunResult full = sim::run_simulation(base, setup);
  CHECK(m.summary.block_evaluations == full.summary.block_evaluations);

  fedstitch::SimConfig local = base;
  local.mode = Mode::LocalOnly;
  const sim::RunResult l = sim::run_simulation(local, setup);
  std::set<fedstitch::ClientId> who;
  for (const auto& rec : l.records) {
    CHECK(rec.clients.size() == 1);
    who.insert(rec.clients.front().client);
  }
  CHECK(who.size() == 1);
}

TEST_CASE("summary and report writers") {
  const fedstitch::SimConfig cfg = fixture::small_sim(12);
  const std::vector<Mode> modes{Mode::Full, Mode::NoPrune};
  const auto summaries = sim::compare_modes(cfg, modes);
  REQUIRE(summaries.size() == 2);
  CHECK(summaries[0].mode == Mode::Full);
  CHECK(summaries[1].mode == Mode::NoPrune);
  std::ostringstream os;
  sim::write_summary_csv(os, summaries);
  const std::string csv = os.str();
  CHECK(csv.rfind("mode,seed,macro_rounds,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  const sim::RunResult r = sim::run_simulation(cfg);
  std::ostringstream rep;
  sim::write_report(rep, cfg, r);
  CHECK(rep.str().find("block evaluations") != std::string::npos);
  const std::string rounds = rounds_csv(r);
  CHECK(rounds.rfind("round,step,vote,net_id,net_depth,epsilon,client_id,", 0) == 0);
}
