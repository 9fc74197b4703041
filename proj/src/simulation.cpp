// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "fedstitch/archive.hpp"
#include "fedstitch/errors.hpp"

namespace fedstitch::sim {

namespace {

// Largest-remainder apportionment of `n` clients over the device shares,
// followed by a seeded shuffle of the assignment.
std::vector<std::size_t> assign_devices(const std::vector<DeviceClass>& devices, std::size_t n,
                                        std::uint64_t seed) {
  double total = 0.0;
  for (const DeviceClass& d : devices) {
    total += d.share;
  }
  std::vector<std::size_t> counts(devices.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    const double exact = static_cast<double>(n) * devices[i].share / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    given += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; given < n; ++i, ++given) {
    ++counts[remainders[i % remainders.size()].second];
  }
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    out.insert(out.end(), counts[i], i);
  }
  Rng rng = make_rng(seed, "devices");
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

data::Partition make_partition(const SimConfig& cfg, const data::Dataset& train) {
  const auto& f = cfg.federation;
  if (f.partition == PartitionKind::ClassCount) {
    return data::class_count_partition(train, f.num_clients, f.classes_per_client, cfg.seed);
  }
  if (f.balanced_clients > 0) {
    return data::dirichlet_partition_with_balanced(train, f.num_clients, f.alpha, f.balanced_clients,
                                                   f.balanced_per_class, cfg.seed);
  }
  return data::dirichlet_partition(train, f.num_clients, f.alpha, cfg.seed);
}

server::CoordinatorOptions coordinator_options(const SimConfig& cfg, const Setup& setup) {
  server::CoordinatorOptions o;
  o.aggregator = cfg.aggregator;
  o.aggregator.k = cfg.protocol.k;
  o.rounds_per_step = cfg.protocol.rounds_per_step;
  o.participants_per_round = cfg.federation.participants_per_round;
  o.num_clients = cfg.federation.num_clients;
  o.mu = cfg.deadline.mu;
  o.sigma = cfg.deadline.sigma;
  o.bootstrap_deadline_s = cfg.deadline.bootstrap_s;
  o.min_deadline_s = cfg.deadline.min_s;
  o.rel_tol = cfg.protocol.rel_tol;
  o.freeze_weights = cfg.mode == Mode::FedAvgVoting;
  o.prune = cfg.mode != Mode::NoPrune;
  if (cfg.mode == Mode::LocalOnly) {
    Rng rng = make_rng(cfg.seed, "local");
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(setup.clients.size() - 1));
    o.only_client = ClientId{pick(rng)};
    o.participants_per_round = 1;
  }
  return o;
}

std::string join_ids(const std::vector<BlockId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += (i ? ";" : "") + std::to_string(ids[i].value);
  }
  return out;
}

}  // namespace

Setup prepare(const SimConfig& config) {
  config.validate();
  Setup s;
  s.zoo = zoo::generate_model_zoo(config.zoo, config.seed);
  s.task = data::generate_task(config.task, config.seed);
  s.partition = make_partition(config, s.task.train);
  s.device_of = assign_devices(config.devices, config.federation.num_clients, config.seed);
  std::vector<energy::DeviceProfile> profiles;
  for (const DeviceClass& d : config.devices) {
    profiles.push_back(d.profile());
  }
  for (std::size_t c = 0; c < config.federation.num_clients; ++c) {
    s.clients.push_back(client::ClientContext::make(ClientId{static_cast<std::uint32_t>(c)},
                                                    s.partition.shards[c], profiles[s.device_of[c]],
                                                    config.seed));
  }
  return s;
}

RunResult run_simulation(const SimConfig& config, const RunHooks& hooks) {
  return run_simulation(config, prepare(config), hooks);
}

RunResult run_simulation(const SimConfig& config, const Setup& setup, const RunHooks& hooks) {
  config.validate();
  std::vector<client::ClientContext> clients = setup.clients;
  const zoo::ModelZoo& zoo = setup.zoo;
  const data::Dataset& train = setup.task.train;

  server::Coordinator coord(zoo, coordinator_options(config, setup), config.seed, config.protocol.max_depth);

  ReportSource source = hooks.source;
  if (!source) {
    source = [&](int, const server::Coordinator::Dispatch& d, const stitch::StitchedNetwork& net) {
      std::vector<client::ClientReport> reports(d.participants.size());
      auto work = [&](std::size_t i) {
        client::ClientContext& ctx = clients.at(d.participants[i].value);
        client::SelectOptions opts;
        opts.batch_size = config.protocol.cka_batch;
        opts.rel_tol = config.protocol.rel_tol;
        if (config.mode == Mode::MaxFrequency) {
          opts.fixed_level = ctx.device.top();
        }
        reports[i] = client::local_select(ctx, zoo, train, net, d.epsilon, config.protocol.k, d.deadline_s, opts);
      };
      const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), reports.size());
      if (workers <= 1) {
        for (std::size_t i = 0; i < reports.size(); ++i) {
          work(i);
        }
      } else {
        // Clients are independent; each slot is written by exactly one thread.
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t i = w; i < reports.size(); i += workers) {
              work(i);
            }
          });
        }
        for (std::thread& t : pool) {
          t.join();
        }
      }
      return reports;
    };
  }

  const server::CalibrationSource calib = [&](const client::ClientReport& r, int step) {
    if (config.protocol.calib_rows == 0) {
      return train.rows(r.batch);
    }
    Rng rng = make_rng(config.seed, "calib", static_cast<std::uint64_t>(step));
    return train.rows(client::sample_batch(clients.at(r.client.value).shard, config.protocol.calib_rows, rng));
  };

  RunResult result;
  RunSummary& sum = result.summary;
  sum.mode = config.mode;
  sum.seed = config.seed;
  while (!coord.done() && sum.macro_rounds < config.protocol.round_budget) {
    for (int c = 0; c < config.protocol.candidates_per_step && !coord.done(); ++c) {
      const stitch::StitchedNetwork& net = coord.begin_step();
      while (!coord.step_ready()) {
        const server::Coordinator::Dispatch d = coord.dispatch();
        const int round = coord.rounds_completed();
        std::vector<client::ClientReport> reports = source(round, d, net);
        for (const client::ClientReport& r : reports) {
          sum.block_evaluations += r.block_evaluations;
          sum.total_energy_j += r.plan.energy;
          if (hooks.on_report) {
            hooks.on_report(trace::Entry{round, r});
          }
        }
        coord.submit_round(d, std::move(reports));
        sum.total_time_s += coord.records().back().duration_s;
        if (hooks.on_round) {
          hooks.on_round(coord.records().back(), coord.state());
        }
      }
      coord.finish_step(calib);
    }
    ++sum.macro_rounds;
  }
  sum.budget_hit = !coord.done();
  sum.steps = coord.steps_completed();
  sum.rounds = coord.rounds_completed();
  sum.deadline_misses = coord.deadline_misses();

  result.records = coord.records();
  result.finished = coord.finished();
  result.lineage = coord.lineage();
  result.final_weights = coord.state().weights;
  sum.finished = result.finished.size();
  for (const stitch::StitchedNetwork& n : result.finished) {
    if (!n.is_classifier()) {
      continue;
    }
    ++sum.classifiers;
    const double acc = stitch::evaluate_accuracy(n, setup.task.test.inputs, setup.task.test.labels);
    result.accuracy[n.id] = acc;
    if (!sum.best_accuracy || acc > *sum.best_accuracy) {
      sum.best_accuracy = acc;
      sum.best_net = n.id;
    }
  }
  return result;
}

ReportSource replay_source(std::vector<trace::Entry> entries) {
  auto state = std::make_shared<std::pair<std::vector<trace::Entry>, std::size_t>>(std::move(entries), 0);
  return [state](int round, const server::Coordinator::Dispatch& d, const stitch::StitchedNetwork& net) {
    auto& [all, next] = *state;
    std::vector<client::ClientReport> reports;
    for (ClientId id : d.participants) {
      if (next >= all.size()) {
        throw Error("replay: trace ended before round " + std::to_string(round));
      }
      const trace::Entry& e = all[next++];
      if (e.round != round || e.report.client != id || e.report.net != net.id) {
        throw Error("replay: trace entry " + std::to_string(next) + " does not match round " +
                    std::to_string(round) + ", client " + std::to_string(id.value));
      }
      reports.push_back(e.report);
    }
    return reports;
  };
}

std::vector<RunSummary> compare_modes(const SimConfig& config, std::span<const Mode> modes) {
  const Setup setup = prepare(config);
  std::vector<RunSummary> out;
  for (Mode m : modes) {
    SimConfig c = config;
    c.mode = m;
    out.push_back(run_simulation(c, setup).summary);
  }
  return out;
}

void write_rounds_csv(std::ostream& os, std::span<const server::RoundRecord> records) {
  os << "round,step,vote,net_id,net_depth,epsilon,client_id,rank,weight,selected,explored,pool_before,"
        "pool_after,deadline_s,time_s,energy_j,level,freq_hz,over_deadline,block_evals,winners,tallies\n";
  for (const server::RoundRecord& r : records) {
    std::string tallies;
    for (std::size_t i = 0; i < r.tallies.size(); ++i) {
      tallies += fmt::format("{}{}:{}", i ? ";" : "", r.tallies[i].first.value, r.tallies[i].second);
    }
    const std::string winners = join_ids(r.winners);
    for (const server::ClientRow& c : r.clients) {
      fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.round, r.step,
                 r.vote, r.net.value, r.net_depth, r.epsilon, c.client.value, c.rank, c.weight_after,
                 join_ids(c.selected), c.explored ? 1 : 0, r.pool_before, r.pool_after, r.deadline_s,
                 c.time_s, c.energy_j, c.level, c.freq, c.over_deadline ? 1 : 0, c.block_evaluations,
                 winners, tallies);
    }
  }
}

void write_summary_csv(std::ostream& os, std::span<const RunSummary> summaries) {
  os << "mode,seed,macro_rounds,steps,rounds,budget_hit,finished,classifiers,best_accuracy,best_net,"
        "total_time_s,total_energy_j,block_evaluations,deadline_misses\n";
  for (const RunSummary& s : summaries) {
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(s.mode), s.seed, s.macro_rounds,
               s.steps, s.rounds, s.budget_hit ? 1 : 0, s.finished, s.classifiers,
               s.best_accuracy ? fmt::format("{}", *s.best_accuracy) : std::string(),
               s.best_net ? std::to_string(s.best_net->value) : std::string(), s.total_time_s,
               s.total_energy_j, s.block_evaluations, s.deadline_misses);
  }
}

void write_report(std::ostream& os, const SimConfig& config, const RunResult& result) {
  const RunSummary& s = result.summary;
  fmt::print(os, "fedstitch run report\n");
  fmt::print(os, "  mode              {}\n", to_string(s.mode));
  fmt::print(os, "  seed              {}\n", s.seed);
  fmt::print(os, "  clients           {} ({} per round)\n", config.federation.num_clients,
             config.mode == Mode::LocalOnly ? 1 : config.federation.participants_per_round);
  fmt::print(os, "  macro-rounds      {} of {}{}\n", s.macro_rounds, config.protocol.round_budget,
             s.budget_hit ? " (budget reached)" : "");
  fmt::print(os, "  stitch steps      {}\n", s.steps);
  fmt::print(os, "  voting rounds     {}\n", s.rounds);
  fmt::print(os, "  finished nets     {} ({} classifiers)\n", s.finished, s.classifiers);
  if (s.best_accuracy) {
    fmt::print(os, "  best accuracy     {:.4f} (net {})\n", *s.best_accuracy, s.best_net->value);
  } else {
    fmt::print(os, "  best accuracy     n/a\n");
  }
  fmt::print(os, "  simulated time    {:.3f} s\n", s.total_time_s);
  fmt::print(os, "  simulated energy  {:.3f} J\n", s.total_energy_j);
  fmt::print(os, "  block evaluations {}\n", s.block_evaluations);
  fmt::print(os, "  deadline misses   {}\n", s.deadline_misses);

  std::vector<std::pair<double, NetId>> ranked;
  for (const auto& [id, acc] : result.accuracy) {
    ranked.emplace_back(acc, id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  fmt::print(os, "\nclassifier networks (best first)\n");
  for (const auto& [acc, id] : ranked) {
    const auto it = std::find_if(result.finished.begin(), result.finished.end(),
                                 [id = id](const stitch::StitchedNetwork& n) { return n.id == id; });
    fmt::print(os, "  net {:>4}  acc {:.4f}  blocks {}\n", id.value, acc, join_ids(it->block_ids()));
  }
}

void write_outputs(const std::filesystem::path& dir, const SimConfig& config, const Setup& setup,
                   const RunResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) {
      throw Error("cannot write " + (dir / name).string());
    }
    return f;
  };
  {
    auto f = open("rounds.csv");
    write_rounds_csv(f, result.records);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, std::span<const RunSummary>(&result.summary, 1));
  }
  {
    auto f = open("report.txt");
    write_report(f, config, result);
  }
  {
    auto f = open("networks.json");
    archive::Contents contents{setup.zoo, result.finished, result.lineage, result.final_weights};
    f << archive::write(contents);
  }
}

}  // namespace fedstitch::sim
