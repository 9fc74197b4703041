// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. Each one follows the textbook
// definition as directly as possible and shares no code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedstitch/energy.hpp"
#include "fedstitch/fed_client.hpp"
#include "fedstitch/stitcher.hpp"

namespace oracle {

using Eigen::MatrixXd;

inline MatrixXd centering(Eigen::Index n) {
  return MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
}

/// tr(K H L H) / (n-1)^2 on explicit Gram matrices.
inline double gram_hsic(const MatrixXd& x, const MatrixXd& y) {
  const Eigen::Index n = x.rows();
  const MatrixXd h = centering(n);
  const MatrixXd k = x * x.transpose();
  const MatrixXd l = y * y.transpose();
  const double d = static_cast<double>(n - 1);
  return (k * h * l * h).trace() / (d * d);
}

inline double gram_cka(const MatrixXd& x, const MatrixXd& y) {
  return gram_hsic(x, y) / std::sqrt(gram_hsic(x, x) * gram_hsic(y, y));
}

/// Least-squares adapter from the normal equations (X^T X) A^T = X^T Y.
/// Valid only for full column rank X.
inline MatrixXd normal_equations_adapter(const MatrixXd& x, const MatrixXd& y) {
  const MatrixXd gram = x.transpose() * x;
  return gram.ldlt().solve(x.transpose() * y).transpose();
}

inline double residual(const MatrixXd& x, const MatrixXd& adapter, const MatrixXd& y) {
  return (x * adapter.transpose() - y).norm();
}

inline MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = g(rng);
  }
  Eigen::HouseholderQR<MatrixXd> qr(m);
  return qr.householderQ() * MatrixXd::Identity(n, n);
}

inline MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = g(rng);
  }
  return m;
}

// -- energy ------------------------------------------------------------------

struct EnergyChoice {
  std::size_t level = 0;
  double energy = 0.0;
  bool over_deadline = false;
};

/// Tries every level; the cheapest feasible one wins, ties to the lower level.
/// If none is feasible the top level is returned, idling for zero seconds.
inline EnergyChoice exhaustive_frequency(const fedstitch::energy::DeviceProfile& p,
                                         const fedstitch::energy::Workload& w, double deadline) {
  EnergyChoice best;
  bool found = false;
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    const auto& l = p.levels[i];
    const double t_sn = p.c_sn * w.d_sn / l.freq;
    const double t_pn = p.c_pn * w.d_pn / l.freq;
    if (t_sn + t_pn > deadline) {
      continue;
    }
    const double e = l.p_sn * t_sn + l.p_pn * t_pn + p.p_idle * (deadline - (t_sn + t_pn));
    if (!found || e < best.energy) {
      best = EnergyChoice{i, e, false};
      found = true;
    }
  }
  if (!found) {
    const std::size_t top = p.levels.size() - 1;
    const auto& l = p.levels[top];
    best = EnergyChoice{top, l.p_sn * p.c_sn * w.d_sn / l.freq + l.p_pn * p.c_pn * w.d_pn / l.freq, true};
  }
  return best;
}

// -- selection, ranking, voting, pruning -------------------------------------

/// Sorts the whole table by (score desc, id asc) and keeps the first k.
inline std::vector<fedstitch::BlockId> sorted_top_k(std::vector<fedstitch::client::ScoredBlock> s, int k) {
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.block < b.block;
  });
  std::vector<fedstitch::BlockId> out;
  for (int i = 0; i < k && i < static_cast<int>(s.size()); ++i) {
    out.push_back(s[static_cast<std::size_t>(i)].block);
  }
  return out;
}

/// Percentile of `score` inside `table` by explicit sorting: positions of all
/// equal entries in the ascending order are averaged.
inline double percentile(const std::vector<fedstitch::client::ScoredBlock>& table, double score) {
  std::vector<double> v;
  for (const auto& e : table) {
    v.push_back(e.score);
  }
  std::sort(v.begin(), v.end());
  double pos_sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == score) {
      pos_sum += static_cast<double>(i + 1);
      ++count;
    }
  }
  return pos_sum / count / static_cast<double>(v.size());
}

inline double brute_rank(const std::vector<fedstitch::client::ClientReport>& reports,
                         fedstitch::ClientId target, double theta) {
  const fedstitch::client::ClientReport* mine = nullptr;
  for (const auto& r : reports) {
    if (r.client == target) {
      mine = &r;
    }
  }
  if (reports.size() < 2 || mine->selected.empty()) {
    return theta;
  }
  std::vector<double> parts;
  for (const auto& other : reports) {
    if (other.client == target) {
      continue;
    }
    for (auto b : mine->selected) {
      double s = 0.0;
      for (const auto& e : other.scores) {
        if (e.block == b) {
          s = e.score;
        }
      }
      parts.push_back(percentile(other.scores, s));
    }
  }
  double sum = 0.0;
  for (double p : parts) {
    sum += p;
  }
  return sum / static_cast<double>(parts.size());
}

/// For each model: among alive blocks that appear in some report, the one with
/// the highest mean score (shallowest on ties); alive blocks of that model
/// starting earlier are removed. Computed by sorting candidates per model.
inline std::vector<bool> brute_prune(const fedstitch::stitch::BlockPool& pool,
                                     const std::vector<fedstitch::client::ClientReport>& reports) {
  const auto& entries = pool.entries();
  std::vector<bool> alive;
  for (const auto& e : entries) {
    alive.push_back(e.alive);
  }
  if (reports.empty()) {
    return alive;
  }
  std::map<std::uint32_t, std::vector<std::pair<double, int>>> per_model;
  for (const auto& e : entries) {
    if (!e.alive) {
      continue;
    }
    double sum = 0.0;
    int n = 0;
    for (const auto& r : reports) {
      for (const auto& s : r.scores) {
        if (s.block == e.id) {
          sum += s.score;
          ++n;
        }
      }
    }
    if (n > 0) {
      per_model[e.model.value].emplace_back(sum / n, e.layer_start);
    }
  }
  for (auto& [model, cands] : per_model) {
    std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const int cut = cands.front().second;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].model.value == model && entries[i].layer_start < cut) {
        alive[i] = false;
      }
    }
  }
  return alive;
}

}  // namespace oracle
