// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/energy.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <cmath>
#include <string>
#include <utility>

#include "fedstitch/errors.hpp"

namespace fedstitch::energy {

namespace {

constexpr double kRefSpeed[] = {1.0, 1.21, 1.38};
constexpr double kRefPower[] = {1.0, 1.25, 1.14};

void check_level(const DeviceProfile& profile, std::size_t level) {
  if (level >= profile.levels.size()) {
    throw IndexError("energy: level " + std::to_string(level) + " outside profile '" + profile.name +
                     "' with " + std::to_string(profile.levels.size()) + " levels");
  }
}

std::string speed_label(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "x%.2f", s);
  return buf;
}

}  // namespace

void DeviceProfile::validate() const {
  if (levels.empty()) {
    throw SpecError("device '" + name + "': needs at least one frequency level");
  }
  if (!(c_sn > 0.0) || !(c_pn > 0.0)) {
    throw SpecError("device '" + name + "': cycles per object must be positive");
  }
  if (!(p_idle >= 0.0)) {
    throw SpecError("device '" + name + "': idle power must be non-negative");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const FrequencyLevel& l = levels[i];
    if (!(l.freq > 0.0)) {
      throw SpecError("device '" + name + "': level " + std::to_string(i) + " frequency must be positive");
    }
    if (i > 0 && !(l.freq > levels[i - 1].freq)) {
      throw SpecError("device '" + name + "': levels must be strictly increasing in frequency");
    }
    if (!(l.p_sn > p_idle) || !(l.p_pn > p_idle)) {
      throw SpecError("device '" + name + "': level " + std::to_string(i) +
                      " inference power must exceed idle power");
    }
  }
}

PhaseTimes selection_time(const DeviceProfile& profile, const Workload& workload, std::size_t level) {
  check_level(profile, level);
  const double f = profile.levels[level].freq;
  return PhaseTimes{profile.c_sn * workload.d_sn / f, profile.c_pn * workload.d_pn / f};
}

double round_energy(const DeviceProfile& profile, std::size_t level, double t_sn, double t_pn,
                    double t_idle) {
  check_level(profile, level);
  const FrequencyLevel& l = profile.levels[level];
  return l.p_sn * t_sn + l.p_pn * t_pn + profile.p_idle * t_idle;
}

Plan plan_at(const DeviceProfile& profile, const Workload& workload, double deadline, std::size_t level) {
  const PhaseTimes t = selection_time(profile, workload, level);
  Plan plan;
  plan.level = level;
  plan.freq = profile.levels[level].freq;
  plan.t_sn = t.t_sn;
  plan.t_pn = t.t_pn;
  plan.over_deadline = t.busy() > deadline;
  plan.t_idle = plan.over_deadline ? 0.0 : deadline - t.busy();
  plan.energy = round_energy(profile, level, plan.t_sn, plan.t_pn, plan.t_idle);
  return plan;
}

Plan choose_frequency(const DeviceProfile& profile, const Workload& workload, double deadline) {
  if (profile.levels.empty()) {
    throw SpecError("choose_frequency: device '" + profile.name + "' has no levels");
  }
  // Busy time falls as frequency rises, so the feasible levels form a suffix
  // of the ladder. Start at the top and step down while the next level still
  // meets the deadline, keeping the cheapest plan seen. Walking down with <=
  // resolves ties to the lower frequency.
  std::size_t level = profile.top();
  Plan best = plan_at(profile, workload, deadline, level);
  if (best.over_deadline) {
    return best;
  }
  while (level > 0) {
    const Plan next = plan_at(profile, workload, deadline, level - 1);
    if (next.over_deadline) {
      break;
    }
    --level;
    if (next.energy <= best.energy) {
      best = next;
    }
  }
  return best;
}

DeviceProfile reference_profile(std::string name, double nominal_freq, double p_nominal, double p_idle,
                                double c_sn, double c_pn) {
  DeviceProfile profile;
  profile.name = std::move(name);
  profile.c_sn = c_sn;
  profile.c_pn = c_pn;
  profile.p_idle = p_idle;
  for (std::size_t i = 0; i < std::size(kRefSpeed); ++i) {
    const double p = p_nominal * kRefPower[i];
    profile.levels.push_back(FrequencyLevel{nominal_freq * kRefSpeed[i], p, p, "ref" + std::to_string(i + 1)});
  }
  profile.validate();
  return profile;
}

DeviceProfile extended_profile(std::string name, double nominal_freq, std::vector<double> slow_speeds,
                               double p_nominal, double p_idle, double c_sn, double c_pn) {
  DeviceProfile ref = reference_profile(std::move(name), nominal_freq, p_nominal, p_idle, c_sn, c_pn);
  std::sort(slow_speeds.begin(), slow_speeds.end());
  std::vector<FrequencyLevel> levels;
  for (double s : slow_speeds) {
    if (!(s > 0.0) || !(s < 1.0)) {
      throw SpecError("device '" + ref.name + "': slow speeds must lie in (0, 1)");
    }
    const double p = p_idle + (p_nominal - p_idle) * s * s * s;
    levels.push_back(FrequencyLevel{nominal_freq * s, p, p, speed_label(s)});
  }
  levels.insert(levels.end(), ref.levels.begin(), ref.levels.end());
  ref.levels = std::move(levels);
  ref.validate();
  return ref;
}

}  // namespace fedstitch::energy
