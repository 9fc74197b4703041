// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fedstitch::energy {

/// One DVFS operating point. `freq` is the effective processing rate in
/// cycles per second; the two inference phases may draw different power.
struct FrequencyLevel {
  double freq = 1e9;
  double p_sn = 5.0;  // watts while running the stitched network
  double p_pn = 5.0;  // watts while running the reference model prefix
  std::string label;
};

struct DeviceProfile {
  std::string name;
  /// Cycles to push one data object through one block, per phase.
  double c_sn = 1e6;
  double c_pn = 1e6;
  /// Strictly increasing in freq.
  std::vector<FrequencyLevel> levels;
  double p_idle = 1.0;

  /// Throws SpecError when an invariant does not hold.
  void validate() const;
  std::size_t top() const { return levels.size() - 1; }
};

/// Object counts D for one round, split by phase. A data object processed by
/// one block counts once, so a batch of b rows through a depth-d network is
/// b * d objects.
struct Workload {
  double d_sn = 0.0;
  double d_pn = 0.0;
};

struct PhaseTimes {
  double t_sn = 0.0;
  double t_pn = 0.0;

  double busy() const { return t_sn + t_pn; }
};

struct Plan {
  std::size_t level = 0;
  double freq = 0.0;
  double t_sn = 0.0;
  double t_pn = 0.0;
  /// Slack up to the deadline; zero for an over-deadline plan.
  double t_idle = 0.0;
  double energy = 0.0;
  bool over_deadline = false;

  double busy() const { return t_sn + t_pn; }
};

/// t = c * D / f for each phase.
PhaseTimes selection_time(const DeviceProfile& profile, const Workload& workload, std::size_t level);

/// E = p_sn t_sn + p_pn t_pn + p_idle t_idle.
double round_energy(const DeviceProfile& profile, std::size_t level, double t_sn, double t_pn,
                    double t_idle);

/// Executes the round at `level`, idling for whatever slack remains before
/// `deadline` (none when the level misses it).
Plan plan_at(const DeviceProfile& profile, const Workload& workload, double deadline, std::size_t level);

/// Minimum-energy level whose busy time fits within `deadline`, ties to the
/// lower frequency. When even the top level misses, returns the top level
/// flagged over_deadline.
Plan choose_frequency(const DeviceProfile& profile, const Workload& workload, double deadline);

/// Three operating points with relative speeds 1, 1.21, 1.38 and relative
/// inference power 1, 1.25, 1.14 around (nominal_freq, p_nominal).
DeviceProfile reference_profile(std::string name, double nominal_freq, double p_nominal = 5.0,
                                double p_idle = 1.0, double c_sn = 1e6, double c_pn = 1e6);

/// reference_profile plus slower points below nominal. Their power follows
/// p_idle + (p_nominal - p_idle) * s^3 for relative speed s, the usual
/// voltage-scaled dynamic power curve.
DeviceProfile extended_profile(std::string name, double nominal_freq, std::vector<double> slow_speeds,
                               double p_nominal = 5.0, double p_idle = 1.0, double c_sn = 1e6,
                               double c_pn = 1e6);

}  // namespace fedstitch::energy
