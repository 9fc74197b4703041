// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedstitch/fed_client.hpp"

namespace fedstitch::trace {

/// One uploaded report tagged with the round it belongs to.
struct Entry {
  int round = 0;
  client::ClientReport report;
};

/// Line-delimited records, one JSON object per report:
///   {"round", "client", "net", "batch": [...], "scores": [[block, score], ...],
///    "selected": [...], "explored", "epsilon", "d_sn", "d_pn",
///    "plan": {"level", "freq", "t_sn", "t_pn", "t_idle", "energy", "over_deadline"},
///    "evals"}
/// Reals are written in shortest round-trip form, so a parsed report compares
/// equal to the one written.
std::string to_line(const Entry& entry);
Entry parse_line(const std::string& line);

void write(std::ostream& os, const Entry& entry);
/// Reads every non-empty line; throws Error naming the offending line.
std::vector<Entry> read_all(std::istream& is);

}  // namespace fedstitch::trace
