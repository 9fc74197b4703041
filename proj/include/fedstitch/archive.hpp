// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedstitch/fed_server.hpp"
#include "fedstitch/model_zoo.hpp"
#include "fedstitch/stitcher.hpp"

namespace fedstitch::archive {

/// Archive layout version written by this build. Readers reject other versions.
inline constexpr int kVersion = 1;

/// Text archive (JSON) holding a zoo and, optionally, stitched networks with
/// lineage and final client weights.
///
///   {"format": "fedstitch-archive", "version": 1,
///    "zoo": {"world": {...}, "models": [...], "distributions": [...]},
///    "networks": [{"id", "parent", "status", "reason", "created_step",
///                  "votes", "max_depth", "pool_alive": [...],
///                  "segments": [{"block", "adapter"}]}],
///    "weights": [...]}
///
/// Matrices are arrays of rows. Doubles are written in shortest round-trip
/// form, so read-then-write reproduces the original bytes.
struct Contents {
  zoo::ModelZoo zoo;
  std::vector<stitch::StitchedNetwork> networks;
  std::map<NetId, server::Lineage> lineage;
  std::vector<double> weights;
};

std::string write(const Contents& contents);
/// Throws Error on malformed input or a version mismatch.
Contents read(const std::string& text);

}  // namespace fedstitch::archive
