// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace fedstitch {

/// Integer identifier tagged by the entity it names, so block, model, client
/// and network ids cannot be mixed up.
template <typename Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  constexpr auto operator<=>(const Id&) const = default;
};

template <typename Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
  return os << id.value;
}

using BlockId = Id<struct BlockTag>;
using ModelId = Id<struct ModelTag>;
using ClientId = Id<struct ClientTag>;
using NetId = Id<struct NetTag>;

}  // namespace fedstitch

template <typename Tag>
struct std::hash<fedstitch::Id<Tag>> {
  std::size_t operator()(fedstitch::Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
