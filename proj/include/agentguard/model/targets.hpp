#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "agentguard/model/types.hpp"

namespace agentguard {

// Parses one candidate token: either a URL (`scheme://[user@]host[:port][/path]`)
// or a bare `host:port` literal. Hosts are lowercased. Returns nullopt for
// anything else.
std::optional<NetworkTarget> parse_target(std::string_view candidate);

// Every URL or host:port literal found in string leaves of `args`, in
// depth-first leaf order (map keys in sorted order), left to right within a
// string. Unparseable candidates are skipped.
std::vector<NetworkTarget> extract_targets(const Value& args);

}  // namespace agentguard
