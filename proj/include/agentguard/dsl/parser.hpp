#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "agentguard/dsl/ast.hpp"
#include "agentguard/dsl/diagnostic.hpp"

namespace agentguard::dsl {

struct ParseResult {
  std::optional<PolicySet> policy;  // set iff there are no error diagnostics
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return policy.has_value(); }
};

// Pure function of `text`. Rule order in the result matches source order.
ParseResult parse_policy_set(std::string_view text);

// Canonical text form; re-parses to a structurally equal PolicySet.
std::string serialize_policy_set(const PolicySet& ps);
std::string serialize_condition(const Condition& c);

// Non-fatal checks on a parsed set: unknown tool names (when `known_tools`
// is given), disabled rules, and patterns at risk of catastrophic
// backtracking in other engines.
std::vector<Diagnostic> validate(const PolicySet& ps,
                                 const std::optional<std::vector<ToolDescriptor>>& known_tools =
                                     std::nullopt);

}  // namespace agentguard::dsl
