#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentguard/model/types.hpp"

namespace agentguard {

enum class AttributeRoot { principal, tool, args, target, result, session };

std::string_view to_string(AttributeRoot r);
std::optional<AttributeRoot> parse_attribute_root(std::string_view s);

// A key into a map, or an index into a list. An index applied to a map looks
// up its decimal spelling; a key applied to a list projects over elements.
using PathSegment = std::variant<std::string, std::size_t>;

struct AttributePath {
  AttributeRoot root = AttributeRoot::args;
  std::vector<PathSegment> segments;

  // Dotted DSL spelling, e.g. `args.files.0.path`.
  std::string to_string() const;
  bool operator==(const AttributePath&) const = default;
};

// What a path is resolved against: the event being decided (or, inside a
// history predicate, the prior event being tested) plus its result if any.
struct EvalContext {
  const ToolCallEvent* event = nullptr;
  const ToolResultEvent* result = nullptr;
  bool result_allowed = false;

  static EvalContext pre(const ToolCallEvent& e) { return {&e, nullptr, false}; }
  static EvalContext post(const ToolCallEvent& e, const ToolResultEvent& r) {
    return {&e, &r, true};
  }
  // Prior events in a session; their result may or may not exist yet.
  static EvalContext prior(const ToolCallEvent& e, const ToolResultEvent* r) {
    return {&e, r, true};
  }
};

// nullopt is ABSENT.
using Resolved = std::optional<Value>;

// Never throws for missing segments. Throws IllegalRoot for `result.*` in a
// context that has no result phase.
Resolved resolve_attribute(const AttributePath& path, const EvalContext& ctx);

// One lookup step; exposed for reuse by the engine.
Resolved lookup_segment(const Value& v, const PathSegment& seg);

Value principal_value(const Principal& p);
Value tool_value(const ToolDescriptor& t);
Value targets_value(const std::vector<NetworkTarget>& targets);

}  // namespace agentguard
