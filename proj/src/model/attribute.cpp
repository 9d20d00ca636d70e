#include "agentguard/model/attribute.hpp"

#include <cctype>

#include "agentguard/common/error.hpp"

namespace agentguard {

std::string_view to_string(AttributeRoot r) {
  switch (r) {
    case AttributeRoot::principal: return "principal";
    case AttributeRoot::tool: return "tool";
    case AttributeRoot::args: return "args";
    case AttributeRoot::target: return "target";
    case AttributeRoot::result: return "result";
    case AttributeRoot::session: return "session";
  }
  return "?";
}

std::optional<AttributeRoot> parse_attribute_root(std::string_view s) {
  if (s == "principal") return AttributeRoot::principal;
  if (s == "tool") return AttributeRoot::tool;
  if (s == "args") return AttributeRoot::args;
  if (s == "target") return AttributeRoot::target;
  if (s == "result") return AttributeRoot::result;
  if (s == "session") return AttributeRoot::session;
  return std::nullopt;
}

namespace {

bool is_plain_identifier(const std::string& key) {
  if (key.empty()) return false;
  const unsigned char first = static_cast<unsigned char>(key[0]);
  if (!(std::isalpha(first) || first == '_')) return false;
  for (unsigned char c : key) {
    if (!(std::isalnum(c) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

std::string AttributePath::to_string() const {
  std::string out(agentguard::to_string(root));
  for (const auto& seg : segments) {
    out.push_back('.');
    if (const auto* idx = std::get_if<std::size_t>(&seg)) {
      out += std::to_string(*idx);
    } else {
      const auto& key = std::get<std::string>(seg);
      if (is_plain_identifier(key)) {
        out += key;
      } else {
        out += Value(key).dump(-1, ' ', false, Value::error_handler_t::replace);
      }
    }
  }
  return out;
}

Resolved lookup_segment(const Value& v, const PathSegment& seg) {
  if (v.is_object()) {
    const std::string key = std::holds_alternative<std::string>(seg)
                                ? std::get<std::string>(seg)
                                : std::to_string(std::get<std::size_t>(seg));
    auto it = v.find(key);
    if (it == v.end()) return std::nullopt;
    return Resolved(std::in_place, *it);
  }
  if (v.is_array()) {
    if (const auto* idx = std::get_if<std::size_t>(&seg)) {
      if (*idx >= v.size()) return std::nullopt;
      return Resolved(std::in_place, v[*idx]);
    }
    Value projected = Value::array();
    for (const auto& element : v) {
      if (auto r = lookup_segment(element, seg)) projected.push_back(std::move(*r));
    }
    if (projected.empty()) return std::nullopt;
    return projected;
  }
  return std::nullopt;
}

Value principal_value(const Principal& p) {
  Value v = Value::object();
  v["agent_id"] = p.agent_id;
  if (p.session_hint) v["session_hint"] = *p.session_hint;
  v["role"] = p.role;
  v["trust_level"] = p.trust_level;
  v["extra"] = p.extra;
  return v;
}

Value tool_value(const ToolDescriptor& t) {
  Value v = Value::object();
  v["name"] = t.name;
  if (t.category) v["category"] = *t.category;
  v["attributes"] = t.attributes;
  return v;
}

Value targets_value(const std::vector<NetworkTarget>& targets) {
  Value v = Value::array();
  for (const auto& t : targets) v.push_back(t);
  return v;
}

Resolved resolve_attribute(const AttributePath& path, const EvalContext& ctx) {
  if (ctx.event == nullptr) throw ValidationError("evaluation context has no event");
  const ToolCallEvent& event = *ctx.event;

  Value root_value;
  const Value* base = nullptr;
  switch (path.root) {
    case AttributeRoot::principal:
      root_value = principal_value(event.principal);
      base = &root_value;
      break;
    case AttributeRoot::tool:
      root_value = tool_value(event.tool);
      base = &root_value;
      break;
    case AttributeRoot::args:
      base = &event.args;
      break;
    case AttributeRoot::target:
      root_value = targets_value(event.targets);
      base = &root_value;
      break;
    case AttributeRoot::session:
      root_value = Value{{"id", event.session_id}, {"seq", event.seq}};
      base = &root_value;
      break;
    case AttributeRoot::result:
      if (!ctx.result_allowed) {
        throw IllegalRoot("result.* paths are only available in post-phase evaluation");
      }
      if (ctx.result == nullptr) return std::nullopt;
      base = &ctx.result->result;
      break;
  }

  // Walk without copying until a projection forces a materialized value.
  Resolved current;
  const Value* cursor = base;
  for (const auto& seg : path.segments) {
    if (cursor->is_object()) {
      const std::string key = std::holds_alternative<std::string>(seg)
                                  ? std::get<std::string>(seg)
                                  : std::to_string(std::get<std::size_t>(seg));
      auto it = cursor->find(key);
      if (it == cursor->end()) return std::nullopt;
      cursor = &*it;
      continue;
    }
    if (cursor->is_array() && std::holds_alternative<std::size_t>(seg)) {
      const auto idx = std::get<std::size_t>(seg);
      if (idx >= cursor->size()) return std::nullopt;
      cursor = &(*cursor)[idx];
      continue;
    }
    auto next = lookup_segment(*cursor, seg);
    if (!next) return std::nullopt;
    current = std::move(next);
    cursor = &*current;
  }
  return Resolved(std::in_place, *cursor);
}

}  // namespace agentguard
