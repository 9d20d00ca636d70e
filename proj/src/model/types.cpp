#include "agentguard/model/types.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "agentguard/common/error.hpp"

namespace agentguard {
namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table,
                        std::string_view s) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<std::string_view, E>, N>& table, E v) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, Phase>, 2> kPhases{{
    {"pre", Phase::pre},
    {"post", Phase::post},
}};
constexpr std::array<std::pair<std::string_view, Verdict>, 2> kVerdicts{{
    {"allow", Verdict::allow},
    {"deny", Verdict::deny},
}};
constexpr std::array<std::pair<std::string_view, Via>, 5> kVias{{
    {"rule", Via::rule},
    {"llm", Via::llm},
    {"review", Via::review},
    {"timeout", Via::timeout},
    {"default", Via::default_},
}};
constexpr std::array<std::pair<std::string_view, EffectKind>, 4> kEffectKinds{{
    {"allow", EffectKind::allow},
    {"deny", EffectKind::deny},
    {"review", EffectKind::review},
    {"llm", EffectKind::llm},
}};
constexpr std::array<std::pair<std::string_view, FlagAction>, 2> kFlagActions{{
    {"deny", FlagAction::deny},
    {"review", FlagAction::review},
}};
constexpr std::array<std::pair<std::string_view, ResultStatus>, 2> kStatuses{{
    {"ok", ResultStatus::ok},
    {"error", ResultStatus::error},
}};

const Value& require(const Value& j, const char* key) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const Value& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const Value& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::map<std::string, std::string> string_map(const Value& j, const char* key) {
  std::map<std::string, std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_object()) throw ValidationError(std::string("field '") + key + "' must be an object");
  for (const auto& [k, v] : it->items()) {
    if (!v.is_string()) {
      throw ValidationError(std::string("field '") + key + "." + k + "' must be a string");
    }
    out.emplace(k, v.get<std::string>());
  }
  return out;
}

template <typename E, std::size_t N>
E require_enum(const Value& j, const char* key,
               const std::array<std::pair<std::string_view, E>, N>& table) {
  const auto s = require_string(j, key);
  auto v = lookup(table, s);
  if (!v) throw ValidationError(std::string("field '") + key + "' has invalid value '" + s + "'");
  return *v;
}

Timestamp require_timestamp(const Value& j, const char* key) {
  const auto s = require_string(j, key);
  auto t = parse_timestamp(s);
  if (!t) throw ValidationError(std::string("field '") + key + "' is not an RFC 3339 timestamp");
  return *t;
}

}  // namespace

std::size_t value_depth(const Value& v) {
  if (v.is_object() || v.is_array()) {
    std::size_t deepest = 0;
    for (const auto& child : v) deepest = std::max(deepest, value_depth(child));
    return deepest + 1;
  }
  return 1;
}

std::string_view to_string(Phase p) { return name_of(kPhases, p); }
std::string_view to_string(Verdict v) { return name_of(kVerdicts, v); }
std::string_view to_string(Via v) { return name_of(kVias, v); }
std::string_view to_string(EffectKind k) { return name_of(kEffectKinds, k); }
std::string_view to_string(FlagAction a) { return name_of(kFlagActions, a); }
std::string_view to_string(ResultStatus s) { return name_of(kStatuses, s); }

std::optional<Phase> parse_phase(std::string_view s) { return lookup(kPhases, s); }
std::optional<Verdict> parse_verdict(std::string_view s) { return lookup(kVerdicts, s); }
std::optional<Via> parse_via(std::string_view s) { return lookup(kVias, s); }
std::optional<EffectKind> parse_effect_kind(std::string_view s) { return lookup(kEffectKinds, s); }
std::optional<FlagAction> parse_flag_action(std::string_view s) { return lookup(kFlagActions, s); }
std::optional<ResultStatus> parse_result_status(std::string_view s) { return lookup(kStatuses, s); }

void Principal::validate() const {
  if (agent_id.empty()) throw ValidationError("principal.agent_id must be non-empty");
  if (trust_level < 0 || trust_level > 3) {
    throw ValidationError("principal.trust_level must be within [0,3]");
  }
  for (const auto& [k, _] : extra) {
    if (k.empty()) throw ValidationError("principal.extra keys must be non-empty");
  }
}

void ToolDescriptor::validate() const {
  if (name.empty()) throw ValidationError("tool.name must be non-empty");
}

void NetworkTarget::validate() const {
  if (host.empty()) throw ValidationError("target.host must be non-empty");
  if (port && (*port < 1 || *port > 65535)) {
    throw ValidationError("target.port must be within [1,65535]");
  }
}

Effect Effect::allow(std::string reason) { return Effect{EffectKind::allow, std::move(reason), {}, {}}; }
Effect Effect::deny(std::string reason) { return Effect{EffectKind::deny, std::move(reason), {}, {}}; }
Effect Effect::review_for(ReviewParams params, std::string reason) {
  return Effect{EffectKind::review, std::move(reason), params, {}};
}
Effect Effect::llm_check(LlmParams params, std::string reason) {
  return Effect{EffectKind::llm, std::move(reason), {}, std::move(params)};
}

void Effect::validate() const {
  if (review.has_value() != (kind == EffectKind::review)) {
    throw ValidationError("review parameters present exactly when effect is review");
  }
  if (llm.has_value() != (kind == EffectKind::llm)) {
    throw ValidationError("llm parameters present exactly when effect is llm");
  }
  if (review && review->timeout.count() <= 0) {
    throw ValidationError("review timeout must be positive");
  }
  if (llm && llm->max_history < 0) throw ValidationError("max_history must be non-negative");
}

void Decision::validate() const {
  if (via == Via::review && !review_id) {
    throw ValidationError("a decision reached via review must carry a review_id");
  }
}

void to_json(Value& j, const Principal& p) {
  j = Value::object();
  j["agent_id"] = p.agent_id;
  if (p.session_hint) j["session_hint"] = *p.session_hint;
  j["role"] = p.role;
  j["trust_level"] = p.trust_level;
  j["extra"] = p.extra;
}

void from_json(const Value& j, Principal& p) {
  p.agent_id = require_string(j, "agent_id");
  p.session_hint = optional_string(j, "session_hint");
  p.role = optional_string(j, "role").value_or("");
  p.trust_level = 0;
  if (auto it = j.find("trust_level"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ValidationError("field 'trust_level' must be an integer");
    p.trust_level = it->get<int>();
  }
  p.extra = string_map(j, "extra");
  p.validate();
}

void to_json(Value& j, const ToolDescriptor& t) {
  j = Value::object();
  j["name"] = t.name;
  if (t.category) j["category"] = *t.category;
  j["attributes"] = t.attributes;
}

void from_json(const Value& j, ToolDescriptor& t) {
  t.name = require_string(j, "name");
  t.category = optional_string(j, "category");
  t.attributes = string_map(j, "attributes");
  t.validate();
}

void to_json(Value& j, const NetworkTarget& t) {
  j = Value::object();
  if (t.scheme) j["scheme"] = *t.scheme;
  j["host"] = t.host;
  if (t.port) j["port"] = *t.port;
  if (t.path) j["path"] = *t.path;
}

void from_json(const Value& j, NetworkTarget& t) {
  t.scheme = optional_string(j, "scheme");
  t.host = require_string(j, "host");
  t.port.reset();
  if (auto it = j.find("port"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw ValidationError("field 'port' must be an integer");
    t.port = it->get<int>();
  }
  t.path = optional_string(j, "path");
  t.validate();
}

void to_json(Value& j, const ToolCallEvent& e) {
  j = Value::object();
  j["call_id"] = e.call_id;
  j["session_id"] = e.session_id;
  j["seq"] = e.seq;
  j["principal"] = e.principal;
  j["tool"] = e.tool;
  j["args"] = e.args;
  j["targets"] = e.targets;
  j["timestamp"] = format_timestamp(e.timestamp);
}

void from_json(const Value& j, ToolCallEvent& e) {
  e.call_id = require_string(j, "call_id");
  e.session_id = require_string(j, "session_id");
  const auto& seq = require(j, "seq");
  if (!seq.is_number_unsigned() && !seq.is_number_integer()) {
    throw ValidationError("field 'seq' must be an integer");
  }
  e.seq = seq.get<std::uint64_t>();
  e.principal = require(j, "principal").get<Principal>();
  e.tool = require(j, "tool").get<ToolDescriptor>();
  e.args = j.value("args", Value::object());
  e.targets.clear();
  if (auto it = j.find("targets"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("field 'targets' must be a list");
    for (const auto& t : *it) e.targets.push_back(t.get<NetworkTarget>());
  }
  e.timestamp = require_timestamp(j, "timestamp");
}

void to_json(Value& j, const ToolResultEvent& e) {
  j = Value::object();
  j["call_id"] = e.call_id;
  j["status"] = to_string(e.status);
  j["result"] = e.result;
  j["timestamp"] = format_timestamp(e.timestamp);
}

void from_json(const Value& j, ToolResultEvent& e) {
  e.call_id = require_string(j, "call_id");
  e.status = require_enum(j, "status", kStatuses);
  e.result = j.value("result", Value());
  e.timestamp = require_timestamp(j, "timestamp");
}

void to_json(Value& j, const Effect& e) {
  j = Value::object();
  j["kind"] = to_string(e.kind);
  if (!e.reason.empty()) j["reason"] = e.reason;
  if (e.review) {
    j["review_timeout_ms"] = e.review->timeout.count();
    j["on_timeout"] = to_string(e.review->on_timeout);
  }
  if (e.llm) {
    j["prompt_template"] = e.llm->prompt_template;
    j["on_flag"] = to_string(e.llm->on_flag);
    j["max_history"] = e.llm->max_history;
  }
}

void from_json(const Value& j, Effect& e) {
  e.kind = require_enum(j, "kind", kEffectKinds);
  e.reason = optional_string(j, "reason").value_or("");
  e.review.reset();
  e.llm.reset();
  if (e.kind == EffectKind::review) {
    ReviewParams params;
    params.timeout = Millis{j.value("review_timeout_ms", params.timeout.count())};
    if (j.contains("on_timeout")) params.on_timeout = require_enum(j, "on_timeout", kVerdicts);
    e.review = params;
  } else if (e.kind == EffectKind::llm) {
    LlmParams params;
    params.prompt_template = require_string(j, "prompt_template");
    if (j.contains("on_flag")) params.on_flag = require_enum(j, "on_flag", kFlagActions);
    params.max_history = j.value("max_history", params.max_history);
    e.llm = std::move(params);
  }
  e.validate();
}

void to_json(Value& j, const Decision& d) {
  j = Value::object();
  j["verdict"] = to_string(d.verdict);
  j["via"] = to_string(d.via);
  j["reason"] = d.reason;
  if (d.review_id) j["review_id"] = *d.review_id;
}

void from_json(const Value& j, Decision& d) {
  d.verdict = require_enum(j, "verdict", kVerdicts);
  d.via = require_enum(j, "via", kVias);
  d.reason = optional_string(j, "reason").value_or("");
  d.review_id = optional_string(j, "review_id");
  d.validate();
}

}  // namespace agentguard
