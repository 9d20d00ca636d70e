#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentguard/common/clock.hpp"

namespace agentguard {

// Tree-structured value: string / number / boolean / null / list / map.
using Value = nlohmann::json;

inline constexpr std::size_t kMaxArgsDepth = 32;

// Nesting depth of a value tree; scalars have depth 1.
std::size_t value_depth(const Value& v);

enum class Phase { pre, post };
enum class Verdict { allow, deny };
enum class Via { rule, llm, review, timeout, default_ };
enum class EffectKind { allow, deny, review, llm };
enum class FlagAction { deny, review };
enum class ResultStatus { ok, error };

std::string_view to_string(Phase p);
std::string_view to_string(Verdict v);
std::string_view to_string(Via v);
std::string_view to_string(EffectKind k);
std::string_view to_string(FlagAction a);
std::string_view to_string(ResultStatus s);

std::optional<Phase> parse_phase(std::string_view s);
std::optional<Verdict> parse_verdict(std::string_view s);
std::optional<Via> parse_via(std::string_view s);
std::optional<EffectKind> parse_effect_kind(std::string_view s);
std::optional<FlagAction> parse_flag_action(std::string_view s);
std::optional<ResultStatus> parse_result_status(std::string_view s);

// Identity on whose behalf a tool call is made. trust_level is an ordinal:
// 0 = untrusted external-content handler ... 3 = fully trusted operator.
struct Principal {
  std::string agent_id;
  std::optional<std::string> session_hint;
  std::string role;
  int trust_level = 0;
  std::map<std::string, std::string> extra;

  void validate() const;
  bool operator==(const Principal&) const = default;
};

struct ToolDescriptor {
  std::string name;
  std::optional<std::string> category;
  std::map<std::string, std::string> attributes;

  void validate() const;
  bool operator==(const ToolDescriptor&) const = default;
};

struct NetworkTarget {
  std::optional<std::string> scheme;
  std::string host;
  std::optional<int> port;
  std::optional<std::string> path;

  void validate() const;
  bool operator==(const NetworkTarget&) const = default;
};

struct ToolCallEvent {
  std::string call_id;
  std::string session_id;
  std::uint64_t seq = 0;
  Principal principal;
  ToolDescriptor tool;
  Value args = Value::object();
  std::vector<NetworkTarget> targets;
  Timestamp timestamp{};

  bool operator==(const ToolCallEvent&) const = default;
};

struct ToolResultEvent {
  std::string call_id;
  ResultStatus status = ResultStatus::ok;
  Value result;
  Timestamp timestamp{};

  bool operator==(const ToolResultEvent&) const = default;
};

struct ReviewParams {
  Millis timeout{300'000};
  Verdict on_timeout = Verdict::deny;
  bool operator==(const ReviewParams&) const = default;
};

struct LlmParams {
  std::string prompt_template;
  FlagAction on_flag = FlagAction::deny;
  int max_history = 10;
  bool operator==(const LlmParams&) const = default;
};

// A rule's consequence. `review` is present iff kind == review and `llm` iff
// kind == llm; use the factories to keep that true.
struct Effect {
  EffectKind kind = EffectKind::deny;
  std::string reason;
  std::optional<ReviewParams> review;
  std::optional<LlmParams> llm;

  static Effect allow(std::string reason = {});
  static Effect deny(std::string reason = {});
  static Effect review_for(ReviewParams params, std::string reason = {});
  static Effect llm_check(LlmParams params, std::string reason = {});

  void validate() const;
  bool operator==(const Effect&) const = default;
};

struct Decision {
  Verdict verdict = Verdict::deny;
  Via via = Via::default_;
  std::string reason;
  std::optional<std::string> review_id;

  void validate() const;
  bool operator==(const Decision&) const = default;
};

// JSON wire/audit representation. from_json throws ValidationError on
// malformed input and validates invariants.
void to_json(Value& j, const Principal& p);
void from_json(const Value& j, Principal& p);
void to_json(Value& j, const ToolDescriptor& t);
void from_json(const Value& j, ToolDescriptor& t);
void to_json(Value& j, const NetworkTarget& t);
void from_json(const Value& j, NetworkTarget& t);
void to_json(Value& j, const ToolCallEvent& e);
void from_json(const Value& j, ToolCallEvent& e);
void to_json(Value& j, const ToolResultEvent& e);
void from_json(const Value& j, ToolResultEvent& e);
void to_json(Value& j, const Effect& e);
void from_json(const Value& j, Effect& e);
void to_json(Value& j, const Decision& d);
void from_json(const Value& j, Decision& d);

}  // namespace agentguard
