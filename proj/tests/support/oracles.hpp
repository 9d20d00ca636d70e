#pragma once

// Random generators and independent reference implementations used by the
// unit tests and the acceptance suite. Nothing here calls into the engine,
// the attribute resolver or the combiner; the references are written from
// the documented semantics so the two can be compared.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "agentguard/dsl/ast.hpp"
#include "agentguard/engine/combine.hpp"
#include "agentguard/engine/engine.hpp"
#include "agentguard/engine/history.hpp"
#include "agentguard/llm/inspector.hpp"
#include "agentguard/model/attribute.hpp"
#include "agentguard/model/types.hpp"

namespace agentguard::testing {

using Rng = std::mt19937_64;

// ---- value trees ----------------------------------------------------------

Value random_tree(Rng& rng, int depth);
std::vector<PathSegment> random_segments(Rng& rng, const Value& tree, int max_len);

// Reference path lookup over a value: map key (indices use their decimal
// spelling), list index, or projection of a key over list elements.
std::optional<Value> reference_lookup(const Value& root, const std::vector<PathSegment>& segs);

// ---- targets ---------------------------------------------------------------

// Reference URL / host:port scanner over the string leaves of args.
std::vector<NetworkTarget> reference_targets(const Value& args);

// ---- combine ---------------------------------------------------------------

engine::Combined reference_combine(const std::vector<engine::Contribution>& cs);

// ---- conditions and policies --------------------------------------------

struct GenOptions {
  int max_depth = 3;
  bool allow_history = true;
  bool allow_llm = true;
  bool for_round_trip = false;  // exotic keys and strings, every node kind
};

// Patterns on which the policy dialect and std::regex ECMAScript agree.
const std::vector<std::string>& oracle_patterns();

dsl::Condition random_condition(Rng& rng, Phase phase, const GenOptions& opt, int depth = 0,
                                bool in_history = false);
dsl::PolicySet random_policy(Rng& rng, std::size_t max_rules, const GenOptions& opt);

ToolCallEvent random_event(Rng& rng, const std::string& session_id, std::uint64_t seq);
ToolResultEvent random_result(Rng& rng, const std::string& call_id);
engine::HistoryView random_history(Rng& rng, const std::string& session_id, std::size_t max_len);

// ---- reference evaluator --------------------------------------------------

enum class Tri { f, t, e };

Tri reference_condition(const dsl::Condition& c, const ToolCallEvent& event,
                        const ToolResultEvent* result, bool result_allowed,
                        const engine::HistoryView& history);

struct ReferenceOutcome {
  std::vector<std::string> matched;  // priority desc, source order
  std::string kind;                  // final | pending_review
  std::optional<Verdict> verdict;
  std::optional<Via> via;
  std::optional<ReviewParams> review;
};

ReferenceOutcome reference_decide(const dsl::PolicySet& ps, const ToolCallEvent& event,
                                  const ToolResultEvent* result,
                                  const engine::HistoryView& history,
                                  const std::map<std::string, llm::VerdictState>& llm_verdicts,
                                  engine::LlmErrorMode on_error);

// Runs the engine on one case and compares with the reference. Returns an
// empty string on agreement, otherwise a description of the difference.
std::string compare_engine_with_reference(Rng& rng);

}  // namespace agentguard::testing
