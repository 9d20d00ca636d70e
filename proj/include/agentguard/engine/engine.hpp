#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentguard/common/clock.hpp"
#include "agentguard/dsl/ast.hpp"
#include "agentguard/engine/combine.hpp"
#include "agentguard/engine/history.hpp"
#include "agentguard/llm/inspector.hpp"

namespace agentguard::engine {

enum class Truth { false_, true_, error };

struct TruthResult {
  Truth truth = Truth::false_;
  std::string error;  // set when truth == error
};

// Condition evaluation against one event. Paths resolve through ctx; history
// nodes re-bind ctx to each prior entry in turn.
TruthResult evaluate_condition(const dsl::Condition& c, const EvalContext& ctx,
                               const HistoryView& history);

// The two history node kinds, exposed on their own for tests.
TruthResult evaluate_history_node(const dsl::HistoryExistsNode& node, const HistoryView& history);
TruthResult evaluate_history_node(const dsl::HistoryCountNode& node, const HistoryView& history);

// A rule whose condition was true, or whose evaluation failed.
struct MatchedRule {
  std::string rule_id;
  int priority = 0;
  std::size_t source_index = 0;
  Effect effect;
  bool errored = false;
  std::string diagnostic;                     // evaluation error text when errored
  std::optional<Contribution> contribution;   // nullopt: contributes nothing (yet)
  std::optional<llm::VerdictState> llm_state;  // llm rules that were inspected
  std::string llm_rationale;
};

enum class OutcomeKind { final, pending_review, pending_llm };
std::string_view to_string(OutcomeKind k);

enum class LlmErrorMode { review, deny };

struct Evaluation {
  std::string call_id;
  Phase phase = Phase::pre;
  std::int64_t policy_version = 0;
  std::vector<MatchedRule> matched;  // priority desc, then source order

  OutcomeKind outcome = OutcomeKind::final;
  std::optional<Decision> decision;        // outcome == final
  std::optional<ReviewParams> review;      // outcome == pending_review
  std::string review_reason;               // outcome == pending_review
  std::optional<std::string> review_id;    // filled in by the review queue
  std::vector<std::string> pending_llm;    // outcome == pending_llm

  Timestamp started{};
  Timestamp finished{};

  Combined combined() const;
};

// Pre-phase when `result` is null, post-phase otherwise. Never throws on
// policy content; a rule whose condition errors contributes ps.on_eval_error.
// When an llm rule matches and nothing has already forced deny, the outcome
// is pending_llm; call `apply_llm_verdicts` to finish.
Evaluation evaluate(const ToolCallEvent& event, const ToolResultEvent* result,
                    const dsl::PolicySet& ps, const HistoryView& history,
                    const Clock& clock);

// Resolves pending llm rules from verdicts keyed by rule id. A missing
// verdict counts as an error.
void apply_llm_verdicts(Evaluation& ev, const dsl::PolicySet& ps,
                        const std::map<std::string, llm::InspectorVerdict>& verdicts,
                        LlmErrorMode on_error, const Clock& clock);

// evaluate + inspection of every pending llm rule through `inspector`.
Evaluation evaluate_with_inspector(const ToolCallEvent& event, const ToolResultEvent* result,
                                   const dsl::PolicySet& ps, const HistoryView& history,
                                   const llm::Inspector* inspector, LlmErrorMode on_error,
                                   const Clock& clock);

Value to_json(const MatchedRule& m);

}  // namespace agentguard::engine
