#pragma once

#include <optional>
#include <string>

#include "agentguard/engine/engine.hpp"
#include "agentguard/model/types.hpp"
#include "agentguard/review/review_queue.hpp"

namespace agentguard::audit {

// Record kinds; each builder returns the payload without record_id, which
// the log assigns.
inline constexpr const char* kDecision = "decision";
inline constexpr const char* kSessionStarted = "session_started";
inline constexpr const char* kSessionEnded = "session_ended";
inline constexpr const char* kReviewPending = "review_pending";
inline constexpr const char* kPolicyUpdated = "policy_updated";

struct Reviewer {
  std::string name;
  std::string reason;
};

Value matched_json(const engine::Evaluation& ev);

Value decision_record(const ToolCallEvent& event, const ToolResultEvent* result,
                      const engine::Evaluation& ev, const Decision& final, Millis latency,
                      const std::optional<Reviewer>& reviewer = std::nullopt);

// Same record for a decision reached later (review resolution, timeout),
// from the snapshot stored in the pending record.
Value decision_record_from_pending(const Value& pending, const Decision& final, Millis latency,
                                   const std::optional<Reviewer>& reviewer);

Value review_pending_record(const ToolCallEvent& event, const ToolResultEvent* result,
                            const engine::Evaluation& ev, const review::ReviewItem& item);

Value session_started_record(const std::string& session_id, const Principal& principal,
                             const std::string& token_hash);
Value session_ended_record(const std::string& session_id, std::string_view reason);
Value policy_updated_record(std::int64_t version, const std::string& text, std::size_t rule_count,
                            std::string_view source);

}  // namespace agentguard::audit
