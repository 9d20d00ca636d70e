#include "agentguard/audit/records.hpp"

namespace agentguard::audit {

Value matched_json(const engine::Evaluation& ev) {
  Value out = Value::array();
  for (const auto& m : ev.matched) out.push_back(engine::to_json(m));
  return out;
}

Value decision_record(const ToolCallEvent& event, const ToolResultEvent* result,
                      const engine::Evaluation& ev, const Decision& final, Millis latency,
                      const std::optional<Reviewer>& reviewer) {
  Value r = {{"kind", kDecision},
             {"session_id", event.session_id},
             {"call_id", event.call_id},
             {"seq", event.seq},
             {"phase", to_string(ev.phase)},
             {"event", event},
             {"policy_version", ev.policy_version},
             {"matched", matched_json(ev)},
             {"final", final},
             {"latency_ms", latency.count()}};
  if (result != nullptr) r["result"] = *result;
  if (reviewer) r["reviewer"] = {{"name", reviewer->name}, {"reason", reviewer->reason}};
  return r;
}

Value decision_record_from_pending(const Value& pending, const Decision& final, Millis latency,
                                   const std::optional<Reviewer>& reviewer) {
  Value r = pending;
  r.erase("record_id");
  r.erase("timestamp");
  r.erase("review");
  r["kind"] = kDecision;
  r["final"] = final;
  r["latency_ms"] = latency.count();
  if (reviewer) r["reviewer"] = {{"name", reviewer->name}, {"reason", reviewer->reason}};
  return r;
}

Value review_pending_record(const ToolCallEvent& event, const ToolResultEvent* result,
                            const engine::Evaluation& ev, const review::ReviewItem& item) {
  Value r = {{"kind", kReviewPending},
             {"session_id", event.session_id},
             {"call_id", event.call_id},
             {"seq", event.seq},
             {"phase", to_string(ev.phase)},
             {"event", event},
             {"policy_version", ev.policy_version},
             {"matched", matched_json(ev)},
             {"review",
              {{"review_id", item.review_id},
               {"reason", item.request.reason},
               {"created", format_timestamp(item.created)},
               {"timeout_at", format_timestamp(item.timeout_at)},
               {"timeout_ms", item.request.timeout.count()},
               {"on_timeout", to_string(item.request.on_timeout)}}}};
  if (result != nullptr) r["result"] = *result;
  return r;
}

Value session_started_record(const std::string& session_id, const Principal& principal,
                             const std::string& token_hash) {
  return {{"kind", kSessionStarted},
          {"session_id", session_id},
          {"principal", principal},
          {"token_sha256", token_hash}};
}

Value session_ended_record(const std::string& session_id, std::string_view reason) {
  return {{"kind", kSessionEnded}, {"session_id", session_id}, {"reason", reason}};
}

Value policy_updated_record(std::int64_t version, const std::string& text, std::size_t rule_count,
                            std::string_view source) {
  return {{"kind", kPolicyUpdated},
          {"policy_version", version},
          {"rule_count", rule_count},
          {"source", source},
          {"text", text}};
}

}  // namespace agentguard::audit
