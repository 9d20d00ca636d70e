#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "agentguard/audit/audit_log.hpp"
#include "agentguard/common/error.hpp"
#include "agentguard/common/ids.hpp"
#include "agentguard/dsl/diagnostic.hpp"
#include "agentguard/dsl/templates.hpp"
#include "agentguard/llm/inspector.hpp"
#include "agentguard/review/review_queue.hpp"
#include "agentguard/server/config.hpp"
#include "agentguard/session/session_manager.hpp"

namespace agentguard::server {

// Policy text that failed to parse; carries the diagnostics.
class PolicyRejected : public Error {
 public:
  explicit PolicyRejected(std::vector<dsl::Diagnostic> diagnostics);
  const std::vector<dsl::Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<dsl::Diagnostic> diagnostics_;
};

struct CheckRequest {
  ToolDescriptor tool;
  Value args = Value::object();
  std::optional<std::vector<NetworkTarget>> targets;  // derived from args when absent
  Millis wait{0};
};

struct ReportRequest {
  std::string call_id;
  ResultStatus status = ResultStatus::ok;
  Value result;
  Millis wait{0};
};

// Answer to a check or a report.
struct CallResponse {
  std::string call_id;
  std::uint64_t seq = 0;
  Phase phase = Phase::pre;
  std::int64_t policy_version = 0;
  std::optional<Decision> decision;        // decided
  std::optional<std::string> decision_id;  // pending review; poll GET /v1/decisions/{id}
  std::vector<std::string> matched;
};
Value to_json(const CallResponse& r);

struct DecisionStatus {
  std::string decision_id;
  std::string session_id;
  std::string call_id;
  Phase phase = Phase::pre;
  std::optional<Decision> decision;  // unset while pending
};
Value to_json(const DecisionStatus& s);

struct PolicySnapshot {
  std::shared_ptr<const dsl::PolicySet> policy;
  std::string text;
};

struct PolicyUpdateResult {
  std::int64_t version = 0;
  std::vector<dsl::Diagnostic> warnings;
};

struct ServiceDeps {
  const Clock* clock = nullptr;                  // default: system clock
  std::shared_ptr<IdGenerator> ids;              // default: random ids
  std::shared_ptr<llm::Backend> llm_backend;     // default: from config
};

// Transport-independent control server. Every public method is thread-safe.
class Service {
 public:
  // Loads the policy (`policy_text` wins over config.policy_path), opens the
  // audit log and rebuilds sessions and pending reviews from it. Throws
  // PolicyRejected or StorageError.
  explicit Service(ServerConfig config, ServiceDeps deps = {},
                   std::optional<std::string> policy_text = std::nullopt);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Periodic review expiry and idle-session expiry.
  void start_background();
  void stop_background();
  void sweep();

  session::CreatedSession create_session(const Principal& principal);
  bool authenticate_session(const std::string& session_id, std::string_view token) const;
  bool authenticate_admin(std::string_view token) const;
  const std::string& admin_token() const { return config_.admin_token; }

  CallResponse check(const std::string& session_id, const CheckRequest& request);
  CallResponse report(const std::string& session_id, const ReportRequest& request);
  DecisionStatus decision(const std::string& decision_id, Millis wait);
  void end_session(const std::string& session_id);

  Value list_sessions() const;
  Value session_detail(const std::string& session_id) const;

  PolicySnapshot policy() const;
  PolicyUpdateResult update_policy(const std::string& text,
                                   std::optional<std::int64_t> expected_version = std::nullopt);

  std::vector<review::ReviewItem> pending_reviews();
  Decision resolve_review(const std::string& review_id, Verdict verdict,
                          const std::string& reviewer, const std::string& reason);

  audit::AuditLog& audit_log() { return *audit_; }
  const dsl::TemplateCatalog& templates() const { return templates_; }
  const ServerConfig& config() const { return config_; }
  const Clock& clock() const { return *clock_; }
  session::SessionManager& sessions() { return *sessions_; }

  // Test hook invoked at named points ("after_audit_append").
  using FaultHook = std::function<void(std::string_view point)>;
  void set_fault_hook(FaultHook hook);

 private:
  struct PendingContext {
    Value record;  // the review_pending audit record
    Timestamp started{};
  };

  void load_policy(const std::string& text, std::optional<std::int64_t> logged_version,
                   const std::optional<std::string>& logged_text);
  void recover();
  void on_review_terminal(const review::ReviewItem& item);
  void fault(std::string_view point);
  CallResponse fail_open_or_throw(const std::string& what, const std::string& call_id,
                                  std::uint64_t seq, Phase phase);
  CallResponse finish(const ToolCallEvent& event, const ToolResultEvent* result,
                      engine::Evaluation& ev, std::unique_lock<std::mutex>& session_lock,
                      Millis wait);
  std::shared_ptr<const dsl::PolicySet> active_policy() const;
  void persist_policy_text(const std::string& text);

  ServerConfig config_;
  std::unique_ptr<SystemClock> own_clock_;
  const Clock* clock_;
  std::shared_ptr<IdGenerator> ids_;
  std::unique_ptr<llm::Inspector> inspector_;
  std::unique_ptr<audit::AuditLog> audit_;
  std::unique_ptr<session::SessionManager> sessions_;
  std::unique_ptr<review::ReviewQueue> reviews_;
  dsl::TemplateCatalog templates_;

  mutable std::mutex policy_mutex_;
  std::shared_ptr<const dsl::PolicySet> policy_;
  std::string policy_text_;
  std::mutex update_mutex_;

  std::mutex pending_mutex_;
  std::map<std::string, PendingContext> pending_;

  std::mutex hook_mutex_;
  FaultHook fault_hook_;

  std::mutex bg_mutex_;
  std::condition_variable bg_cv_;
  bool bg_running_ = false;
  std::thread bg_thread_;
};

}  // namespace agentguard::server
