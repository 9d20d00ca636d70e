#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agentguard/replay/trace.hpp"
#include "agentguard/server/service.hpp"

namespace agentguard::replay {

enum class ReviewAs { deny, allow, pending };
std::optional<ReviewAs> parse_review_as(std::string_view s);

// What a replay target answered for one check or report.
struct StepResult {
  std::string call_id;  // target-side call id
  std::optional<Decision> decision;
  std::optional<std::string> review_id;  // set when the step went to review
  std::vector<std::string> matched;
};

// Where records are sent: an embedded Service or a live server.
class Target {
 public:
  virtual ~Target() = default;
  virtual void open_session(const std::string& key, const Principal& principal) = 0;
  virtual StepResult check(const std::string& key, const server::CheckRequest& req) = 0;
  virtual StepResult report(const std::string& key, const server::ReportRequest& req) = 0;
  virtual Decision resolve(const std::string& review_id, Verdict verdict, const std::string& reason) = 0;
};

// In-process Service with a memory audit log, a fixed clock and sequential
// ids, so that identical inputs give identical reports.
class EmbeddedTarget final : public Target {
 public:
  EmbeddedTarget(const std::string& policy_text, std::shared_ptr<llm::Backend> llm_backend);
  ~EmbeddedTarget() override;

  void open_session(const std::string& key, const Principal& principal) override;
  StepResult check(const std::string& key, const server::CheckRequest& req) override;
  StepResult report(const std::string& key, const server::ReportRequest& req) override;
  Decision resolve(const std::string& review_id, Verdict verdict, const std::string& reason) override;

  server::Service& service() { return *service_; }

 private:
  std::unique_ptr<ManualClock> clock_;
  std::unique_ptr<server::Service> service_;
  std::map<std::string, std::string> sessions_;  // trace key -> session id
};

// A running control server reached over HTTP.
class HttpTarget final : public Target {
 public:
  HttpTarget(const std::string& base_url, std::string admin_token);
  ~HttpTarget() override;

  // Installs policy text on the server (admin endpoint).
  void install_policy(const std::string& text);

  void open_session(const std::string& key, const Principal& principal) override;
  StepResult check(const std::string& key, const server::CheckRequest& req) override;
  StepResult report(const std::string& key, const server::ReportRequest& req) override;
  Decision resolve(const std::string& review_id, Verdict verdict, const std::string& reason) override;

 private:
  Value call(const std::string& method, const std::string& path, const Value& body,
             const std::string& token);

  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string admin_token_;
  std::map<std::string, std::pair<std::string, std::string>> sessions_;  // key -> (id, token)
};

struct ReplayOptions {
  ReviewAs review_as = ReviewAs::deny;
};

struct RecordOutcome {
  std::size_t index = 0;
  std::size_t line = 0;
  RecordKind kind = RecordKind::call;
  std::string session;
  std::string ref;
  std::string tool;
  std::string outcome;  // allow | deny | pending | error
  bool reviewed = false;
  std::string via;
  std::string reason;
  std::vector<std::string> matched;
  std::optional<std::string> expect;
  std::string error;
  bool ok = true;
};

struct ReplayReport {
  std::vector<RecordOutcome> records;
  std::size_t mismatches = 0;

  bool ok() const { return mismatches == 0; }
  std::string text() const;
  Value json() const;
};

// Expectations: "review" holds iff the step went to review; "allow"/"deny"
// hold iff the final verdict is that verdict. Records that error fail.
ReplayReport replay(const std::vector<TraceRecord>& trace, Target& target,
                    const ReplayOptions& options = {});

}  // namespace agentguard::replay
