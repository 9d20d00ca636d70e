#include "agentguard/replay/replay.hpp"

#include <sstream>

#include <httplib.h>

namespace agentguard::replay {

namespace {

StepResult step_from(const server::CallResponse& r) {
  return {r.call_id, r.decision, r.decision_id, r.matched};
}

StepResult step_from_json(const Value& j) {
  StepResult s;
  s.call_id = j.value("call_id", "");
  if (j.contains("decision")) s.decision = j.at("decision").get<Decision>();
  if (j.contains("decision_id")) s.review_id = j.at("decision_id").get<std::string>();
  if (j.contains("matched")) s.matched = j.at("matched").get<std::vector<std::string>>();
  return s;
}

Principal default_principal(const std::string& key) {
  Principal p;
  p.agent_id = key;
  p.role = "agent";
  return p;
}

std::string join(const std::vector<std::string>& v) {
  if (v.empty()) return "-";
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ",";
    out += s;
  }
  return out;
}

}  // namespace

std::optional<ReviewAs> parse_review_as(std::string_view s) {
  if (s == "deny") return ReviewAs::deny;
  if (s == "allow") return ReviewAs::allow;
  if (s == "pending") return ReviewAs::pending;
  return std::nullopt;
}

// ---- embedded ------------------------------------------------------------

EmbeddedTarget::EmbeddedTarget(const std::string& policy_text,
                               std::shared_ptr<llm::Backend> llm_backend)
    : clock_(std::make_unique<ManualClock>()) {
  server::ServerConfig cfg;
  cfg.audit_fsync = false;
  cfg.admin_token = "replay";
  cfg.persist_policy_updates = false;
  cfg.llm.backend = llm_backend ? "mock" : "none";
  server::ServiceDeps deps;
  deps.clock = clock_.get();
  deps.ids = std::make_shared<SequentialIds>();
  deps.llm_backend = std::move(llm_backend);
  service_ = std::make_unique<server::Service>(cfg, deps, policy_text);
}

EmbeddedTarget::~EmbeddedTarget() = default;

void EmbeddedTarget::open_session(const std::string& key, const Principal& principal) {
  sessions_[key] = service_->create_session(principal).session_id;
}

StepResult EmbeddedTarget::check(const std::string& key, const server::CheckRequest& req) {
  clock_->advance(Millis{1});
  return step_from(service_->check(sessions_.at(key), req));
}

StepResult EmbeddedTarget::report(const std::string& key, const server::ReportRequest& req) {
  clock_->advance(Millis{1});
  return step_from(service_->report(sessions_.at(key), req));
}

Decision EmbeddedTarget::resolve(const std::string& review_id, Verdict verdict,
                                 const std::string& reason) {
  return service_->resolve_review(review_id, verdict, "replay", reason);
}

// ---- live server ---------------------------------------------------------

struct HttpTarget::Impl {
  explicit Impl(const std::string& url) : client(url) {
    client.set_connection_timeout(std::chrono::seconds(5));
    client.set_read_timeout(std::chrono::seconds(120));
  }
  httplib::Client client;
};

HttpTarget::HttpTarget(const std::string& base_url, std::string admin_token)
    : impl_(std::make_unique<Impl>(base_url)), admin_token_(std::move(admin_token)) {}

HttpTarget::~HttpTarget() = default;

Value HttpTarget::call(const std::string& method, const std::string& path, const Value& body,
                       const std::string& token) {
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  httplib::Result res{nullptr, httplib::Error::Unknown};
  const std::string payload = body.is_null() ? std::string() : body.dump();
  if (method == "GET") {
    res = impl_->client.Get(path, headers);
  } else if (method == "PUT") {
    res = impl_->client.Put(path, headers, payload, "application/json");
  } else {
    res = impl_->client.Post(path, headers, payload, "application/json");
  }
  if (!res) throw Unavailable("request " + method + " " + path + " failed: " + httplib::to_string(res.error()));
  Value j;
  try {
    j = res->body.empty() ? Value::object() : Value::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw Unavailable(method + " " + path + " returned non-JSON (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status >= 400) {
    const auto& err = j.value("error", Value::object());
    throw Error(err.value("code", "HttpError"),
                "HTTP " + std::to_string(res->status) + ": " + err.value("message", res->body));
  }
  return j;
}

void HttpTarget::install_policy(const std::string& text) {
  call("PUT", "/v1/policies", {{"text", text}}, admin_token_);
}

void HttpTarget::open_session(const std::string& key, const Principal& principal) {
  const auto j = call("POST", "/v1/sessions", {{"principal", principal}}, "");
  sessions_[key] = {j.at("session_id").get<std::string>(), j.at("token").get<std::string>()};
}

StepResult HttpTarget::check(const std::string& key, const server::CheckRequest& req) {
  const auto& [sid, token] = sessions_.at(key);
  Value body = {{"tool", req.tool}, {"args", req.args}, {"wait", req.wait.count()}};
  if (req.targets) body["targets"] = *req.targets;
  return step_from_json(call("POST", "/v1/sessions/" + sid + "/check", body, token));
}

StepResult HttpTarget::report(const std::string& key, const server::ReportRequest& req) {
  const auto& [sid, token] = sessions_.at(key);
  Value body = {{"call_id", req.call_id},
                {"status", to_string(req.status)},
                {"result", req.result},
                {"wait", req.wait.count()}};
  return step_from_json(call("POST", "/v1/sessions/" + sid + "/report", body, token));
}

Decision HttpTarget::resolve(const std::string& review_id, Verdict verdict,
                             const std::string& reason) {
  const auto j = call("POST", "/v1/reviews/" + review_id + "/resolve",
                      {{"verdict", to_string(verdict)}, {"reviewer", "replay"}, {"reason", reason}},
                      admin_token_);
  return j.at("decision").get<Decision>();
}

// ---- driver --------------------------------------------------------------

ReplayReport replay(const std::vector<TraceRecord>& trace, Target& target,
                    const ReplayOptions& options) {
  ReplayReport report;
  std::map<std::string, std::string> call_ids;  // trace ref -> target call id
  std::map<std::string, bool> opened;

  for (const auto& rec : trace) {
    RecordOutcome o;
    o.index = rec.index;
    o.line = rec.line;
    o.kind = rec.kind;
    o.session = rec.session;
    o.ref = rec.ref;
    o.expect = rec.expect;
    try {
      if (!opened[rec.session]) {
        target.open_session(rec.session, rec.principal.value_or(default_principal(rec.session)));
        opened[rec.session] = true;
      }
      StepResult step;
      if (rec.kind == RecordKind::call) {
        o.tool = rec.tool.name;
        server::CheckRequest req;
        req.tool = rec.tool;
        req.args = rec.args;
        req.targets = rec.targets;
        step = target.check(rec.session, req);
        call_ids[rec.ref] = step.call_id;
      } else {
        auto it = call_ids.find(rec.ref);
        if (it == call_ids.end()) throw UnknownCall("call " + rec.ref + " was not replayed");
        server::ReportRequest req;
        req.call_id = it->second;
        req.status = rec.status;
        req.result = rec.result;
        step = target.report(rec.session, req);
      }
      o.matched = step.matched;
      if (step.review_id) {
        o.reviewed = true;
        if (!step.decision && options.review_as != ReviewAs::pending) {
          const Verdict v = options.review_as == ReviewAs::allow ? Verdict::allow : Verdict::deny;
          step.decision = target.resolve(*step.review_id, v,
                                         std::string("replay --review-as ") + std::string(to_string(v)));
        }
      }
      if (step.decision) {
        o.outcome = std::string(to_string(step.decision->verdict));
        o.via = std::string(to_string(step.decision->via));
        o.reason = step.decision->reason;
        if (step.decision->via == Via::review || step.decision->via == Via::timeout) o.reviewed = true;
      } else {
        o.outcome = "pending";
      }
    } catch (const std::exception& e) {
      o.outcome = "error";
      o.error = e.what();
    }

    if (o.outcome == "error") {
      o.ok = false;
    } else if (o.expect) {
      o.ok = *o.expect == "review" ? o.reviewed : *o.expect == o.outcome;
    }
    if (!o.ok) ++report.mismatches;
    report.records.push_back(std::move(o));
  }
  return report;
}

std::string ReplayReport::text() const {
  std::ostringstream out;
  for (const auto& o : records) {
    out << "record " << o.index << " (line " << o.line << ") "
        << (o.kind == RecordKind::call ? "call " : "result ") << o.ref
        << " session=" << o.session;
    if (!o.tool.empty()) out << " tool=" << o.tool;
    out << ": " << o.outcome;
    if (!o.via.empty()) out << " via " << o.via;
    if (o.reviewed && o.via != "review" && o.via != "timeout") out << " (review)";
    out << " matched=" << join(o.matched);
    if (o.expect) out << " expect=" << *o.expect;
    out << (o.ok ? " OK" : " MISMATCH");
    if (!o.error.empty()) out << " error: " << o.error;
    out << "\n";
  }
  out << "summary: " << records.size() << " records, " << mismatches << " mismatches\n";
  return out.str();
}

Value ReplayReport::json() const {
  Value rows = Value::array();
  for (const auto& o : records) {
    Value j = {{"record", o.index},
               {"line", o.line},
               {"kind", o.kind == RecordKind::call ? "call" : "result"},
               {"session", o.session},
               {"ref", o.ref},
               {"outcome", o.outcome},
               {"reviewed", o.reviewed},
               {"matched", o.matched},
               {"ok", o.ok}};
    if (!o.tool.empty()) j["tool"] = o.tool;
    if (!o.via.empty()) j["via"] = o.via;
    if (!o.reason.empty()) j["reason"] = o.reason;
    if (o.expect) j["expect"] = *o.expect;
    if (!o.error.empty()) j["error"] = o.error;
    rows.push_back(std::move(j));
  }
  return {{"records", rows}, {"mismatches", mismatches}, {"ok", ok()}};
}

}  // namespace agentguard::replay
