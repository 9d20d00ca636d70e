#include "agentguard/server/service.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "agentguard/audit/records.hpp"
#include "agentguard/dsl/parser.hpp"
#include "agentguard/model/targets.hpp"

namespace agentguard::server {

namespace {

std::string message_of(const std::vector<dsl::Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.severity == dsl::Severity::error) return d.format();
  }
  return "policy rejected";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Millis since(Timestamp a, Timestamp b) { return std::chrono::duration_cast<Millis>(b - a); }

void require_depth(const Value& v, const char* what) {
  if (value_depth(v) > kMaxArgsDepth) {
    throw ValidationError(std::string(what) + " nest deeper than " +
                          std::to_string(kMaxArgsDepth) + " levels");
  }
}

std::vector<std::string> matched_ids(const engine::Evaluation& ev) {
  std::vector<std::string> out;
  for (const auto& m : ev.matched) out.push_back(m.rule_id);
  return out;
}

}  // namespace

PolicyRejected::PolicyRejected(std::vector<dsl::Diagnostic> diagnostics)
    : Error("PolicyRejected", message_of(diagnostics)), diagnostics_(std::move(diagnostics)) {}

Value to_json(const CallResponse& r) {
  Value j = {{"call_id", r.call_id},
             {"seq", r.seq},
             {"phase", to_string(r.phase)},
             {"policy_version", r.policy_version},
             {"matched", r.matched},
             {"status", r.decision ? "decided" : "pending"}};
  if (r.decision) j["decision"] = *r.decision;
  if (r.decision_id) j["decision_id"] = *r.decision_id;
  return j;
}

Value to_json(const DecisionStatus& s) {
  Value j = {{"decision_id", s.decision_id},
             {"session_id", s.session_id},
             {"call_id", s.call_id},
             {"phase", to_string(s.phase)},
             {"status", s.decision ? "decided" : "pending"}};
  if (s.decision) j["decision"] = *s.decision;
  return j;
}

Service::Service(ServerConfig config, ServiceDeps deps, std::optional<std::string> policy_text)
    : config_(std::move(config)) {
  if (deps.clock != nullptr) {
    clock_ = deps.clock;
  } else {
    own_clock_ = std::make_unique<SystemClock>();
    clock_ = own_clock_.get();
  }
  ids_ = deps.ids ? deps.ids : std::make_shared<RandomIds>();

  std::shared_ptr<llm::Backend> backend = deps.llm_backend;
  if (!backend) {
    if (config_.llm.backend == "mock") {
      backend = std::make_shared<llm::MockBackend>(config_.llm.mock_keywords);
    } else if (config_.llm.backend == "http") {
      backend = std::make_shared<llm::HttpBackend>(llm::HttpBackendConfig{
          config_.llm.url, config_.llm.model, config_.llm.api_key, config_.llm.timeout});
    }
  }
  if (backend) {
    inspector_ = std::make_unique<llm::Inspector>(
        backend, llm::InspectorConfig{config_.llm.timeout, config_.llm.prompt_cap, config_.llm.model});
  }

  if (config_.admin_token.empty()) {
    config_.admin_token = ids_->secret();
    spdlog::warn("no admin token configured; generated one for this run: {}", config_.admin_token);
  }
  if (!config_.templates_path.empty()) {
    templates_ = dsl::TemplateCatalog::load(config_.templates_path);
  }

  audit_ = std::make_unique<audit::AuditLog>(
      audit::AuditLogOptions{config_.audit_path, config_.audit_fsync, config_.audit_warn_bytes},
      *clock_);
  sessions_ = std::make_unique<session::SessionManager>(*clock_, *ids_);
  reviews_ = std::make_unique<review::ReviewQueue>(*clock_, *ids_);

  std::string text;
  if (policy_text) {
    text = *policy_text;
  } else if (!config_.policy_path.empty() && std::filesystem::exists(config_.policy_path)) {
    text = read_file(config_.policy_path);
  }
  // Reject a bad policy before touching recovered state.
  auto parsed = dsl::parse_policy_set(text);
  if (!parsed.ok()) throw PolicyRejected(parsed.diagnostics);

  std::optional<std::int64_t> logged_version;
  std::optional<std::string> logged_text;
  audit_->for_each([&](const Value& r) {
    if (r.value("kind", "") == audit::kPolicyUpdated) {
      logged_version = r.at("policy_version").get<std::int64_t>();
      logged_text = r.value("text", "");
    }
  });
  recover();
  load_policy(text, logged_version, logged_text);

  reviews_->set_terminal_hook([this](const review::ReviewItem& item) { on_review_terminal(item); });
  // Items whose deadline passed while the server was down time out now.
  reviews_->expire(clock_->now());
}

Service::~Service() {
  stop_background();
  reviews_->set_terminal_hook(nullptr);
}

void Service::load_policy(const std::string& text, std::optional<std::int64_t> logged_version,
                          const std::optional<std::string>& logged_text) {
  auto parsed = dsl::parse_policy_set(text);
  auto ps = std::make_shared<dsl::PolicySet>(std::move(*parsed.policy));
  if (logged_text && *logged_text == text && logged_version) {
    ps->version = *logged_version;
  } else {
    if (logged_version) ps->version = std::max(ps->version, *logged_version + 1);
    audit_->append(audit::policy_updated_record(ps->version, text, ps->rules.size(), "startup"));
  }
  std::lock_guard lock(policy_mutex_);
  policy_ = std::move(ps);
  policy_text_ = text;
}

void Service::recover() {
  std::map<std::string, Value> pending;
  std::size_t count = 0;
  audit_->for_each([&](const Value& r) {
    ++count;
    const std::string kind = r.value("kind", "");
    const std::string sid = r.value("session_id", "");
    try {
      if (kind == audit::kSessionStarted) {
        const auto principal = r.at("principal").get<Principal>();
        const auto created = parse_timestamp(r.value("timestamp", "")).value_or(clock_->now());
        sessions_->restore_session(sid, principal, r.value("token_sha256", ""), created);
      } else if (kind == audit::kSessionEnded) {
        if (r.value("reason", "") == "expired") {
          sessions_->mark_expired(sid);
        } else {
          sessions_->end_session(sid);
        }
      } else if (kind == audit::kDecision || kind == audit::kReviewPending) {
        const auto event = r.at("event").get<ToolCallEvent>();
        const bool post = r.value("phase", "pre") == "post";
        std::optional<Decision> final;
        std::optional<std::string> review_id;
        if (kind == audit::kDecision) {
          final = r.at("final").get<Decision>();
          if (final->review_id) pending.erase(*final->review_id);
        } else {
          review_id = r.at("review").at("review_id").get<std::string>();
          pending[*review_id] = r;
        }
        const auto existing = sessions_->call(sid, event.call_id);
        if (!post) {
          if (existing) {
            if (final) sessions_->set_pre_decision(sid, event.call_id, *final);
          } else {
            sessions_->append_event(sid, event, final, review_id);
          }
        } else {
          const auto result = r.at("result").get<ToolResultEvent>();
          if (existing && existing->result_reported) {
            if (final) sessions_->set_post_decision(sid, event.call_id, *final);
          } else {
            sessions_->attach_result(sid, result, final, review_id);
          }
        }
      }
    } catch (const std::exception& e) {
      spdlog::warn("audit record {} not replayed into session state: {}",
                   r.value("record_id", std::uint64_t{0}), e.what());
    }
  });

  for (auto& [review_id, r] : pending) {
    const auto& rv = r.at("review");
    review::ReviewRequest req;
    req.session_id = r.value("session_id", "");
    req.call_id = r.value("call_id", "");
    req.phase = r.value("phase", "pre") == "post" ? Phase::post : Phase::pre;
    req.reason = rv.value("reason", "");
    req.context = r.at("event");
    req.timeout = Millis{rv.value("timeout_ms", std::int64_t{300'000})};
    req.on_timeout = parse_verdict(rv.value("on_timeout", "deny")).value_or(Verdict::deny);
    const auto created = parse_timestamp(rv.value("created", "")).value_or(clock_->now());
    const auto timeout_at = parse_timestamp(rv.value("timeout_at", "")).value_or(created + req.timeout);
    reviews_->restore(review_id, req, created, timeout_at);
    pending_[review_id] = PendingContext{r, created};
  }
  if (count > 0) {
    spdlog::info("recovered {} audit records, {} sessions, {} pending reviews", count,
                 sessions_->list().size(), pending.size());
  }
}

void Service::start_background() {
  stop_background();
  {
    std::lock_guard lock(bg_mutex_);
    bg_running_ = true;
  }
  bg_thread_ = std::thread([this] {
    std::unique_lock lock(bg_mutex_);
    while (bg_running_) {
      bg_cv_.wait_for(lock, config_.review_sweep, [this] { return !bg_running_; });
      if (!bg_running_) break;
      lock.unlock();
      try {
        sweep();
      } catch (const std::exception& e) {
        spdlog::error("sweep failed: {}", e.what());
      }
      lock.lock();
    }
  });
}

void Service::stop_background() {
  {
    std::lock_guard lock(bg_mutex_);
    bg_running_ = false;
  }
  bg_cv_.notify_all();
  if (bg_thread_.joinable()) bg_thread_.join();
}

void Service::sweep() {
  const auto now = clock_->now();
  reviews_->expire(now);
  for (const auto& sid : sessions_->expire_idle(now, config_.idle_timeout)) {
    audit_->append(audit::session_ended_record(sid, "expired"));
  }
}

void Service::set_fault_hook(FaultHook hook) {
  std::lock_guard lock(hook_mutex_);
  fault_hook_ = std::move(hook);
}

void Service::fault(std::string_view point) {
  FaultHook hook;
  {
    std::lock_guard lock(hook_mutex_);
    hook = fault_hook_;
  }
  if (hook) hook(point);
}

std::shared_ptr<const dsl::PolicySet> Service::active_policy() const {
  std::lock_guard lock(policy_mutex_);
  return policy_;
}

PolicySnapshot Service::policy() const {
  std::lock_guard lock(policy_mutex_);
  return {policy_, policy_text_};
}

session::CreatedSession Service::create_session(const Principal& principal) {
  principal.validate();
  const std::string sid = ids_->next("s");
  const std::string token = ids_->secret();
  const std::string hash = sha256_hex(token);
  audit_->append(audit::session_started_record(sid, principal, hash));
  sessions_->restore_session(sid, principal, hash, clock_->now());
  return {sid, token};
}

bool Service::authenticate_session(const std::string& session_id, std::string_view token) const {
  return sessions_->authenticate(session_id, token);
}

bool Service::authenticate_admin(std::string_view token) const {
  return secure_equals(config_.admin_token, token);
}

void Service::end_session(const std::string& session_id) {
  auto lock = sessions_->serialize(session_id);
  sessions_->next_seq(session_id);  // throws unless active
  audit_->append(audit::session_ended_record(session_id, "ended"));
  sessions_->end_session(session_id);
}

CallResponse Service::fail_open_or_throw(const std::string& what, const std::string& call_id,
                                         std::uint64_t seq, Phase phase) {
  spdlog::error("internal error while deciding {}: {}", call_id, what);
  if (config_.fail_mode == FailMode::closed) throw Unavailable("internal error: " + what);
  CallResponse r;
  r.call_id = call_id;
  r.seq = seq;
  r.phase = phase;
  r.decision = Decision{Verdict::allow, Via::default_, "fail-open after internal error: " + what,
                        std::nullopt};
  return r;
}

CallResponse Service::finish(const ToolCallEvent& event, const ToolResultEvent* result,
                             engine::Evaluation& ev, std::unique_lock<std::mutex>& session_lock,
                             Millis wait) {
  const std::string& sid = event.session_id;
  CallResponse resp;
  resp.call_id = event.call_id;
  resp.seq = event.seq;
  resp.phase = ev.phase;
  resp.policy_version = ev.policy_version;
  resp.matched = matched_ids(ev);

  if (ev.outcome == engine::OutcomeKind::final) {
    audit_->append(audit::decision_record(event, result, ev, *ev.decision,
                                          since(ev.started, ev.finished)));
    fault("after_audit_append");
    if (result == nullptr) {
      sessions_->append_event(sid, event, ev.decision);
    } else {
      sessions_->attach_result(sid, *result, ev.decision);
    }
    resp.decision = ev.decision;
    return resp;
  }

  // Pending review. The item becomes visible to resolvers only once the
  // audit record and the session entry exist.
  review::ReviewItem item;
  item.review_id = ids_->next("r");
  item.request.session_id = sid;
  item.request.call_id = event.call_id;
  item.request.phase = ev.phase;
  item.request.reason = ev.review_reason;
  item.request.context = event;
  if (result != nullptr) item.request.context["result"] = *result;
  item.request.timeout = ev.review->timeout;
  item.request.on_timeout = ev.review->on_timeout;
  item.created = clock_->now();
  item.timeout_at = item.created + item.request.timeout;
  ev.review_id = item.review_id;

  Value record = audit::review_pending_record(event, result, ev, item);
  {
    std::lock_guard lock(pending_mutex_);
    pending_[item.review_id] = PendingContext{record, ev.started};
  }
  try {
    audit_->append(record);
  } catch (...) {
    std::lock_guard lock(pending_mutex_);
    pending_.erase(item.review_id);
    throw;
  }
  fault("after_audit_append");
  if (result == nullptr) {
    sessions_->append_event(sid, event, std::nullopt, item.review_id);
  } else {
    sessions_->attach_result(sid, *result, std::nullopt, item.review_id);
  }
  reviews_->restore(item.review_id, item.request, item.created, item.timeout_at);
  session_lock.unlock();

  resp.decision_id = item.review_id;
  if (wait.count() > 0) {
    auto w = reviews_->wait(item.review_id, std::min(wait, config_.max_wait));
    if (w.kind == review::WaitResult::Kind::failed) throw Unavailable(w.error);
    if (w.kind == review::WaitResult::Kind::decided) resp.decision = w.decision;
  }
  return resp;
}

CallResponse Service::check(const std::string& session_id, const CheckRequest& request) {
  request.tool.validate();
  require_depth(request.args, "args");
  if (!request.args.is_object()) throw ValidationError("args must be a map");
  if (request.targets) {
    for (const auto& t : *request.targets) t.validate();
  }

  auto lock = sessions_->serialize(session_id);
  ToolCallEvent event;
  event.seq = sessions_->next_seq(session_id);
  event.session_id = session_id;
  event.call_id = ids_->next("c");
  event.principal = sessions_->info(session_id).principal;
  event.tool = request.tool;
  event.args = request.args;
  event.targets = request.targets ? *request.targets : extract_targets(request.args);
  event.timestamp = clock_->now();

  try {
    const auto ps = active_policy();
    const auto history = sessions_->history_view(session_id, event.seq);
    auto ev = engine::evaluate_with_inspector(event, nullptr, *ps, history, inspector_.get(),
                                              config_.llm.on_error, *clock_);
    return finish(event, nullptr, ev, lock, request.wait);
  } catch (const Error& e) {
    if (e.code() != "StorageError") throw;
    return fail_open_or_throw(e.what(), event.call_id, event.seq, Phase::pre);
  } catch (const std::exception& e) {
    return fail_open_or_throw(e.what(), event.call_id, event.seq, Phase::pre);
  }
}

CallResponse Service::report(const std::string& session_id, const ReportRequest& request) {
  require_depth(request.result, "result");
  auto lock = sessions_->serialize(session_id);
  const auto call = sessions_->call(session_id, request.call_id);
  if (!call) throw UnknownCall("unknown call " + request.call_id + " in session " + session_id);
  if (call->result_reported) throw AlreadyReported("result for " + request.call_id + " already reported");
  if (!call->pre || call->pre->verdict != Verdict::allow) {
    throw CallNotAllowed("call " + request.call_id + " was not allowed to run");
  }
  const ToolCallEvent& event = call->entry->event;
  ToolResultEvent result{request.call_id, request.status, request.result, clock_->now()};

  try {
    const auto ps = active_policy();
    const auto history = sessions_->history_view(session_id, event.seq);
    auto ev = engine::evaluate_with_inspector(event, &result, *ps, history, inspector_.get(),
                                              config_.llm.on_error, *clock_);
    return finish(event, &result, ev, lock, request.wait);
  } catch (const Error& e) {
    if (e.code() != "StorageError") throw;
    return fail_open_or_throw(e.what(), event.call_id, event.seq, Phase::post);
  } catch (const std::exception& e) {
    return fail_open_or_throw(e.what(), event.call_id, event.seq, Phase::post);
  }
}

DecisionStatus Service::decision(const std::string& decision_id, Millis wait) {
  auto item = reviews_->get(decision_id);
  if (!item) throw UnknownReview("unknown decision " + decision_id);
  DecisionStatus s;
  s.decision_id = decision_id;
  s.session_id = item->request.session_id;
  s.call_id = item->request.call_id;
  s.phase = item->request.phase;
  auto w = reviews_->wait(decision_id, std::min(wait, config_.max_wait));
  if (w.kind == review::WaitResult::Kind::failed) throw Unavailable(w.error);
  if (w.kind == review::WaitResult::Kind::decided) s.decision = w.decision;
  return s;
}

void Service::on_review_terminal(const review::ReviewItem& item) {
  PendingContext ctx;
  {
    std::lock_guard lock(pending_mutex_);
    auto it = pending_.find(item.review_id);
    if (it == pending_.end()) {
      spdlog::warn("review {} finished without a pending record", item.review_id);
      return;
    }
    ctx = it->second;
  }
  std::optional<audit::Reviewer> reviewer;
  if (item.resolution) reviewer = audit::Reviewer{item.resolution->reviewer, item.resolution->reason};
  const Millis latency = since(ctx.started, clock_->now());
  audit_->append(audit::decision_record_from_pending(ctx.record, *item.decision, latency, reviewer));
  fault("after_audit_append");
  {
    std::lock_guard lock(pending_mutex_);
    pending_.erase(item.review_id);
  }
  const std::string sid = item.request.session_id;
  if (item.request.phase == Phase::pre) {
    sessions_->set_pre_decision(sid, item.request.call_id, *item.decision);
  } else {
    sessions_->set_post_decision(sid, item.request.call_id, *item.decision);
  }
}

std::vector<review::ReviewItem> Service::pending_reviews() {
  reviews_->expire(clock_->now());
  return reviews_->list_pending();
}

Decision Service::resolve_review(const std::string& review_id, Verdict verdict,
                                 const std::string& reviewer, const std::string& reason) {
  if (reviewer.empty()) throw ValidationError("reviewer must be non-empty");
  return reviews_->resolve(review_id, verdict, reviewer, reason);
}

void Service::persist_policy_text(const std::string& text) {
  const std::string tmp = config_.policy_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw StorageError("cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, config_.policy_path, ec);
  if (ec) throw StorageError("cannot replace " + config_.policy_path + ": " + ec.message());
}

PolicyUpdateResult Service::update_policy(const std::string& text,
                                          std::optional<std::int64_t> expected_version) {
  std::lock_guard update(update_mutex_);
  auto parsed = dsl::parse_policy_set(text);
  if (!parsed.ok()) throw PolicyRejected(parsed.diagnostics);

  const auto current = active_policy();
  if (expected_version && *expected_version != current->version) {
    throw StaleVersion("policy is at version " + std::to_string(current->version) +
                       ", not " + std::to_string(*expected_version));
  }
  auto ps = std::make_shared<dsl::PolicySet>(std::move(*parsed.policy));
  ps->version = current->version + 1;

  audit_->append(audit::policy_updated_record(ps->version, text, ps->rules.size(), "api"));
  if (config_.persist_policy_updates && !config_.policy_path.empty()) {
    try {
      persist_policy_text(text);
    } catch (const std::exception& e) {
      spdlog::error("policy version {} active but not persisted: {}", ps->version, e.what());
    }
  }
  PolicyUpdateResult out{ps->version, dsl::validate(*ps)};
  {
    std::lock_guard lock(policy_mutex_);
    policy_ = std::move(ps);
    policy_text_ = text;
  }
  spdlog::info("policy updated to version {}", out.version);
  return out;
}

Value Service::list_sessions() const {
  Value out = Value::array();
  for (const auto& s : sessions_->list()) {
    out.push_back({{"session_id", s.session_id},
                   {"principal", s.principal},
                   {"created", format_timestamp(s.created)},
                   {"last_active", format_timestamp(s.last_active)},
                   {"status", session::to_string(s.status)},
                   {"last_seq", s.last_seq},
                   {"event_count", s.event_count}});
  }
  return out;
}

Value Service::session_detail(const std::string& session_id) const {
  const auto info = sessions_->info(session_id);
  Value calls = Value::array();
  for (const auto& c : sessions_->calls(session_id)) {
    Value j = {{"event", c.entry->event}};
    if (c.entry->result) j["result"] = *c.entry->result;
    j["pre"] = c.pre ? Value(*c.pre) : Value(nullptr);
    if (c.result_reported) j["post"] = c.post ? Value(*c.post) : Value(nullptr);
    if (c.pre_review_id) j["pre_review_id"] = *c.pre_review_id;
    if (c.post_review_id) j["post_review_id"] = *c.post_review_id;
    calls.push_back(std::move(j));
  }
  return {{"session_id", info.session_id},
          {"principal", info.principal},
          {"created", format_timestamp(info.created)},
          {"last_active", format_timestamp(info.last_active)},
          {"status", session::to_string(info.status)},
          {"last_seq", info.last_seq},
          {"calls", calls}};
}

}  // namespace agentguard::server
