#include "agentguard/server/http_server.hpp"

#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "agentguard/audit/records.hpp"
#include "agentguard/dsl/parser.hpp"

namespace agentguard::server {

namespace {

using httplib::Request;
using httplib::Response;

constexpr const char* kJson = "application/json";

void send_json(Response& res, int status, const Value& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, Value::error_handler_t::replace), kJson);
}

void send_error(Response& res, int status, const std::string& code, const std::string& message,
                const Value& diagnostics = Value::array()) {
  send_json(res, status,
            {{"error", {{"code", code}, {"message", message}, {"diagnostics", diagnostics}}}});
}

std::string bearer(const Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) {
    return h.substr(prefix.size());
  }
  return {};
}

Value parse_body(const Request& req) {
  if (req.body.empty()) return Value::object();
  try {
    return Value::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

// "wait" as a duration string ("5s") or integer milliseconds.
Millis parse_wait(const Value& v) {
  if (v.is_null()) return Millis{0};
  if (v.is_number_integer()) return Millis{std::max<std::int64_t>(0, v.get<std::int64_t>())};
  if (v.is_string()) {
    if (auto d = parse_duration(v.get<std::string>()); d && d->count() >= 0) return *d;
  }
  throw ValidationError("wait must be a duration such as \"5s\" or integer milliseconds");
}

Millis query_wait(const Request& req) {
  if (!req.has_param("wait")) return Millis{0};
  const auto raw = req.get_param_value("wait");
  auto d = parse_duration(raw);
  if (!d || d->count() < 0) throw ValidationError("bad wait parameter '" + raw + "'");
  return *d;
}

std::uint64_t query_uint(const Request& req, const char* name, std::uint64_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto raw = req.get_param_value(name);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
  if (ec != std::errc{} || p != raw.data() + raw.size()) {
    throw ValidationError(std::string("bad ") + name + " parameter '" + raw + "'");
  }
  return out;
}

std::optional<std::string> query_str(const Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

Timestamp query_time(const std::string& name, const std::string& raw) {
  auto t = parse_timestamp(raw);
  if (!t) throw ValidationError("bad " + name + " timestamp '" + raw + "'");
  return *t;
}

audit::AuditQuery audit_query_from(const Request& req) {
  audit::AuditQuery q;
  q.kind = query_str(req, "kind");
  q.session_id = query_str(req, "session_id");
  q.call_id = query_str(req, "call_id");
  q.rule_id = query_str(req, "rule_id");
  if (auto v = query_str(req, "phase")) {
    q.phase = parse_phase(*v);
    if (!q.phase) throw ValidationError("phase must be pre or post");
  }
  if (auto v = query_str(req, "decision")) {
    q.decision = parse_verdict(*v);
    if (!q.decision) throw ValidationError("decision must be allow or deny");
  }
  if (auto v = query_str(req, "since")) q.since = query_time("since", *v);
  if (auto v = query_str(req, "until")) q.until = query_time("until", *v);
  q.after = query_uint(req, "after", 0);
  q.limit = static_cast<std::size_t>(std::min<std::uint64_t>(query_uint(req, "limit", 100), 1000));
  return q;
}

Value diagnostics_json(const std::vector<dsl::Diagnostic>& diags) {
  Value out = Value::array();
  for (const auto& d : diags) out.push_back(d);
  return out;
}

Value policy_json(const PolicySnapshot& snap) {
  Value rules = Value::array();
  for (const auto& r : snap.policy->rules) {
    rules.push_back({{"id", r.id},
                     {"phase", to_string(r.phase)},
                     {"priority", r.priority},
                     {"effect", to_string(r.effect.kind)},
                     {"enabled", r.enabled}});
  }
  return {{"version", snap.policy->version},
          {"default", to_string(snap.policy->default_decision)},
          {"text", snap.text},
          {"rules", rules}};
}

std::string sse_frame(const StreamEvent& e, std::optional<std::uint64_t> id) {
  std::string out;
  if (id) out += "id: " + std::to_string(*id) + "\n";
  out += "event: " + e.name + "\n";
  out += "data: " + e.data.dump(-1, ' ', false, Value::error_handler_t::replace) + "\n\n";
  return out;
}

}  // namespace

int status_for(const std::string& code) {
  if (code == "PolicyRejected") return 400;
  if (code == "Unauthorized") return 401;
  if (code == "UnknownSession" || code == "UnknownCall" || code == "UnknownReview") return 404;
  if (code == "SessionEnded" || code == "AlreadyReported" || code == "CallNotAllowed" ||
      code == "AlreadyTerminal" || code == "StaleVersion") {
    return 409;
  }
  if (code == "ValidationError" || code == "IllegalRoot") return 422;
  if (code == "Unavailable" || code == "StorageError") return 503;
  return 500;
}

std::vector<StreamEvent> stream_events_for(const Value& record) {
  const std::string kind = record.value("kind", "");
  std::vector<StreamEvent> out;
  if (kind == audit::kSessionStarted) {
    Value data = record;
    data.erase("token_sha256");
    out.push_back({"session_started", std::move(data)});
  } else if (kind == audit::kSessionEnded) {
    out.push_back({"session_ended", record});
  } else if (kind == audit::kReviewPending) {
    out.push_back({"review_pending", record});
  } else if (kind == audit::kPolicyUpdated) {
    out.push_back({"policy_updated", record});
  } else if (kind == audit::kDecision) {
    const auto& final = record.at("final");
    const std::string via = final.value("via", "");
    if (via == "review" || via == "timeout") {
      Value resolved = {{"review_id", final.value("review_id", "")},
                        {"session_id", record.value("session_id", "")},
                        {"call_id", record.value("call_id", "")},
                        {"phase", record.value("phase", "pre")},
                        {"decision", final}};
      if (record.contains("reviewer")) resolved["reviewer"] = record["reviewer"];
      if (record.contains("record_id")) resolved["record_id"] = record["record_id"];
      out.push_back({"review_resolved", std::move(resolved)});
    }
    out.push_back({"check_decided", record});
  }
  return out;
}

HttpServer::HttpServer(Service& service, HttpOptions options)
    : service_(service), options_(options), server_(std::make_unique<httplib::Server>()) {
  const std::size_t threads = static_cast<std::size_t>(service_.config().threads);
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  server_->set_payload_max_length(8u << 20);
  server_->set_read_timeout(std::chrono::seconds(30));
  server_->set_write_timeout(std::chrono::seconds(30));
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) throw Unavailable("cannot bind " + host);
  } else {
    if (!server_->bind_to_port(host, port)) {
      throw Unavailable("cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }
  return port_;
}

void HttpServer::run() { server_->listen_after_bind(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  stopping_ = true;
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void HttpServer::install_routes() {
  auto& svr = *server_;
  Service& svc = service_;

  // Wraps a handler with error mapping.
  auto guarded = [](auto fn) {
    return [fn](const Request& req, Response& res) {
      try {
        fn(req, res);
      } catch (const PolicyRejected& e) {
        send_error(res, 400, e.code(), e.what(), diagnostics_json(e.diagnostics()));
      } catch (const Error& e) {
        const int status = status_for(e.code());
        if (status >= 500) spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, status, e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 422, "ValidationError", e.what());
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, 500, "InternalError", e.what());
      }
    };
  };
  auto require_admin = [&svc](const Request& req) {
    auto token = bearer(req);
    if (token.empty() && req.has_param("token")) token = req.get_param_value("token");
    if (!svc.authenticate_admin(token)) throw Unauthorized("admin token required");
  };
  auto require_session = [&svc](const Request& req, const std::string& sid) {
    const auto token = bearer(req);
    if (svc.authenticate_session(sid, token) || svc.authenticate_admin(token)) return;
    // A missing session is reported as such; a bad token for a real one is 401.
    if (!svc.sessions().exists(sid)) throw UnknownSession("unknown session " + sid);
    throw Unauthorized("session token required");
  };

  // Unrouted paths and other bodiless errors still get the JSON error shape.
  svr.set_error_handler([](const Request& req, Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 404) send_error(res, 404, "NotFound", "no route for " + req.method + " " + req.path);
    else send_error(res, res.status, "HttpError", httplib::status_message(res.status));
    return httplib::Server::HandlerResponse::Handled;
  });

  svr.Get("/healthz", [&svc](const Request&, Response& res) {
    send_json(res, 200,
              {{"status", "ok"},
               {"policy_version", svc.policy().policy->version},
               {"audit_last_id", svc.audit_log().last_id()}});
  });

  svr.Post("/v1/sessions", guarded([&svc](const Request& req, Response& res) {
    const Value body = parse_body(req);
    const Value pj = body.contains("principal") ? body.at("principal") : body;
    const auto principal = pj.get<Principal>();
    const auto created = svc.create_session(principal);
    send_json(res, 201, {{"session_id", created.session_id}, {"token", created.token}});
  }));

  svr.Get("/v1/sessions", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    send_json(res, 200, {{"sessions", svc.list_sessions()}});
  }));

  svr.Get("/v1/sessions/:id", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    send_json(res, 200, svc.session_detail(req.path_params.at("id")));
  }));

  svr.Post("/v1/sessions/:id/end", guarded([=, &svc](const Request& req, Response& res) {
    const auto& sid = req.path_params.at("id");
    require_session(req, sid);
    svc.end_session(sid);
    send_json(res, 200, {{"session_id", sid}, {"status", "ended"}});
  }));

  svr.Post("/v1/sessions/:id/check", guarded([=, &svc](const Request& req, Response& res) {
    const auto& sid = req.path_params.at("id");
    require_session(req, sid);
    const Value body = parse_body(req);
    if (!body.is_object() || !body.contains("tool")) throw ValidationError("tool is required");
    CheckRequest cr;
    cr.tool = body.at("tool").get<ToolDescriptor>();
    cr.args = body.value("args", Value::object());
    if (body.contains("targets") && !body.at("targets").is_null()) {
      cr.targets = body.at("targets").get<std::vector<NetworkTarget>>();
    }
    cr.wait = parse_wait(body.value("wait", Value()));
    const auto out = svc.check(sid, cr);
    send_json(res, out.decision ? 200 : 202, to_json(out));
  }));

  svr.Post("/v1/sessions/:id/report", guarded([=, &svc](const Request& req, Response& res) {
    const auto& sid = req.path_params.at("id");
    require_session(req, sid);
    const Value body = parse_body(req);
    if (!body.is_object() || !body.contains("call_id")) throw ValidationError("call_id is required");
    ReportRequest rr;
    rr.call_id = body.at("call_id").get<std::string>();
    const auto status = parse_result_status(body.value("status", "ok"));
    if (!status) throw ValidationError("status must be ok or error");
    rr.status = *status;
    rr.result = body.value("result", Value());
    rr.wait = parse_wait(body.value("wait", Value()));
    const auto out = svc.report(sid, rr);
    send_json(res, out.decision ? 200 : 202, to_json(out));
  }));

  svr.Get("/v1/decisions/:id", guarded([=, &svc](const Request& req, Response& res) {
    const auto& id = req.path_params.at("id");
    const auto wait = query_wait(req);
    // Either the owning session's token or the admin token.
    const auto token = bearer(req);
    if (!svc.authenticate_admin(token)) {
      auto status = svc.decision(id, Millis{0});
      if (!svc.authenticate_session(status.session_id, token)) {
        throw Unauthorized("session or admin token required");
      }
    }
    const auto status = svc.decision(id, wait);
    send_json(res, status.decision ? 200 : 202, to_json(status));
  }));

  svr.Get("/v1/policies", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    const auto snap = svc.policy();
    if (req.get_param_value("format") == "text") {
      res.set_header("X-Policy-Version", std::to_string(snap.policy->version));
      res.set_content(snap.text, "text/plain; charset=utf-8");
      return;
    }
    send_json(res, 200, policy_json(snap));
  }));

  svr.Put("/v1/policies", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    std::string text;
    std::optional<std::int64_t> expected;
    if (req.get_header_value("Content-Type").rfind(kJson, 0) == 0) {
      const Value body = parse_body(req);
      if (!body.contains("text") || !body.at("text").is_string()) {
        throw ValidationError("text is required");
      }
      text = body.at("text").get<std::string>();
      if (body.contains("expected_version") && !body.at("expected_version").is_null()) {
        expected = body.at("expected_version").get<std::int64_t>();
      }
    } else {
      text = req.body;
      if (req.has_header("If-Match")) {
        try {
          expected = std::stoll(req.get_header_value("If-Match"));
        } catch (const std::exception&) {
          throw ValidationError("If-Match must be a policy version");
        }
      }
    }
    const auto out = svc.update_policy(text, expected);
    send_json(res, 200, {{"version", out.version}, {"diagnostics", diagnostics_json(out.warnings)}});
  }));

  svr.Post("/v1/policies/validate", guarded([=](const Request& req, Response& res) {
    require_admin(req);
    auto parsed = dsl::parse_policy_set(req.body);
    auto diags = parsed.diagnostics;
    if (parsed.ok()) {
      for (auto& d : dsl::validate(*parsed.policy)) diags.push_back(std::move(d));
    }
    send_json(res, 200, {{"ok", parsed.ok()}, {"diagnostics", diagnostics_json(diags)}});
  }));

  svr.Get("/v1/reviews/pending", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    Value items = Value::array();
    for (const auto& item : svc.pending_reviews()) items.push_back(review::to_json(item));
    send_json(res, 200, {{"reviews", items}});
  }));

  svr.Post("/v1/reviews/:id/resolve", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    const Value body = parse_body(req);
    const auto verdict = parse_verdict(body.value("verdict", ""));
    if (!verdict) throw ValidationError("verdict must be allow or deny");
    const std::string reason = body.value("reason", "");
    if (reason.empty()) throw ValidationError("reason is required");
    const std::string reviewer = body.value("reviewer", "operator");
    const auto d = svc.resolve_review(req.path_params.at("id"), *verdict, reviewer, reason);
    send_json(res, 200, {{"review_id", req.path_params.at("id")}, {"decision", d}});
  }));

  svr.Get("/v1/audit", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    const auto page = svc.audit_log().query(audit_query_from(req));
    Value j = {{"records", page.records}};
    j["next_after"] = page.next_after ? Value(*page.next_after) : Value(nullptr);
    send_json(res, 200, j);
  }));

  svr.Get("/v1/audit/:id", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    const auto& raw_id = req.path_params.at("id");
    std::uint64_t id = 0;
    auto [p, ec] = std::from_chars(raw_id.data(), raw_id.data() + raw_id.size(), id);
    if (ec != std::errc{} || p != raw_id.data() + raw_id.size()) {
      throw ValidationError("record id must be an integer");
    }
    auto raw = svc.audit_log().read_raw(id);
    if (!raw) {
      send_error(res, 404, "UnknownRecord", "no audit record " + raw_id);
      return;
    }
    res.status = 200;
    res.set_content(*raw, kJson);
  }));

  svr.Get("/v1/templates", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    Value out = Value::array();
    for (const auto& t : svc.templates().templates()) out.push_back(dsl::to_json(t));
    send_json(res, 200, {{"templates", out}});
  }));

  svr.Post("/v1/templates/:id/instantiate", guarded([=, &svc](const Request& req, Response& res) {
    require_admin(req);
    const Value body = parse_body(req);
    std::map<std::string, std::string> params;
    const Value given = body.value("params", Value::object());
    for (const auto& [k, v] : given.items()) {
      params[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    const auto text = svc.templates().instantiate(req.path_params.at("id"), params);
    send_json(res, 200, {{"text", text}});
  }));

  svr.Get("/v1/stream", [=, this, &svc](const Request& req, Response& res) {
    try {
      require_admin(req);
    } catch (const Unauthorized& e) {
      send_error(res, 401, e.code(), e.what());
      return;
    }
    std::optional<std::uint64_t> replay_after;
    try {
      if (req.has_header("Last-Event-ID")) {
        replay_after = std::stoull(req.get_header_value("Last-Event-ID"));
      } else if (req.has_param("after")) {
        replay_after = query_uint(req, "after", 0);
      }
    } catch (const std::exception&) {
      send_error(res, 422, "ValidationError", "bad stream cursor");
      return;
    }
    auto sub = svc.audit_log().subscribe(options_.stream_capacity, replay_after);
    res.set_header("Cache-Control", "no-cache");
    res.set_header("X-Accel-Buffering", "no");
    const Millis keepalive = options_.keepalive;
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub, keepalive, first = true](std::size_t, httplib::DataSink& sink) mutable {
          if (first) {
            first = false;
            const std::string hello = ": connected\n\n";
            return sink.write(hello.data(), hello.size());
          }
          const auto deadline = std::chrono::steady_clock::now() + keepalive;
          while (!stopping_) {
            if (!sink.is_writable()) return false;
            auto record = sub->next(Millis{250});
            if (record) {
              std::string frame;
              const auto id = record->value("record_id", std::uint64_t{0});
              for (const auto& e : stream_events_for(*record)) frame += sse_frame(e, id);
              if (frame.empty()) continue;
              return sink.write(frame.data(), frame.size());
            }
            if (sub->closed()) {
              if (sub->overflowed()) {
                const std::string msg = "event: overflow\ndata: {}\n\n";
                sink.write(msg.data(), msg.size());
              }
              sink.done();
              return true;
            }
            if (std::chrono::steady_clock::now() >= deadline) {
              const std::string ping = ": keepalive\n\n";
              return sink.write(ping.data(), ping.size());
            }
          }
          return false;
        },
        [sub](bool) { sub->close(); });
  });

  if (!service_.config().console_dir.empty()) {
    if (!svr.set_mount_point("/console", service_.config().console_dir)) {
      spdlog::warn("console directory {} not found; /console disabled", service_.config().console_dir);
    }
  }

  svr.set_logger([](const Request& req, const Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
}

}  // namespace agentguard::server
