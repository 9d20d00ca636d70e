#include <doctest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "agentguard/server/http_server.hpp"
#include "harness.hpp"

using namespace agentguard;
using namespace agentguard::server;
using testing::kAdminToken;

namespace {

struct Fixture {
  explicit Fixture(const std::string& policy, ServerConfig cfg = testing::test_config())
      : service(std::move(cfg), {}, policy), http(service) {
    port = http.start("127.0.0.1", 0);
  }

  httplib::Client client(const std::string& token = kAdminToken) const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(std::chrono::seconds(10));
    if (!token.empty()) c.set_bearer_token_auth(token);
    return c;
  }

  Service service;
  HttpServer http;
  int port = 0;
};

struct Reply {
  int status = 0;
  Value body;
};

Reply as_reply(const httplib::Result& r) {
  REQUIRE(r);
  Reply out{r->status, Value()};
  if (!r->body.empty() && r->get_header_value("Content-Type").find("json") != std::string::npos) {
    out.body = Value::parse(r->body);
  }
  return out;
}

template <typename C>
Reply post(C&& c, const std::string& path, const Value& body) {
  return as_reply(c.Post(path, body.dump(), "application/json"));
}

template <typename C>
Reply get(C&& c, const std::string& path) {
  return as_reply(c.Get(path));
}

std::pair<std::string, std::string> open_session(const Fixture& f, const std::string& agent = "agent") {
  auto r = post(f.client(""), "/v1/sessions", {{"principal", {{"agent_id", agent}, {"role", "dev"}}}});
  REQUIRE(r.status == 201);
  return {r.body["session_id"].get<std::string>(), r.body["token"].get<std::string>()};
}

struct Frame {
  std::optional<std::uint64_t> id;
  std::string event;
  Value data;
};

// Collects SSE frames on a background connection.
class StreamReader {
 public:
  StreamReader(int port, const std::string& query) {
    thread_ = std::thread([this, port, query] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(std::chrono::seconds(10));
      c.Get("/v1/stream" + query, [this](const char* data, std::size_t n) {
        std::lock_guard lock(mutex_);
        buffer_.append(data, n);
        parse();
        return !stop_;
      });
    });
  }
  ~StreamReader() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
  }

  bool wait_for(std::size_t count, std::chrono::milliseconds timeout) {
    const auto until = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < until) {
      {
        std::lock_guard lock(mutex_);
        if (frames_.size() >= count) return true;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return false;
  }
  std::vector<Frame> frames() {
    std::lock_guard lock(mutex_);
    return frames_;
  }
  bool connected() {
    std::lock_guard lock(mutex_);
    return saw_comment_;
  }

 private:
  void parse() {
    std::size_t end;
    while ((end = buffer_.find("\n\n")) != std::string::npos) {
      const std::string block = buffer_.substr(0, end);
      buffer_.erase(0, end + 2);
      Frame f;
      bool any = false;
      std::size_t pos = 0;
      while (pos < block.size()) {
        auto nl = block.find('\n', pos);
        if (nl == std::string::npos) nl = block.size();
        const std::string line = block.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.rfind(":", 0) == 0) {
          saw_comment_ = true;
        } else if (line.rfind("id: ", 0) == 0) {
          f.id = std::stoull(line.substr(4));
        } else if (line.rfind("event: ", 0) == 0) {
          f.event = line.substr(7);
          any = true;
        } else if (line.rfind("data: ", 0) == 0) {
          f.data = Value::parse(line.substr(6));
        }
      }
      if (any) frames_.push_back(std::move(f));
    }
  }

  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::mutex mutex_;
  std::string buffer_;
  std::vector<Frame> frames_;
  bool saw_comment_ = false;
};

}  // namespace

TEST_SUITE("http") {

TEST_CASE("session flow and status codes") {
  Fixture f("rule no_shell { when: tool.name == \"shell\" effect: deny reason: \"no\" }");
  CHECK(get(f.client(""), "/healthz").status == 200);
  const auto [sid, token] = open_session(f);
  auto agent = f.client(token);

  auto r = post(agent, "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "read_file"}}}, {"args", {{"p", 1}}}});
  CHECK(r.status == 200);
  CHECK(r.body["decision"]["verdict"] == "allow");
  CHECK(r.body["seq"] == 1);
  const auto call_id = r.body["call_id"].get<std::string>();

  r = post(agent, "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "shell"}}}});
  CHECK(r.status == 200);
  CHECK(r.body["decision"]["verdict"] == "deny");
  CHECK(r.body["matched"] == Value::array({"no_shell"}));

  r = post(agent, "/v1/sessions/" + sid + "/report", {{"call_id", call_id}, {"status", "ok"}, {"result", {{"t", "x"}}}});
  CHECK(r.status == 200);
  CHECK(r.body["phase"] == "post");
  r = post(agent, "/v1/sessions/" + sid + "/report", {{"call_id", call_id}, {"result", 1}});
  CHECK(r.status == 409);
  CHECK(r.body["error"]["code"] == "AlreadyReported");

  CHECK(post(agent, "/v1/sessions/" + sid + "/check", {{"args", 1}}).status == 422);
  CHECK(post(agent, "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "x"}}}, {"args", {1, 2}}}).status == 422);
  CHECK(post(agent, "/v1/sessions/s-missing/check", {{"tool", {{"name", "x"}}}}).status == 404);
  CHECK(post(f.client("wrong"), "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "x"}}}}).status == 401);
  CHECK(post(f.client(""), "/v1/sessions", {{"principal", {{"role", "x"}}}}).status == 422);

  // Another session's token does not work here.
  const auto [other, other_token] = open_session(f, "other");
  CHECK(post(f.client(other_token), "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "x"}}}}).status == 401);

  CHECK(get(agent, "/v1/sessions").status == 401);
  r = get(f.client(), "/v1/sessions/" + sid);
  CHECK(r.status == 200);
  CHECK(r.body.dump().find(token) == std::string::npos);

  CHECK(post(agent, "/v1/sessions/" + sid + "/end", Value::object()).status == 200);
  r = post(agent, "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "x"}}}});
  CHECK(r.status == 409);
  CHECK(r.body["error"]["code"] == "SessionEnded");
}

TEST_CASE("policies over HTTP") {
  Fixture f("");
  auto admin = f.client();
  auto r = get(admin, "/v1/policies");
  CHECK(r.status == 200);
  CHECK(r.body["version"] == 1);
  CHECK(get(f.client(""), "/v1/policies").status == 401);

  r = as_reply(admin.Put(
      "/v1/policies", Value{{"text", "rule x { when: true effect: deny }"}, {"expected_version", 1}}.dump(),
      "application/json"));
  CHECK(r.status == 200);
  CHECK(r.body["version"] == 2);

  httplib::Headers stale = {{"If-Match", "1"}};
  r = as_reply(admin.Put("/v1/policies", stale, "rule y { when: true effect: allow }",
                                                      "text/plain"));
  CHECK(r.status == 409);
  CHECK(r.body["error"]["code"] == "StaleVersion");

  r = as_reply(admin.Put("/v1/policies", "rule {", "text/plain"));
  CHECK(r.status == 400);
  CHECK(r.body["error"]["code"] == "PolicyRejected");
  CHECK_FALSE(r.body["error"]["diagnostics"].empty());
  CHECK(r.body["error"]["diagnostics"][0].contains("line"));

  auto raw = admin.Get("/v1/policies?format=text");
  REQUIRE(raw);
  CHECK(raw->body == "rule x { when: true effect: deny }");
  CHECK(raw->get_header_value("X-Policy-Version") == "2");

  r = as_reply(admin.Post(
      "/v1/policies/validate", "rule a { when: true effect: deny enabled: false }", "text/plain"));
  CHECK(r.status == 200);
  CHECK(r.body["diagnostics"][0]["code"] == "UnreachableRule");
}

TEST_CASE("reviews, decisions and audit over HTTP") {
  Fixture f("rule big { when: args.amount > 100 effect: review(timeout: 30s, on_timeout: deny) reason: \"large\" }");
  const auto [sid, token] = open_session(f);
  auto agent = f.client(token);
  auto r = post(agent, "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "pay"}}}, {"args", {{"amount", 500}}}});
  CHECK(r.status == 202);
  const auto rid = r.body["decision_id"].get<std::string>();

  r = get(f.client(), "/v1/reviews/pending");
  REQUIRE(r.status == 200);
  REQUIRE(r.body["reviews"].size() == 1);
  CHECK(r.body["reviews"][0]["review_id"] == rid);

  CHECK(post(agent, "/v1/reviews/" + rid + "/resolve", {{"verdict", "allow"}, {"reason", "x"}}).status == 401);
  CHECK(post(f.client(), "/v1/reviews/" + rid + "/resolve", {{"verdict", "maybe"}, {"reason", "x"}}).status == 422);

  std::thread resolver([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    post(f.client(), "/v1/reviews/" + rid + "/resolve", {{"verdict", "allow"}, {"reviewer", "erin"}, {"reason", "fine"}});
  });
  r = get(agent, "/v1/decisions/" + rid + "?wait=5s");
  resolver.join();
  CHECK(r.status == 200);
  CHECK(r.body["decision"]["verdict"] == "allow");
  CHECK(r.body["decision"]["via"] == "review");

  r = post(f.client(), "/v1/reviews/" + rid + "/resolve", {{"verdict", "deny"}, {"reason", "late"}});
  CHECK(r.status == 409);
  CHECK(r.body["error"]["code"] == "AlreadyTerminal");
  CHECK(post(f.client(), "/v1/reviews/r-none/resolve", {{"verdict", "deny"}, {"reason", "x"}}).status == 404);

  r = get(f.client(), "/v1/audit?kind=decision&session_id=" + sid);
  REQUIRE(r.status == 200);
  REQUIRE(r.body["records"].size() == 1);
  CHECK(r.body["records"][0]["reviewer"]["name"] == "erin");
  const auto id = r.body["records"][0]["record_id"].get<std::uint64_t>();
  auto raw = f.client().Get("/v1/audit/" + std::to_string(id));
  REQUIRE(raw);
  CHECK(Value::parse(raw->body) == r.body["records"][0]);
  CHECK(get(f.client(), "/v1/audit?limit=abc").status == 422);
  CHECK(get(agent, "/v1/audit").status == 401);
}

TEST_CASE("unknown routes answer with the error shape") {
  Fixture f("");
  const auto r = get(f.client(), "/v1/nope");
  CHECK(r.status == 404);
  CHECK(r.body["error"]["code"] == "NotFound");
  CHECK(get(f.client(), "/healthz").body["status"] == "ok");
}

TEST_CASE("templates over HTTP") {
  auto cfg = testing::test_config();
  cfg.templates_path = std::string(AGENTGUARD_SOURCE_DIR) + "/templates/catalog.json";
  Fixture f("", cfg);
  auto r = get(f.client(), "/v1/templates");
  REQUIRE(r.status == 200);
  CHECK(r.body["templates"].size() >= 3);
  r = post(f.client(), "/v1/templates/block_shell/instantiate", {{"params", {{"min_trust", "2"}}}});
  CHECK(r.status == 200);
  CHECK(r.body["text"].get<std::string>().find("principal.trust_level < 2") != std::string::npos);
  CHECK(post(f.client(), "/v1/templates/block_shell/instantiate", {{"params", {{"min_trust", "x"}}}}).status == 422);
}

TEST_CASE("event stream follows audit order") {
  Fixture f("rule r { when: args.n > 95 effect: review(timeout: 30s, on_timeout: deny) }");
  const auto start_after = f.service.audit_log().last_id();
  StreamReader reader(f.port, "?token=" + std::string(kAdminToken) + "&after=" + std::to_string(start_after));
  const auto [sid, token] = open_session(f);
  auto agent = f.client(token);
  for (int i = 0; i < 100; ++i) {
    post(agent, "/v1/sessions/" + sid + "/check", {{"tool", {{"name", "t"}}}, {"args", {{"n", i}}}});
  }
  // 1 session_started + 96 decisions + 4 review_pending.
  REQUIRE(reader.wait_for(101, std::chrono::seconds(10)));
  const auto pending = f.service.pending_reviews();
  REQUIRE(pending.size() == 4);
  f.service.resolve_review(pending[0].review_id, Verdict::deny, "ops", "no");
  REQUIRE(reader.wait_for(103, std::chrono::seconds(5)));

  const auto frames = reader.frames();
  CHECK(reader.connected());
  std::vector<std::uint64_t> expected_ids;
  f.service.audit_log().for_each([&](const Value& r) {
    const auto id = r["record_id"].get<std::uint64_t>();
    if (id > start_after) expected_ids.push_back(id);
  });
  std::vector<std::uint64_t> ids;
  std::map<std::string, int> counts;
  for (const auto& fr : frames) {
    ++counts[fr.event];
    if (fr.event == "review_resolved") {
      CHECK(fr.data["decision"]["verdict"] == "deny");
      CHECK(fr.data["reviewer"]["name"] == "ops");
      continue;
    }
    REQUIRE(fr.id);
    CHECK((*fr.id) == fr.data["record_id"].get<std::uint64_t>());
    ids.push_back(*fr.id);
    if (fr.event == "session_started") CHECK_FALSE(fr.data.contains("token_sha256"));
  }
  CHECK(ids == expected_ids);
  CHECK(counts["session_started"] == 1);
  CHECK(counts["check_decided"] == 97);
  CHECK(counts["review_pending"] == 4);
  CHECK(counts["review_resolved"] == 1);
  // The resolution is announced right before the decision it produced.
  CHECK(frames[frames.size() - 2].event == "review_resolved");
  CHECK(frames.back().event == "check_decided");

  StreamReader unauthorized(f.port, "");
  CHECK_FALSE(unauthorized.wait_for(1, std::chrono::milliseconds(200)));
}

TEST_CASE("a blocked session does not stall the others") {
  Fixture f("rule hold { when: tool.name == \"wire\" effect: review(timeout: 30s, on_timeout: deny) }");
  const auto [a, a_token] = open_session(f, "a");
  const auto [b, b_token] = open_session(f, "b");
  std::thread blocked([&, a = a, a_token = a_token] {
    auto r = post(f.client(a_token), "/v1/sessions/" + a + "/check", {{"tool", {{"name", "wire"}}}, {"wait", "2s"}});
    CHECK(r.status == 202);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 20; ++i) {
    CHECK(post(f.client(b_token), "/v1/sessions/" + b + "/check", {{"tool", {{"name", "read"}}}}).status == 200);
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::milliseconds(1'500));
  blocked.join();
}

TEST_CASE("error mapping") {
  CHECK(status_for("PolicyRejected") == 400);
  CHECK(status_for("Unauthorized") == 401);
  CHECK(status_for("UnknownReview") == 404);
  CHECK(status_for("StaleVersion") == 409);
  CHECK(status_for("ValidationError") == 422);
  CHECK(status_for("Unavailable") == 503);
  CHECK(status_for("Whatever") == 500);
}

}  // TEST_SUITE
