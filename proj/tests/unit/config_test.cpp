#include <doctest.h>

#include <map>

#include "agentguard/common/error.hpp"
#include "agentguard/server/config.hpp"

using namespace agentguard;
using server::ServerConfig;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  const ServerConfig c;
  CHECK(c.port == 8787);
  CHECK(c.fail_mode == server::FailMode::closed);
  CHECK(c.llm.backend == "mock");
  CHECK(c.llm.api_key.empty());
  CHECK(c.audit_fsync);
}

TEST_CASE("file syntax") {
  const auto c = ServerConfig::parse(R"(# server
listen = "0.0.0.0:9000"
policy_path = "/etc/agentguard/policy.agp"  # trailing comment
audit_fsync = false
fail_mode = open
max_wait = 30s
threads = 4
admin_token = "tok#en"

[llm]
backend = "http"
url = 'http://localhost:8000/v1/chat/completions'
timeout = 2500ms
on_error = deny
mock_keywords = ["DROP TABLE", "rm -rf"]
)");
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9000);
  CHECK(c.policy_path == "/etc/agentguard/policy.agp");
  CHECK_FALSE(c.audit_fsync);
  CHECK(c.fail_mode == server::FailMode::open);
  CHECK(c.max_wait == Millis{30'000});
  CHECK(c.threads == 4);
  CHECK(c.admin_token == "tok#en");
  CHECK(c.llm.backend == "http");
  CHECK(c.llm.url == "http://localhost:8000/v1/chat/completions");
  CHECK(c.llm.timeout == Millis{2'500});
  CHECK(c.llm.on_error == engine::LlmErrorMode::deny);
  CHECK(c.llm.mock_keywords == std::vector<std::string>{"DROP TABLE", "rm -rf"});
}

TEST_CASE("bad settings are rejected with a line number") {
  auto message = [](const std::string& text) -> std::string {
    try {
      ServerConfig::parse(text);
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("threads = 2\nbogus = 1\n").find("line 2") != std::string::npos);
  CHECK_FALSE(message("fail_mode = sometimes").empty());
  CHECK_FALSE(message("listen = nohost").empty());
  CHECK_FALSE(message("threads = 0").empty());
  CHECK_FALSE(message("max_wait = soon").empty());
  CHECK_FALSE(message("[llm]\nbackend = carrier-pigeon").empty());
  CHECK_FALSE(message("[storage]\nx = 1").empty());
  CHECK_FALSE(message("just words").empty());
  // The credential cannot come from the file.
  CHECK_FALSE(message("[llm]\napi_key = \"sk-123\"").empty());
}

TEST_CASE("environment overrides the file and supplies the credential") {
  auto c = ServerConfig::parse("listen = \"127.0.0.1:1000\"\n[llm]\nmodel = \"a\"\n");
  const std::map<std::string, std::string> env = {
      {"AGENTGUARD_LISTEN", "127.0.0.1:2000"},
      {"AGENTGUARD_FAIL_MODE", "open"},
      {"AGENTGUARD_LLM_MODEL", "b"},
      {"AGENTGUARD_LLM_KEY", "sk-secret"},
  };
  c.apply_env([&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.port == 2000);
  CHECK(c.fail_mode == server::FailMode::open);
  CHECK(c.llm.model == "b");
  CHECK(c.llm.api_key == "sk-secret");

  ServerConfig untouched;
  untouched.apply_env([](const char*) -> const char* { return nullptr; });
  CHECK(untouched.llm.api_key.empty());
}

}  // TEST_SUITE
