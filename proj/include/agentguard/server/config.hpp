#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "agentguard/common/clock.hpp"
#include "agentguard/engine/engine.hpp"

namespace agentguard::server {

enum class FailMode { open, closed };

struct LlmConfig {
  std::string backend = "mock";  // mock | http | none
  std::string url;
  std::string model = "gpt-4o-mini";
  std::string api_key;  // from AGENTGUARD_LLM_KEY only
  Millis timeout{10'000};
  engine::LlmErrorMode on_error = engine::LlmErrorMode::review;
  std::vector<std::string> mock_keywords{"DROP TABLE"};
  std::size_t prompt_cap = 16 * 1024;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8787;
  std::string policy_path;
  std::string audit_path;
  bool audit_fsync = true;
  std::uint64_t audit_warn_bytes = 1ull << 30;
  FailMode fail_mode = FailMode::closed;
  Millis review_sweep{1'000};
  Millis idle_timeout{24 * 3'600'000};
  Millis max_wait{60'000};
  std::string admin_token;
  std::string console_dir;
  std::string templates_path;
  bool persist_policy_updates = true;
  int threads = 64;
  LlmConfig llm;

  // Applies one `key = value` setting. `section` is "" or "llm".
  void set(const std::string& section, const std::string& key, const std::string& value);

  // TOML-style subset: `key = value`, `[llm]` tables, `#` comments, quoted
  // strings, booleans, integers and string arrays. Throws ValidationError.
  static ServerConfig parse(const std::string& text);
  static ServerConfig load(const std::string& path);

  // AGENTGUARD_<KEY> and AGENTGUARD_LLM_<KEY> override file values;
  // AGENTGUARD_LLM_KEY sets the LLM credential.
  void apply_env(const std::function<const char*(const char*)>& getenv_fn);
};

}  // namespace agentguard::server
