#include "agentguard/server/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "agentguard/common/error.hpp"

namespace agentguard::server {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    try {
      return Value::parse(v).get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("bad string literal " + v);
    }
  }
  if (v.size() >= 2 && v.front() == '\'' && v.back() == '\'') return v.substr(1, v.size() - 2);
  return v;
}

// Drops a trailing `# comment` that is not inside quotes.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(key + ": expected a boolean, got '" + v + "'");
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ValidationError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

Millis to_duration(const std::string& key, const std::string& v) {
  auto d = parse_duration(v);
  if (!d || d->count() < 0) throw ValidationError(key + ": expected a duration, got '" + v + "'");
  return *d;
}

std::vector<std::string> to_list(const std::string& key, const std::string& raw) {
  if (raw.empty() || raw.front() != '[') return {unquote(raw)};
  try {
    return Value::parse(raw).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(key + ": expected a list of strings");
  }
}

}  // namespace

void ServerConfig::set(const std::string& section, const std::string& key, const std::string& raw) {
  const std::string v = unquote(raw);
  if (section == "llm") {
    if (key == "backend") {
      if (v != "mock" && v != "http" && v != "none") {
        throw ValidationError("llm.backend must be mock, http or none");
      }
      llm.backend = v;
    } else if (key == "url") {
      llm.url = v;
    } else if (key == "model") {
      llm.model = v;
    } else if (key == "timeout") {
      llm.timeout = to_duration("llm.timeout", v);
    } else if (key == "on_error") {
      if (v == "review") llm.on_error = engine::LlmErrorMode::review;
      else if (v == "deny") llm.on_error = engine::LlmErrorMode::deny;
      else throw ValidationError("llm.on_error must be review or deny");
    } else if (key == "mock_keywords") {
      llm.mock_keywords = to_list("llm.mock_keywords", raw);
    } else if (key == "prompt_cap") {
      llm.prompt_cap = static_cast<std::size_t>(to_int("llm.prompt_cap", v));
    } else {
      throw ValidationError("unknown config key llm." + key);
    }
    return;
  }
  if (!section.empty()) throw ValidationError("unknown config section [" + section + "]");

  if (key == "listen") {
    const auto colon = v.rfind(':');
    if (colon == std::string::npos) throw ValidationError("listen must be host:port");
    host = v.substr(0, colon);
    port = static_cast<int>(to_int("listen", v.substr(colon + 1)));
    if (port < 0 || port > 65535) throw ValidationError("listen port out of range");
  } else if (key == "policy_path") {
    policy_path = v;
  } else if (key == "audit_path") {
    audit_path = v;
  } else if (key == "audit_fsync") {
    audit_fsync = to_bool(key, v);
  } else if (key == "audit_warn_bytes") {
    audit_warn_bytes = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "fail_mode") {
    if (v == "open") fail_mode = FailMode::open;
    else if (v == "closed") fail_mode = FailMode::closed;
    else throw ValidationError("fail_mode must be open or closed");
  } else if (key == "review_sweep") {
    review_sweep = to_duration(key, v);
  } else if (key == "idle_timeout") {
    idle_timeout = to_duration(key, v);
  } else if (key == "max_wait") {
    max_wait = to_duration(key, v);
  } else if (key == "admin_token") {
    admin_token = v;
  } else if (key == "console_dir") {
    console_dir = v;
  } else if (key == "templates_path") {
    templates_path = v;
  } else if (key == "persist_policy_updates") {
    persist_policy_updates = to_bool(key, v);
  } else if (key == "threads") {
    threads = static_cast<int>(to_int(key, v));
    if (threads < 1) throw ValidationError("threads must be >= 1");
  } else {
    throw ValidationError("unknown config key " + key);
  }
}

ServerConfig ServerConfig::parse(const std::string& text) {
  ServerConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    try {
      if (s.front() == '[') {
        if (s.back() != ']') throw ValidationError("unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ValidationError("expected key = value");
      cfg.set(section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ServerConfig ServerConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ServerConfig::apply_env(const std::function<const char*(const char*)>& getenv_fn) {
  static const char* const top[] = {"listen",       "policy_path",   "audit_path",
                                    "audit_fsync",  "audit_warn_bytes", "fail_mode",
                                    "review_sweep", "idle_timeout",  "max_wait",
                                    "admin_token",  "console_dir",   "templates_path",
                                    "persist_policy_updates", "threads"};
  static const char* const llm_keys[] = {"backend", "url",           "model",     "timeout",
                                         "on_error", "mock_keywords", "prompt_cap"};
  auto upper = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
  };
  for (const char* key : top) {
    const std::string name = "AGENTGUARD_" + upper(key);
    if (const char* v = getenv_fn(name.c_str())) set("", key, v);
  }
  for (const char* key : llm_keys) {
    const std::string name = "AGENTGUARD_LLM_" + upper(key);
    if (const char* v = getenv_fn(name.c_str())) set("llm", key, v);
  }
  if (const char* v = getenv_fn("AGENTGUARD_LLM_KEY")) llm.api_key = v;
}

}  // namespace agentguard::server
