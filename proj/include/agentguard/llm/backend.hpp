#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "agentguard/common/clock.hpp"

namespace agentguard::llm {

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
};

// `ok == false` means the request never produced assistant text (connection
// refused, HTTP failure, malformed envelope). Garbage text is still ok.
struct ChatReply {
  bool ok = false;
  std::string text;
  std::string error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatReply complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Deterministic offline backend. Flags when any keyword occurs in the user
// message; otherwise answers SAFE.
class MockBackend final : public Backend {
 public:
  enum class Mode { keywords, garbage, unreachable };

  explicit MockBackend(std::vector<std::string> keywords = {"DROP TABLE"},
                       Mode mode = Mode::keywords, Millis delay = Millis{0});

  ChatReply complete(const ChatRequest& request) override;
  std::string name() const override { return "mock"; }

  void set_mode(Mode m) { mode_.store(m); }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<std::string> keywords_;
  std::atomic<Mode> mode_;
  Millis delay_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpBackendConfig {
  std::string url;  // full endpoint, e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model = "gpt-4o-mini";
  std::string api_key;  // sent as a bearer token when non-empty
  Millis timeout{10'000};
};

// OpenAI-style chat completion client.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ChatReply complete(const ChatRequest& request) override;
  std::string name() const override { return "http"; }

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace agentguard::llm
