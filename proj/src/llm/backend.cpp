#include "agentguard/llm/backend.hpp"

#include <httplib.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "agentguard/common/error.hpp"

namespace agentguard::llm {

MockBackend::MockBackend(std::vector<std::string> keywords, Mode mode, Millis delay)
    : keywords_(std::move(keywords)), mode_(mode), delay_(delay) {}

ChatReply MockBackend::complete(const ChatRequest& request) {
  calls_.fetch_add(1);
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  switch (mode_.load()) {
    case Mode::unreachable:
      return {false, "", "connection refused (mock)"};
    case Mode::garbage:
      return {true, "I am not sure what you are asking.", ""};
    case Mode::keywords:
      break;
  }
  for (const auto& k : keywords_) {
    if (!k.empty() && request.user.find(k) != std::string::npos) {
      return {true, "The request contains \"" + k + "\".\nVERDICT: FLAG", ""};
    }
  }
  return {true, "Nothing suspicious found.\nVERDICT: SAFE", ""};
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("LLM url needs a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = config_.url;
    path_ = "/v1/chat/completions";
  } else {
    scheme_host_port_ = config_.url.substr(0, path_start);
    path_ = config_.url.substr(path_start);
  }
}

ChatReply HttpBackend::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const nlohmann::json body = {
      {"model", request.model.empty() ? config_.model : request.model},
      {"temperature", 0},
      {"messages",
       {{{"role", "system"}, {"content", request.system}},
        {{"role", "user"}, {"content", request.user}}}},
  };
  auto res = client.Post(path_, headers,
                         body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                         "application/json");
  if (!res) return {false, "", "transport: " + httplib::to_string(res.error())};
  if (res->status < 200 || res->status >= 300) {
    return {false, "", "http status " + std::to_string(res->status)};
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    return {true, reply.at("choices").at(0).at("message").at("content").get<std::string>(), ""};
  } catch (const nlohmann::json::exception& e) {
    return {false, "", std::string("malformed response: ") + e.what()};
  }
}

}  // namespace agentguard::llm
