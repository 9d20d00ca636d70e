#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "agentguard/server/service.hpp"

namespace httplib {
class Server;
}

namespace agentguard::server {

// One server-sent event: name plus JSON payload.
struct StreamEvent {
  std::string name;
  Value data;
};

// Maps an audit record to the stream events it announces, in order. A
// review decision yields `review_resolved` followed by `check_decided`.
std::vector<StreamEvent> stream_events_for(const Value& record);

// HTTP status for a domain error code ("UnknownSession" -> 404, ...).
int status_for(const std::string& error_code);

struct HttpOptions {
  Millis keepalive{15'000};  // SSE comment interval
  std::size_t stream_capacity = 4096;
};

// HTTP/1.1 + JSON front end over a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service, HttpOptions options = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(). Blocking.
  void run();
  // bind() + run() on a background thread.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void install_routes();

  Service& service_;
  HttpOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

}  // namespace agentguard::server
