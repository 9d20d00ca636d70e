#pragma once

// Shared setup for tests that drive the Service or the HTTP server.

#include <filesystem>
#include <string>

#include "agentguard/server/service.hpp"

namespace agentguard::testing {

inline constexpr const char* kAdminToken = "test-admin-token";

// Memory-only audit, no policy persistence, deterministic mock LLM.
server::ServerConfig test_config();

Principal test_principal(const std::string& agent = "agent", int trust_level = 1);

server::CheckRequest check_of(const std::string& tool, Value args = Value::object(),
                              Millis wait = Millis{0});

// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace agentguard::testing
