#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

namespace agentguard {

class IdGenerator {
 public:
  virtual ~IdGenerator() = default;
  // Returns "<prefix>-<token>"; tokens never repeat within one generator.
  virtual std::string next(std::string_view prefix) = 0;
  // Opaque secret suitable for bearer credentials.
  virtual std::string secret() = 0;
};

// Random 64-bit ids, so ids stay unique across server restarts.
class RandomIds final : public IdGenerator {
 public:
  RandomIds();
  std::string next(std::string_view prefix) override;
  std::string secret() override;

 private:
  std::mutex mutex_;
  std::mt19937_64 rng_;
  std::uint64_t counter_ = 0;
};

// Deterministic ids ("c-1", "c-2", ...), used by offline replay and tests.
class SequentialIds final : public IdGenerator {
 public:
  std::string next(std::string_view prefix) override;
  std::string secret() override;

 private:
  std::atomic<std::uint64_t> counter_{0};
};

std::string sha256_hex(std::string_view data);

// Constant-time comparison for credentials.
bool secure_equals(std::string_view a, std::string_view b);

}  // namespace agentguard
