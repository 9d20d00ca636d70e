#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace agentguard {

using Timestamp = std::chrono::system_clock::time_point;
using Millis = std::chrono::milliseconds;

// Injectable wall clock. Every module that reasons about deadlines takes one
// of these instead of calling system_clock directly.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override { return std::chrono::system_clock::now(); }
};

// Test clock. Thread-safe; time only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = Timestamp{std::chrono::seconds{1'800'000'000}})
      : ticks_(start.time_since_epoch().count()) {}

  Timestamp now() const override { return Timestamp{Timestamp::duration{ticks_.load()}}; }
  void set(Timestamp t) { ticks_.store(t.time_since_epoch().count()); }
  void advance(Timestamp::duration d) { ticks_.fetch_add(d.count()); }

 private:
  std::atomic<Timestamp::rep> ticks_;
};

// RFC 3339 UTC with millisecond precision, e.g. "2026-10-15T04:32:00.123Z".
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

// "300s", "500ms", "5m", "1h". Bare integers are milliseconds.
std::optional<Millis> parse_duration(std::string_view text);
std::string format_duration(Millis d);

}  // namespace agentguard
