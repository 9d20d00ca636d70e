#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agentguard/common/clock.hpp"
#include "agentguard/model/types.hpp"

namespace agentguard::audit {

// Bounded, in-order feed of appended records for one consumer. When the
// consumer falls `capacity` records behind, the feed is closed instead of
// slowing the writer.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  // Next record, or nullopt on timeout or once closed and drained.
  std::optional<Value> next(Millis timeout);
  bool closed() const;
  bool overflowed() const;
  void close();

 private:
  friend class AuditLog;
  bool offer(const Value& record);  // false once closed

  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Value> queue_;
  bool closed_ = false;
  bool overflowed_ = false;
};

struct AuditQuery {
  std::optional<std::string> session_id;
  std::optional<std::string> call_id;
  std::optional<Timestamp> since;  // inclusive
  std::optional<Timestamp> until;  // exclusive
  std::optional<Verdict> decision;
  std::optional<std::string> rule_id;
  std::optional<Phase> phase;
  std::optional<std::string> kind;
  std::uint64_t after = 0;  // record_id cursor
  std::size_t limit = 100;
};

struct AuditPage {
  std::vector<Value> records;
  std::optional<std::uint64_t> next_after;  // set when more records may follow
};

bool matches(const AuditQuery& q, const Value& record);

struct AuditLogOptions {
  std::string path;          // empty: memory only
  bool fsync = true;         // fdatasync after every append
  std::uint64_t warn_bytes = 1ull << 30;
};

// Append-only NDJSON log with a sidecar offset index (`<path>.idx`, one
// little-endian uint64 per record).
class AuditLog {
 public:
  AuditLog(AuditLogOptions options, const Clock& clock);
  ~AuditLog();
  AuditLog(const AuditLog&) = delete;
  AuditLog& operator=(const AuditLog&) = delete;

  // Assigns record_id (and timestamp when absent), writes, and returns the id
  // once the bytes are durable. Throws StorageError.
  std::uint64_t append(Value record);

  // Exact bytes of a stored record, without the trailing newline.
  std::optional<std::string> read_raw(std::uint64_t record_id) const;
  std::optional<Value> read(std::uint64_t record_id) const;

  AuditPage query(const AuditQuery& q) const;
  void for_each(const std::function<void(const Value&)>& fn) const;

  std::shared_ptr<Subscription> subscribe(std::size_t capacity = 4096,
                                          std::optional<std::uint64_t> replay_after = std::nullopt);

  std::uint64_t last_id() const;
  std::size_t size() const;
  const std::string& path() const { return options_.path; }

  // Set when open() dropped a torn final line or rebuilt the index.
  bool repaired_tail() const { return repaired_tail_; }
  bool rebuilt_index() const { return rebuilt_index_; }

 private:
  void open_file();
  std::string line_at(std::size_t index) const;  // caller holds mutex_

  AuditLogOptions options_;
  const Clock& clock_;
  mutable std::mutex mutex_;
  int fd_ = -1;
  int idx_fd_ = -1;
  std::uint64_t end_offset_ = 0;
  std::vector<std::uint64_t> offsets_;
  std::vector<std::uint64_t> ids_;
  std::vector<std::string> memory_;  // memory-only mode
  std::uint64_t last_id_ = 0;
  bool warned_size_ = false;
  bool repaired_tail_ = false;
  bool rebuilt_index_ = false;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
};

}  // namespace agentguard::audit
