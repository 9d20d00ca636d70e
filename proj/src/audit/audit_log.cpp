#include "agentguard/audit/audit_log.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <spdlog/spdlog.h>

#include "agentguard/common/error.hpp"

namespace agentguard::audit {

// ---- Subscription ----

std::optional<Value> Subscription::next(Millis timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  Value v = std::move(queue_.front());
  queue_.pop_front();
  return v;
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_ && queue_.empty();
}

bool Subscription::overflowed() const {
  std::lock_guard lock(mutex_);
  return overflowed_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::offer(const Value& record) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    if (queue_.size() >= capacity_) {
      overflowed_ = true;
      closed_ = true;
    } else {
      queue_.push_back(record);
    }
  }
  cv_.notify_all();
  return true;
}

// ---- query filter ----

bool matches(const AuditQuery& q, const Value& r) {
  auto str = [&](const char* key) -> std::string {
    auto it = r.find(key);
    return it != r.end() && it->is_string() ? it->get<std::string>() : std::string();
  };
  if (q.kind && str("kind") != *q.kind) return false;
  if (q.session_id && str("session_id") != *q.session_id) return false;
  if (q.call_id && str("call_id") != *q.call_id) return false;
  if (q.phase && str("phase") != to_string(*q.phase)) return false;
  if (q.since || q.until) {
    const auto ts = parse_timestamp(str("timestamp"));
    if (!ts) return false;
    if (q.since && *ts < *q.since) return false;
    if (q.until && *ts >= *q.until) return false;
  }
  if (q.decision) {
    auto it = r.find("final");
    if (it == r.end() || !it->is_object() || it->value("verdict", "") != to_string(*q.decision)) {
      return false;
    }
  }
  if (q.rule_id) {
    auto it = r.find("matched");
    if (it == r.end() || !it->is_array()) return false;
    const bool hit = std::any_of(it->begin(), it->end(), [&](const Value& m) {
      return m.is_object() && m.value("rule_id", "") == *q.rule_id;
    });
    if (!hit) return false;
  }
  return true;
}

// ---- AuditLog ----

namespace {

void write_all(int fd, const char* data, std::size_t size, std::uint64_t offset) {
  while (size > 0) {
    const ssize_t n = ::pwrite(fd, data, size, static_cast<off_t>(offset));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError(std::string("audit write failed: ") + std::strerror(errno));
    }
    data += n;
    size -= static_cast<std::size_t>(n);
    offset += static_cast<std::uint64_t>(n);
  }
}

std::string dump(const Value& v) {
  return v.dump(-1, ' ', false, Value::error_handler_t::replace);
}

}  // namespace

AuditLog::AuditLog(AuditLogOptions options, const Clock& clock)
    : options_(std::move(options)), clock_(clock) {
  if (!options_.path.empty()) open_file();
}

AuditLog::~AuditLog() {
  std::lock_guard lock(mutex_);
  for (auto& w : subscribers_) {
    if (auto s = w.lock()) s->close();
  }
  if (fd_ >= 0) ::close(fd_);
  if (idx_fd_ >= 0) ::close(idx_fd_);
}

void AuditLog::open_file() {
  fd_ = ::open(options_.path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw StorageError("cannot open audit log " + options_.path + ": " + std::strerror(errno));
  }

  // Scan existing records; a damaged final line is a torn write and is cut.
  std::ifstream in(options_.path, std::ios::binary);
  std::string line;
  std::uint64_t offset = 0;
  std::uint64_t good_end = 0;
  while (std::getline(in, line)) {
    const bool complete = !in.eof();
    const std::uint64_t line_start = offset;
    offset += line.size() + (complete ? 1 : 0);
    std::optional<std::uint64_t> id;
    if (complete) {
      try {
        const auto v = Value::parse(line);
        if (v.is_object() && v.contains("record_id") && v["record_id"].is_number_unsigned()) {
          id = v["record_id"].get<std::uint64_t>();
        }
      } catch (const nlohmann::json::exception&) {
      }
    }
    if (!id || *id <= last_id_) {
      if (in.peek() == std::ifstream::traits_type::eof()) break;  // torn tail
      throw StorageError("audit log " + options_.path + " is corrupt at byte " +
                         std::to_string(line_start));
    }
    offsets_.push_back(line_start);
    ids_.push_back(*id);
    last_id_ = *id;
    good_end = offset;
  }
  in.close();

  struct stat st {};
  ::fstat(fd_, &st);
  if (static_cast<std::uint64_t>(st.st_size) != good_end) {
    spdlog::warn("audit log {}: dropping {} bytes of torn final record", options_.path,
                 static_cast<std::uint64_t>(st.st_size) - good_end);
    if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0) {
      throw StorageError("cannot truncate torn audit tail: " + std::string(std::strerror(errno)));
    }
    ::fsync(fd_);
    repaired_tail_ = true;
  }
  end_offset_ = good_end;

  // Sidecar index: trusted only if it agrees with the scan exactly.
  const std::string idx_path = options_.path + ".idx";
  idx_fd_ = ::open(idx_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (idx_fd_ < 0) throw StorageError("cannot open audit index " + idx_path);
  std::vector<std::uint64_t> stored;
  {
    std::ifstream idx(idx_path, std::ios::binary);
    std::uint64_t v;
    while (idx.read(reinterpret_cast<char*>(&v), sizeof v)) stored.push_back(v);
    ::fstat(idx_fd_, &st);
    if (static_cast<std::uint64_t>(st.st_size) != stored.size() * sizeof(std::uint64_t)) {
      stored.clear();
      stored.push_back(~0ull);  // force mismatch
    }
  }
  if (stored != offsets_) {
    if (::ftruncate(idx_fd_, 0) != 0) throw StorageError("cannot rewrite audit index");
    if (!offsets_.empty()) {
      write_all(idx_fd_, reinterpret_cast<const char*>(offsets_.data()),
                offsets_.size() * sizeof(std::uint64_t), 0);
    }
    rebuilt_index_ = !(stored.empty() && offsets_.empty());
  }
}

std::uint64_t AuditLog::append(Value record) {
  std::lock_guard lock(mutex_);
  const std::uint64_t id = last_id_ + 1;
  record["record_id"] = id;
  if (!record.contains("timestamp")) record["timestamp"] = format_timestamp(clock_.now());
  const std::string line = dump(record) + "\n";

  if (fd_ >= 0) {
    try {
      write_all(fd_, line.data(), line.size(), end_offset_);
      if (options_.fsync && ::fdatasync(fd_) != 0) {
        throw StorageError(std::string("audit fdatasync failed: ") + std::strerror(errno));
      }
    } catch (...) {
      // Roll back a partial line so the file stays a sequence of whole records.
      if (::ftruncate(fd_, static_cast<off_t>(end_offset_)) != 0) {
        spdlog::error("audit rollback failed: {}", std::strerror(errno));
      }
      throw;
    }
    const std::uint64_t at = end_offset_;
    write_all(idx_fd_, reinterpret_cast<const char*>(&at), sizeof at,
              offsets_.size() * sizeof(std::uint64_t));
    offsets_.push_back(at);
    end_offset_ += line.size();
    if (!warned_size_ && end_offset_ > options_.warn_bytes) {
      warned_size_ = true;
      spdlog::warn("audit log {} exceeds {} bytes; rotation is not automatic", options_.path,
                   options_.warn_bytes);
    }
  } else {
    memory_.push_back(line.substr(0, line.size() - 1));
  }
  ids_.push_back(id);
  last_id_ = id;

  auto it = subscribers_.begin();
  while (it != subscribers_.end()) {
    auto s = it->lock();
    if (!s || !s->offer(record)) {
      it = subscribers_.erase(it);
    } else {
      ++it;
    }
  }
  return id;
}

std::string AuditLog::line_at(std::size_t index) const {
  if (fd_ < 0) return memory_[index];
  const std::uint64_t start = offsets_[index];
  const std::uint64_t end = index + 1 < offsets_.size() ? offsets_[index + 1] : end_offset_;
  std::string buf(end - start - 1, '\0');
  std::size_t got = 0;
  while (got < buf.size()) {
    const ssize_t n = ::pread(fd_, buf.data() + got, buf.size() - got,
                              static_cast<off_t>(start + got));
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      throw StorageError("audit read failed at offset " + std::to_string(start));
    }
    got += static_cast<std::size_t>(n);
  }
  return buf;
}

std::optional<std::string> AuditLog::read_raw(std::uint64_t record_id) const {
  std::lock_guard lock(mutex_);
  auto it = std::lower_bound(ids_.begin(), ids_.end(), record_id);
  if (it == ids_.end() || *it != record_id) return std::nullopt;
  return line_at(static_cast<std::size_t>(it - ids_.begin()));
}

std::optional<Value> AuditLog::read(std::uint64_t record_id) const {
  auto raw = read_raw(record_id);
  if (!raw) return std::nullopt;
  return Value::parse(*raw);
}

AuditPage AuditLog::query(const AuditQuery& q) const {
  std::lock_guard lock(mutex_);
  AuditPage page;
  const std::size_t limit = std::max<std::size_t>(q.limit, 1);
  auto start = std::upper_bound(ids_.begin(), ids_.end(), q.after);
  for (auto i = static_cast<std::size_t>(start - ids_.begin()); i < ids_.size(); ++i) {
    if (page.records.size() == limit) {
      page.next_after = ids_[i - 1];
      break;
    }
    Value v = Value::parse(line_at(i));
    if (matches(q, v)) page.records.push_back(std::move(v));
  }
  return page;
}

void AuditLog::for_each(const std::function<void(const Value&)>& fn) const {
  std::size_t count;
  {
    std::lock_guard lock(mutex_);
    count = ids_.size();
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::string line;
    {
      std::lock_guard lock(mutex_);
      line = line_at(i);
    }
    fn(Value::parse(line));
  }
}

std::shared_ptr<Subscription> AuditLog::subscribe(std::size_t capacity,
                                                  std::optional<std::uint64_t> replay_after) {
  auto s = std::make_shared<Subscription>(capacity);
  std::lock_guard lock(mutex_);
  if (replay_after) {
    auto start = std::upper_bound(ids_.begin(), ids_.end(), *replay_after);
    for (auto i = static_cast<std::size_t>(start - ids_.begin()); i < ids_.size(); ++i) {
      if (!s->offer(Value::parse(line_at(i)))) break;
    }
  }
  subscribers_.push_back(s);
  return s;
}

std::uint64_t AuditLog::last_id() const {
  std::lock_guard lock(mutex_);
  return last_id_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return ids_.size();
}

}  // namespace agentguard::audit
