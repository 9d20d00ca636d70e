#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "agentguard/common/clock.hpp"
#include "agentguard/common/ids.hpp"
#include "agentguard/engine/history.hpp"
#include "agentguard/model/types.hpp"

namespace agentguard::session {

enum class Status { active, ended, expired };
std::string_view to_string(Status s);

// One checked call as the session sees it. Decisions stay unset while a
// review is pending.
struct CallState {
  std::shared_ptr<const engine::HistoryEntry> entry;
  std::optional<Decision> pre;
  std::optional<Decision> post;
  std::optional<std::string> pre_review_id;
  std::optional<std::string> post_review_id;
  bool result_reported = false;
};

struct SessionInfo {
  std::string session_id;
  Principal principal;
  Timestamp created{};
  Timestamp last_active{};
  Status status = Status::active;
  std::uint64_t last_seq = 0;
  std::size_t event_count = 0;
};

struct CreatedSession {
  std::string session_id;
  std::string token;  // returned once; only its hash is kept
};

class SessionManager {
 public:
  SessionManager(const Clock& clock, IdGenerator& ids);

  CreatedSession create_session(const Principal& principal);
  // Recovery path: re-creates a session with its original identity.
  void restore_session(const std::string& session_id, const Principal& principal,
                       const std::string& token_hash, Timestamp created);

  bool authenticate(const std::string& session_id, std::string_view token) const;

  // Serializes all checks and reports of one session. Hold it across seq
  // assignment, evaluation and append.
  std::unique_lock<std::mutex> serialize(const std::string& session_id);

  // Next seq the session will accept; throws UnknownSession / SessionEnded.
  std::uint64_t next_seq(const std::string& session_id) const;

  // Appends a checked call. `event.seq` must equal last seq + 1.
  std::uint64_t append_event(const std::string& session_id, const ToolCallEvent& event,
                             std::optional<Decision> pre,
                             std::optional<std::string> review_id = std::nullopt);
  void set_pre_decision(const std::string& session_id, const std::string& call_id,
                        const Decision& d);

  // Attaches a result. Throws UnknownCall, AlreadyReported.
  void attach_result(const std::string& session_id, const ToolResultEvent& result,
                     std::optional<Decision> post,
                     std::optional<std::string> review_id = std::nullopt);
  void set_post_decision(const std::string& session_id, const std::string& call_id,
                         const Decision& d);

  std::optional<CallState> call(const std::string& session_id, const std::string& call_id) const;

  // Entries with seq < before_seq, as an immutable snapshot.
  engine::HistoryView history_view(const std::string& session_id, std::uint64_t before_seq) const;

  void end_session(const std::string& session_id);
  void mark_expired(const std::string& session_id);
  std::vector<std::string> expire_idle(Timestamp now, Millis idle_timeout);

  SessionInfo info(const std::string& session_id) const;
  std::vector<SessionInfo> list() const;
  std::vector<CallState> calls(const std::string& session_id) const;
  bool exists(const std::string& session_id) const;

 private:
  struct Session {
    std::string id;
    Principal principal;
    std::string token_hash;
    Timestamp created{};
    std::mutex order;  // see serialize()
    mutable std::mutex state;
    Timestamp last_active{};
    Status status = Status::active;
    std::vector<CallState> calls;
    std::unordered_map<std::string, std::size_t> by_call_id;
  };

  std::shared_ptr<Session> find(const std::string& session_id) const;
  static void require_active(const Session& s);

  const Clock& clock_;
  IdGenerator& ids_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace agentguard::session
