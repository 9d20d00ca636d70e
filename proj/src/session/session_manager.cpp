#include "agentguard/session/session_manager.hpp"

#include "agentguard/common/error.hpp"

namespace agentguard::session {

std::string_view to_string(Status s) {
  switch (s) {
    case Status::active: return "active";
    case Status::ended: return "ended";
    case Status::expired: return "expired";
  }
  return "?";
}

SessionManager::SessionManager(const Clock& clock, IdGenerator& ids) : clock_(clock), ids_(ids) {}

CreatedSession SessionManager::create_session(const Principal& principal) {
  principal.validate();
  auto s = std::make_shared<Session>();
  s->id = ids_.next("s");
  s->principal = principal;
  const std::string token = ids_.secret();
  s->token_hash = sha256_hex(token);
  s->created = s->last_active = clock_.now();
  std::unique_lock lock(map_mutex_);
  if (!sessions_.emplace(s->id, s).second) throw StorageError("session id collision: " + s->id);
  return {s->id, token};
}

void SessionManager::restore_session(const std::string& session_id, const Principal& principal,
                                     const std::string& token_hash, Timestamp created) {
  auto s = std::make_shared<Session>();
  s->id = session_id;
  s->principal = principal;
  s->token_hash = token_hash;
  s->created = s->last_active = created;
  std::unique_lock lock(map_mutex_);
  sessions_[session_id] = std::move(s);
}

bool SessionManager::authenticate(const std::string& session_id, std::string_view token) const {
  std::shared_ptr<Session> s;
  {
    std::shared_lock lock(map_mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return false;
    s = it->second;
  }
  return secure_equals(s->token_hash, sha256_hex(token));
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& session_id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw UnknownSession("unknown session " + session_id);
  return it->second;
}

void SessionManager::require_active(const Session& s) {
  if (s.status != Status::active) {
    throw SessionEnded("session " + s.id + " is " + std::string(to_string(s.status)));
  }
}

std::unique_lock<std::mutex> SessionManager::serialize(const std::string& session_id) {
  auto s = find(session_id);
  // The session object is never erased, so the mutex outlives the lock.
  return std::unique_lock<std::mutex>(s->order);
}

std::uint64_t SessionManager::next_seq(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  require_active(*s);
  return s->calls.empty() ? 1 : s->calls.back().entry->event.seq + 1;
}

std::uint64_t SessionManager::append_event(const std::string& session_id,
                                           const ToolCallEvent& event, std::optional<Decision> pre,
                                           std::optional<std::string> review_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  require_active(*s);
  const std::uint64_t expected = s->calls.empty() ? 1 : s->calls.back().entry->event.seq + 1;
  if (event.seq != expected) {
    throw SequenceError("session " + session_id + " expected seq " + std::to_string(expected) +
                        ", got " + std::to_string(event.seq));
  }
  if (s->by_call_id.count(event.call_id) != 0) {
    throw SequenceError("duplicate call id " + event.call_id);
  }
  CallState c;
  c.entry = std::make_shared<const engine::HistoryEntry>(engine::HistoryEntry{event, std::nullopt});
  c.pre = std::move(pre);
  c.pre_review_id = std::move(review_id);
  s->by_call_id.emplace(event.call_id, s->calls.size());
  s->calls.push_back(std::move(c));
  s->last_active = clock_.now();
  return event.seq;
}

void SessionManager::set_pre_decision(const std::string& session_id, const std::string& call_id,
                                      const Decision& d) {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  auto it = s->by_call_id.find(call_id);
  if (it == s->by_call_id.end()) throw UnknownCall("unknown call " + call_id);
  s->calls[it->second].pre = d;
}

void SessionManager::attach_result(const std::string& session_id, const ToolResultEvent& result,
                                   std::optional<Decision> post,
                                   std::optional<std::string> review_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  auto it = s->by_call_id.find(result.call_id);
  if (it == s->by_call_id.end()) throw UnknownCall("unknown call " + result.call_id);
  CallState& c = s->calls[it->second];
  if (c.result_reported) throw AlreadyReported("result for " + result.call_id + " already reported");
  // Copy-on-write: snapshots taken earlier keep pointing at the old entry.
  auto updated = std::make_shared<engine::HistoryEntry>(*c.entry);
  updated->result = result;
  c.entry = std::move(updated);
  c.post = std::move(post);
  c.post_review_id = std::move(review_id);
  c.result_reported = true;
  s->last_active = clock_.now();
}

void SessionManager::set_post_decision(const std::string& session_id, const std::string& call_id,
                                       const Decision& d) {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  auto it = s->by_call_id.find(call_id);
  if (it == s->by_call_id.end()) throw UnknownCall("unknown call " + call_id);
  s->calls[it->second].post = d;
}

std::optional<CallState> SessionManager::call(const std::string& session_id,
                                              const std::string& call_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  auto it = s->by_call_id.find(call_id);
  if (it == s->by_call_id.end()) return std::nullopt;
  return s->calls[it->second];
}

engine::HistoryView SessionManager::history_view(const std::string& session_id,
                                                 std::uint64_t before_seq) const {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  std::vector<std::shared_ptr<const engine::HistoryEntry>> entries;
  entries.reserve(s->calls.size());
  for (const auto& c : s->calls) {
    if (c.entry->event.seq >= before_seq) break;
    entries.push_back(c.entry);
  }
  return engine::HistoryView(std::move(entries));
}

void SessionManager::end_session(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  require_active(*s);
  s->status = Status::ended;
  s->last_active = clock_.now();
}

void SessionManager::mark_expired(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  if (s->status == Status::active) s->status = Status::expired;
}

std::vector<std::string> SessionManager::expire_idle(Timestamp now, Millis idle_timeout) {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& [_, s] : sessions_) all.push_back(s);
  }
  std::vector<std::string> expired;
  for (const auto& s : all) {
    std::lock_guard lock(s->state);
    if (s->status == Status::active && now - s->last_active > idle_timeout) {
      s->status = Status::expired;
      expired.push_back(s->id);
    }
  }
  return expired;
}

SessionInfo SessionManager::info(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  SessionInfo i;
  i.session_id = s->id;
  i.principal = s->principal;
  i.created = s->created;
  i.last_active = s->last_active;
  i.status = s->status;
  i.event_count = s->calls.size();
  i.last_seq = s->calls.empty() ? 0 : s->calls.back().entry->event.seq;
  return i;
}

std::vector<SessionInfo> SessionManager::list() const {
  std::vector<std::string> ids;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& [id, _] : sessions_) ids.push_back(id);
  }
  std::vector<SessionInfo> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(info(id));
  return out;
}

std::vector<CallState> SessionManager::calls(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->state);
  return s->calls;
}

bool SessionManager::exists(const std::string& session_id) const {
  std::shared_lock lock(map_mutex_);
  return sessions_.count(session_id) != 0;
}

}  // namespace agentguard::session
