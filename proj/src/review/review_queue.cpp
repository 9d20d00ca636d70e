#include "agentguard/review/review_queue.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

#include "agentguard/common/error.hpp"

namespace agentguard::review {

std::string_view to_string(State s) {
  switch (s) {
    case State::pending: return "pending";
    case State::resolved: return "resolved";
    case State::timed_out: return "timed_out";
  }
  return "?";
}

Value to_json(const ReviewItem& item) {
  Value j = {{"review_id", item.review_id},
             {"session_id", item.request.session_id},
             {"call_id", item.request.call_id},
             {"phase", to_string(item.request.phase)},
             {"reason", item.request.reason},
             {"context", item.request.context},
             {"created", format_timestamp(item.created)},
             {"timeout_at", format_timestamp(item.timeout_at)},
             {"on_timeout", to_string(item.request.on_timeout)},
             {"state", to_string(item.state)}};
  if (item.resolution) {
    j["resolution"] = {{"verdict", to_string(item.resolution->verdict)},
                       {"reviewer", item.resolution->reviewer},
                       {"reason", item.resolution->reason},
                       {"resolved_at", format_timestamp(item.resolution->resolved_at)}};
  }
  if (item.decision) j["decision"] = *item.decision;
  return j;
}

ReviewQueue::ReviewQueue(const Clock& clock, IdGenerator& ids) : clock_(clock), ids_(ids) {}

ReviewQueue::~ReviewQueue() { stop_sweeper(); }

void ReviewQueue::set_terminal_hook(TerminalHook hook) {
  std::lock_guard lock(mutex_);
  hook_ = std::move(hook);
}

std::string ReviewQueue::enqueue(const ReviewRequest& request) {
  if (request.timeout.count() <= 0) throw ValidationError("review timeout must be positive");
  const std::string id = ids_.next("r");
  const auto now = clock_.now();
  restore(id, request, now, now + request.timeout);
  return id;
}

void ReviewQueue::restore(const std::string& review_id, const ReviewRequest& request,
                          Timestamp created, Timestamp timeout_at) {
  Slot slot;
  slot.item.review_id = review_id;
  slot.item.request = request;
  slot.item.created = created;
  slot.item.timeout_at = timeout_at;
  std::lock_guard lock(mutex_);
  items_[review_id] = std::move(slot);
}

void ReviewQueue::forget(const std::string& review_id) {
  std::lock_guard lock(mutex_);
  items_.erase(review_id);
}

Decision ReviewQueue::terminal_decision(const ReviewItem& item) const {
  if (item.state == State::resolved) {
    return Decision{item.resolution->verdict, Via::review, item.resolution->reason,
                    item.review_id};
  }
  return Decision{item.request.on_timeout, Via::timeout,
                  "review not resolved within " +
                      format_duration(std::chrono::duration_cast<Millis>(item.timeout_at -
                                                                         item.created)),
                  item.review_id};
}

void ReviewQueue::deliver(const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    ReviewItem snapshot;
    TerminalHook hook;
    {
      std::lock_guard lock(mutex_);
      snapshot = items_.at(id).item;
      hook = hook_;
    }
    std::string error;
    if (hook) {
      try {
        hook(snapshot);
      } catch (const std::exception& e) {
        error = e.what();
        spdlog::error("review {}: terminal hook failed: {}", id, error);
      }
    }
    {
      std::lock_guard lock(mutex_);
      auto& slot = items_.at(id);
      slot.delivered = true;
      slot.delivery_error = error;
    }
    delivered_cv_.notify_all();
  }
}

Decision ReviewQueue::resolve(const std::string& review_id, Verdict verdict,
                              const std::string& reviewer, const std::string& reason) {
  std::vector<std::string> fired;
  std::optional<Decision> decision;
  std::string terminal_error;
  {
    std::lock_guard lock(mutex_);
    auto it = items_.find(review_id);
    if (it == items_.end()) throw UnknownReview("unknown review " + review_id);
    ReviewItem& item = it->second.item;
    const auto now = clock_.now();
    if (item.state != State::pending) {
      terminal_error = "review " + review_id + " is already " + std::string(to_string(item.state));
    } else if (now >= item.timeout_at) {
      item.state = State::timed_out;
      item.decision = terminal_decision(item);
      fired.push_back(review_id);
      terminal_error = "review " + review_id + " timed out before it was resolved";
    } else {
      item.state = State::resolved;
      item.resolution = Resolution{verdict, reviewer, reason, now};
      item.decision = terminal_decision(item);
      decision = item.decision;
      fired.push_back(review_id);
    }
  }
  deliver(fired);
  if (!decision) throw AlreadyTerminal(terminal_error);
  return *decision;
}

std::vector<std::string> ReviewQueue::expire(Timestamp now) {
  std::vector<std::string> fired;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, slot] : items_) {
      if (slot.item.state == State::pending && now >= slot.item.timeout_at) {
        slot.item.state = State::timed_out;
        slot.item.decision = terminal_decision(slot.item);
        fired.push_back(id);
      }
    }
  }
  deliver(fired);
  return fired;
}

std::optional<ReviewItem> ReviewQueue::get(const std::string& review_id) const {
  std::lock_guard lock(mutex_);
  auto it = items_.find(review_id);
  if (it == items_.end()) return std::nullopt;
  return it->second.item;
}

std::vector<ReviewItem> ReviewQueue::list_pending() const {
  std::lock_guard lock(mutex_);
  std::vector<ReviewItem> out;
  for (const auto& [_, slot] : items_) {
    if (slot.item.state == State::pending) out.push_back(slot.item);
  }
  std::sort(out.begin(), out.end(), [](const ReviewItem& a, const ReviewItem& b) {
    return a.created < b.created || (a.created == b.created && a.review_id < b.review_id);
  });
  return out;
}

std::size_t ReviewQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

WaitResult ReviewQueue::wait(const std::string& review_id, Millis max_wait) {
  const auto deadline = std::chrono::steady_clock::now() + max_wait;
  while (true) {
    // Lazy expiry so waiters notice deadlines even without a sweeper.
    expire(clock_.now());
    std::unique_lock lock(mutex_);
    auto it = items_.find(review_id);
    if (it == items_.end()) throw UnknownReview("unknown review " + review_id);
    const Slot& slot = it->second;
    if (slot.delivered) {
      if (!slot.delivery_error.empty()) {
        return {WaitResult::Kind::failed, std::nullopt, slot.delivery_error};
      }
      return {WaitResult::Kind::decided, slot.item.decision, {}};
    }
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) return {WaitResult::Kind::pending, std::nullopt, {}};
    // Short slices keep injected-clock deadlines observable.
    delivered_cv_.wait_until(lock, std::min(deadline, now + std::chrono::milliseconds(50)));
  }
}

void ReviewQueue::start_sweeper(Millis interval) {
  stop_sweeper();
  {
    std::lock_guard lock(sweep_mutex_);
    sweeping_ = true;
  }
  sweeper_ = std::thread([this, interval] {
    std::unique_lock lock(sweep_mutex_);
    while (sweeping_) {
      sweep_cv_.wait_for(lock, interval, [this] { return !sweeping_; });
      if (!sweeping_) break;
      lock.unlock();
      try {
        expire(clock_.now());
      } catch (const std::exception& e) {
        spdlog::error("review sweep failed: {}", e.what());
      }
      lock.lock();
    }
  });
}

void ReviewQueue::stop_sweeper() {
  {
    std::lock_guard lock(sweep_mutex_);
    sweeping_ = false;
  }
  sweep_cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
}

}  // namespace agentguard::review
