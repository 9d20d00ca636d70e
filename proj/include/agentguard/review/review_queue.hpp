#pragma once

#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "agentguard/common/clock.hpp"
#include "agentguard/common/ids.hpp"
#include "agentguard/model/types.hpp"

namespace agentguard::review {

enum class State { pending, resolved, timed_out };
std::string_view to_string(State s);

struct Resolution {
  Verdict verdict = Verdict::deny;
  std::string reviewer;
  std::string reason;
  Timestamp resolved_at{};
};

struct ReviewRequest {
  std::string session_id;
  std::string call_id;
  Phase phase = Phase::pre;
  std::string reason;  // why the policy asked for review
  Value context;       // event snapshot shown to the reviewer
  Millis timeout{300'000};
  Verdict on_timeout = Verdict::deny;
};

struct ReviewItem {
  std::string review_id;
  ReviewRequest request;
  Timestamp created{};
  Timestamp timeout_at{};
  State state = State::pending;
  std::optional<Resolution> resolution;  // iff state == resolved
  std::optional<Decision> decision;      // iff state != pending
};

Value to_json(const ReviewItem& item);

// Outcome of waiting on an item.
struct WaitResult {
  enum class Kind { pending, decided, failed } kind = Kind::pending;
  std::optional<Decision> decision;
  std::string error;
};

class ReviewQueue {
 public:
  // Runs exactly once per item, outside the queue lock, after the terminal
  // transition and before any waiter is released. Throwing marks the item's
  // delivery as failed.
  using TerminalHook = std::function<void(const ReviewItem&)>;

  ReviewQueue(const Clock& clock, IdGenerator& ids);
  ~ReviewQueue();

  void set_terminal_hook(TerminalHook hook);

  std::string enqueue(const ReviewRequest& request);
  // Recovery: re-creates a pending item with its original identity and deadline.
  void restore(const std::string& review_id, const ReviewRequest& request, Timestamp created,
               Timestamp timeout_at);
  // Recovery: drops an item whose final decision is already on record.
  void forget(const std::string& review_id);

  // First terminal transition wins. Resolving at or after the deadline times
  // the item out instead and throws AlreadyTerminal, as does any later call.
  Decision resolve(const std::string& review_id, Verdict verdict, const std::string& reviewer,
                   const std::string& reason);

  std::vector<std::string> expire(Timestamp now);

  std::optional<ReviewItem> get(const std::string& review_id) const;
  std::vector<ReviewItem> list_pending() const;
  std::size_t size() const;

  // Blocks up to `max_wait` of real time for a delivered decision.
  WaitResult wait(const std::string& review_id, Millis max_wait);

  // Background sweep calling expire(clock.now()) every `interval`.
  void start_sweeper(Millis interval);
  void stop_sweeper();

 private:
  struct Slot {
    ReviewItem item;
    bool delivered = false;
    std::string delivery_error;
  };

  Decision terminal_decision(const ReviewItem& item) const;
  void deliver(const std::vector<std::string>& ids);

  const Clock& clock_;
  IdGenerator& ids_;
  TerminalHook hook_;
  mutable std::mutex mutex_;
  std::condition_variable delivered_cv_;
  std::map<std::string, Slot> items_;

  std::mutex sweep_mutex_;
  std::condition_variable sweep_cv_;
  bool sweeping_ = false;
  std::thread sweeper_;
};

}  // namespace agentguard::review
