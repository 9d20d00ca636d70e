#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "agentguard/model/types.hpp"

namespace agentguard::engine {

// One prior tool call in a session, with its result once reported.
struct HistoryEntry {
  ToolCallEvent event;
  std::optional<ToolResultEvent> result;
};

// Immutable, ordered snapshot of a session prefix (events with seq below some
// bound). Entries are shared, never mutated; copying a view is cheap.
class HistoryView {
 public:
  HistoryView() = default;
  explicit HistoryView(std::vector<std::shared_ptr<const HistoryEntry>> entries)
      : entries_(std::move(entries)) {}

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const HistoryEntry& operator[](std::size_t i) const { return *entries_[i]; }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Convenience for tests and replay: builds a view from plain events.
  static HistoryView of(const std::vector<ToolCallEvent>& events) {
    std::vector<std::shared_ptr<const HistoryEntry>> entries;
    entries.reserve(events.size());
    for (const auto& e : events) {
      entries.push_back(std::make_shared<const HistoryEntry>(HistoryEntry{e, std::nullopt}));
    }
    return HistoryView(std::move(entries));
  }

 private:
  std::vector<std::shared_ptr<const HistoryEntry>> entries_;
};

}  // namespace agentguard::engine
