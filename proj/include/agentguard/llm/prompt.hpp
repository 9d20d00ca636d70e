#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agentguard/engine/history.hpp"
#include "agentguard/model/types.hpp"

namespace agentguard::llm {

enum class Placeholder { tool_name, args, history, principal_role, reason_hint, result };

// The documented placeholder set: {{tool.name}} {{args}} {{history}}
// {{principal.role}} {{reason_hint}} {{result}}. {{result}} renders empty
// for pre-phase checks.
std::string_view placeholder_name(Placeholder p);

inline constexpr std::size_t kArgLeafLimit = 256;
inline constexpr std::size_t kDefaultPromptCap = 16 * 1024;

struct PromptTemplate {
  std::string text;
  int max_history_events = 10;
  std::vector<std::variant<std::string, Placeholder>> pieces;

  // Throws UnknownPlaceholder (with the offending name) for anything outside
  // the documented set, or for an unterminated `{{`.
  static PromptTemplate parse(std::string_view text, int max_history_events = 10);
};

// Args with every string leaf cut to kArgLeafLimit bytes, compact JSON.
std::string summarize_args(const Value& args);

// Deterministic substitution. {{history}} expands to the most recent
// `max_history_events` entries, oldest first, one per line as
// `<seq> <tool.name> <summarized args>`. Output never exceeds `max_chars`.
std::string render_prompt(const PromptTemplate& t, const ToolCallEvent& event,
                          const engine::HistoryView& history, std::string_view reason_hint,
                          const ToolResultEvent* result = nullptr,
                          std::size_t max_chars = kDefaultPromptCap);

}  // namespace agentguard::llm
