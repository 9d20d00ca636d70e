#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "agentguard/engine/history.hpp"
#include "agentguard/llm/backend.hpp"
#include "agentguard/llm/prompt.hpp"

namespace agentguard::llm {

enum class VerdictState { flag, safe, error };
std::string_view to_string(VerdictState s);

struct InspectorVerdict {
  VerdictState state = VerdictState::error;
  std::string rationale;  // for errors: "<class>: detail", class in {timeout, unreachable, unparseable}
  Millis backend_latency{0};
};

// Sent as the system message on every request.
extern const char* const kSystemInstruction;

// Finds the last line of the form `VERDICT: FLAG|SAFE` (case-insensitive,
// surrounding whitespace ignored). nullopt when there is none.
std::optional<VerdictState> parse_verdict_text(std::string_view text);

struct InspectorConfig {
  Millis timeout{10'000};  // whole inspection, retry included
  std::size_t prompt_cap = kDefaultPromptCap;
  std::string model;
};

class Inspector {
 public:
  Inspector(std::shared_ptr<Backend> backend, InspectorConfig config = {});

  // Never throws; failures come back as state=error.
  InspectorVerdict inspect(const PromptTemplate& prompt, const ToolCallEvent& event,
                           const engine::HistoryView& history, std::string_view reason_hint,
                           const ToolResultEvent* result = nullptr) const;

  const InspectorConfig& config() const { return config_; }

 private:
  std::shared_ptr<Backend> backend_;
  InspectorConfig config_;
};

}  // namespace agentguard::llm
