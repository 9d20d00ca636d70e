#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "agentguard/dsl/ast.hpp"

namespace agentguard::dsl {

enum class Severity { error, warning, note };
std::string_view to_string(Severity s);

struct Diagnostic {
  Severity severity = Severity::error;
  std::string code;  // SyntaxError, DuplicateRuleId, InvalidPattern, ...
  std::string message;
  SourceSpan span;
  std::vector<SourceSpan> related;

  // "file:line:col: error[Code]: message" plus one "note" line per related span.
  std::string format(std::string_view filename = "<policy>") const;
};

bool has_errors(const std::vector<Diagnostic>& diags);

void to_json(Value& j, const Diagnostic& d);

}  // namespace agentguard::dsl
