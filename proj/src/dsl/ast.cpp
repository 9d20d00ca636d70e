#include "agentguard/dsl/ast.hpp"
#include "agentguard/dsl/diagnostic.hpp"

namespace agentguard::dsl {

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
  }
  return "?";
}

std::string_view to_string(EvalErrorMode m) {
  switch (m) {
    case EvalErrorMode::deny: return "deny";
    case EvalErrorMode::review: return "review";
    case EvalErrorMode::ignore: return "ignore";
  }
  return "?";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::error: return "error";
    case Severity::warning: return "warning";
    case Severity::note: return "note";
  }
  return "?";
}

CompiledPattern CompiledPattern::compile(std::string source) {
  auto compiled = std::make_shared<const regex::Pattern>(regex::Pattern::compile(source));
  return CompiledPattern{std::move(source), std::move(compiled)};
}

const Rule* PolicySet::find(std::string_view id) const {
  for (const auto& r : rules) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void for_each_path(const Condition& c,
                   const std::function<void(const AttributePath&, bool)>& fn, bool in_history) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AndNode> || std::is_same_v<T, OrNode>) {
          for (const auto& child : n.children) for_each_path(child, fn, in_history);
        } else if constexpr (std::is_same_v<T, NotNode>) {
          for_each_path(*n.child, fn, in_history);
        } else if constexpr (std::is_same_v<T, CompareNode>) {
          if (const auto* p = std::get_if<AttributePath>(&n.lhs)) fn(*p, in_history);
          if (const auto* p = std::get_if<AttributePath>(&n.rhs)) fn(*p, in_history);
        } else if constexpr (std::is_same_v<T, MatchNode> || std::is_same_v<T, ContainsNode> ||
                             std::is_same_v<T, InNode> || std::is_same_v<T, ExistsNode>) {
          fn(n.path, in_history);
        } else if constexpr (std::is_same_v<T, HistoryExistsNode> ||
                             std::is_same_v<T, HistoryCountNode>) {
          for_each_path(*n.inner, fn, true);
        }
      },
      c.node);
}

std::string Diagnostic::format(std::string_view filename) const {
  std::string out = std::string(filename) + ":" + std::to_string(span.line) + ":" +
                    std::to_string(span.column) + ": " + std::string(to_string(severity)) + "[" +
                    code + "]: " + message;
  for (const auto& r : related) {
    out += "\n" + std::string(filename) + ":" + std::to_string(r.line) + ":" +
           std::to_string(r.column) + ": note: related location";
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.severity == Severity::error) return true;
  }
  return false;
}

void to_json(Value& j, const Diagnostic& d) {
  j = Value::object();
  j["severity"] = to_string(d.severity);
  j["code"] = d.code;
  j["message"] = d.message;
  j["line"] = d.span.line;
  j["column"] = d.span.column;
  if (!d.related.empty()) {
    Value related = Value::array();
    for (const auto& r : d.related) related.push_back({{"line", r.line}, {"column", r.column}});
    j["related"] = related;
  }
}

}  // namespace agentguard::dsl
