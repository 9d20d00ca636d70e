#include <cstdio>

#include "agentguard/dsl/parser.hpp"

namespace agentguard::dsl {
namespace {

// DSL string literal. Bytes >= 0x80 pass through untouched so arbitrary
// UTF-8 (and even invalid sequences) survive a round trip.
std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
  return out;
}

bool plain_key(const std::string& key) {
  if (key.empty()) return false;
  const auto first = static_cast<unsigned char>(key[0]);
  if (!(std::isalpha(first) || first == '_')) return false;
  for (unsigned char c : key) {
    if (!(std::isalnum(c) || c == '_' || c == '-')) return false;
  }
  return true;
}

std::string path_text(const AttributePath& p) {
  std::string out(to_string(p.root));
  for (const auto& seg : p.segments) {
    out.push_back('.');
    if (const auto* idx = std::get_if<std::size_t>(&seg)) {
      out += std::to_string(*idx);
    } else {
      const auto& key = std::get<std::string>(seg);
      out += plain_key(key) ? key : quote(key);
    }
  }
  return out;
}

std::string literal_text(const Value& v) {
  if (v.is_string()) return quote(v.get_ref<const std::string&>());
  return v.dump();
}

std::string operand_text(const Operand& o) {
  if (const auto* p = std::get_if<AttributePath>(&o)) return path_text(*p);
  return literal_text(std::get<Value>(o));
}

enum class Ctx { top, in_and, in_or, in_not };

std::string cond_text(const Condition& c, Ctx ctx) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstNode>) {
          return n.value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, AndNode> || std::is_same_v<T, OrNode>) {
          constexpr bool is_and = std::is_same_v<T, AndNode>;
          std::string out;
          for (std::size_t i = 0; i < n.children.size(); ++i) {
            if (i > 0) out += is_and ? " and " : " or ";
            out += cond_text(n.children[i], is_and ? Ctx::in_and : Ctx::in_or);
          }
          // Nested same-kind groups and any group under `not` keep their
          // parentheses so the tree shape survives re-parsing.
          const bool wrap = ctx == Ctx::in_not || (is_and && ctx == Ctx::in_and) ||
                            (!is_and && (ctx == Ctx::in_and || ctx == Ctx::in_or));
          return wrap ? "(" + out + ")" : out;
        } else if constexpr (std::is_same_v<T, NotNode>) {
          return "not " + cond_text(*n.child, Ctx::in_not);
        } else if constexpr (std::is_same_v<T, CompareNode>) {
          return operand_text(n.lhs) + " " + std::string(to_string(n.op)) + " " +
                 operand_text(n.rhs);
        } else if constexpr (std::is_same_v<T, MatchNode>) {
          return path_text(n.path) + " matches " + quote(n.pattern.source);
        } else if constexpr (std::is_same_v<T, ContainsNode>) {
          return path_text(n.path) + " contains " + literal_text(n.needle);
        } else if constexpr (std::is_same_v<T, InNode>) {
          std::string out = path_text(n.path) + " in [";
          for (std::size_t i = 0; i < n.values.size(); ++i) {
            if (i > 0) out += ", ";
            out += literal_text(n.values[i]);
          }
          return out + "]";
        } else if constexpr (std::is_same_v<T, ExistsNode>) {
          return "exists(" + path_text(n.path) + ")";
        } else if constexpr (std::is_same_v<T, HistoryExistsNode>) {
          return "history.exists(" + cond_text(*n.inner, Ctx::top) + ")";
        } else {
          return "history.count(" + cond_text(*n.inner, Ctx::top) + ") " +
                 std::string(to_string(n.op)) + " " + std::to_string(n.bound);
        }
      },
      c.node);
}

std::string effect_text(const Effect& e) {
  switch (e.kind) {
    case EffectKind::allow: return "allow";
    case EffectKind::deny: return "deny";
    case EffectKind::review: {
      const ReviewParams p = e.review.value_or(ReviewParams{});
      return "review(timeout: " + format_duration(p.timeout) +
             ", on_timeout: " + std::string(to_string(p.on_timeout)) + ")";
    }
    case EffectKind::llm: {
      const LlmParams p = e.llm.value_or(LlmParams{});
      return "llm(prompt: " + quote(p.prompt_template) +
             ", on_flag: " + std::string(to_string(p.on_flag)) +
             ", max_history: " + std::to_string(p.max_history) + ")";
    }
  }
  return "deny";
}

}  // namespace

std::string serialize_condition(const Condition& c) { return cond_text(c, Ctx::top); }

std::string serialize_policy_set(const PolicySet& ps) {
  std::string out = "# agentguard policy set\n";
  const PolicySet defaults;
  if (ps.version != defaults.version || ps.default_decision != defaults.default_decision ||
      ps.on_eval_error != defaults.on_eval_error) {
    out += "\npolicy {\n";
    out += "  version: " + std::to_string(ps.version) + "\n";
    out += "  default: " + std::string(to_string(ps.default_decision)) + "\n";
    out += "  on_eval_error: " + std::string(to_string(ps.on_eval_error)) + "\n";
    out += "}\n";
  }
  for (const auto& r : ps.rules) {
    out += "\nrule " + r.id + " {\n";
    out += "  phase: " + std::string(to_string(r.phase)) + "\n";
    if (r.priority != 0) out += "  priority: " + std::to_string(r.priority) + "\n";
    out += "  when: " + serialize_condition(r.when) + "\n";
    out += "  effect: " + effect_text(r.effect) + "\n";
    if (!r.effect.reason.empty()) out += "  reason: " + quote(r.effect.reason) + "\n";
    if (!r.enabled) out += "  enabled: false\n";
    out += "}\n";
  }
  return out;
}

}  // namespace agentguard::dsl
