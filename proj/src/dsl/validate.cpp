#include <set>

#include "agentguard/dsl/parser.hpp"

namespace agentguard::dsl {
namespace {

bool is_tool_name(const AttributePath& p) {
  return p.root == AttributeRoot::tool && p.segments.size() == 1 &&
         std::holds_alternative<std::string>(p.segments[0]) &&
         std::get<std::string>(p.segments[0]) == "name";
}

// Collects tool-name literals a condition compares against, plus every
// compiled pattern it uses.
void scan(const Condition& c, std::vector<std::string>& names,
          std::vector<const CompiledPattern*>& patterns) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, AndNode> || std::is_same_v<T, OrNode>) {
          for (const auto& child : n.children) scan(child, names, patterns);
        } else if constexpr (std::is_same_v<T, NotNode>) {
          scan(*n.child, names, patterns);
        } else if constexpr (std::is_same_v<T, HistoryExistsNode> ||
                             std::is_same_v<T, HistoryCountNode>) {
          scan(*n.inner, names, patterns);
        } else if constexpr (std::is_same_v<T, CompareNode>) {
          const auto* lp = std::get_if<AttributePath>(&n.lhs);
          const auto* rp = std::get_if<AttributePath>(&n.rhs);
          const auto* lv = std::get_if<Value>(&n.lhs);
          const auto* rv = std::get_if<Value>(&n.rhs);
          if (lp && is_tool_name(*lp) && rv && rv->is_string()) names.push_back(rv->template get<std::string>());
          if (rp && is_tool_name(*rp) && lv && lv->is_string()) names.push_back(lv->template get<std::string>());
        } else if constexpr (std::is_same_v<T, InNode>) {
          if (is_tool_name(n.path)) {
            for (const auto& v : n.values) {
              if (v.is_string()) names.push_back(v.template get<std::string>());
            }
          }
        } else if constexpr (std::is_same_v<T, MatchNode>) {
          patterns.push_back(&n.pattern);
        }
      },
      c.node);
}

}  // namespace

std::vector<Diagnostic> validate(const PolicySet& ps,
                                 const std::optional<std::vector<ToolDescriptor>>& known_tools) {
  std::vector<Diagnostic> out;
  std::set<std::string> known;
  if (known_tools) {
    for (const auto& t : *known_tools) known.insert(t.name);
  }

  for (const auto& rule : ps.rules) {
    if (!rule.enabled) {
      out.push_back({Severity::note, "UnreachableRule",
                     "rule " + rule.id + " is disabled and never matches", rule.span, {}});
    }
    std::vector<std::string> names;
    std::vector<const CompiledPattern*> patterns;
    scan(rule.when, names, patterns);

    if (known_tools) {
      std::set<std::string> reported;
      for (const auto& name : names) {
        if (known.count(name) == 0 && reported.insert(name).second) {
          out.push_back({Severity::warning, "UnknownTool",
                         "rule " + rule.id + " refers to tool '" + name +
                             "', which is not in the known tool list",
                         rule.span, {}});
        }
      }
    }
    for (const auto* p : patterns) {
      if (p->compiled && p->compiled->backtracking_risk()) {
        out.push_back({Severity::warning, "BacktrackingRisk",
                       "pattern \"" + p->source + "\" in rule " + rule.id +
                           " nests unbounded repetition; it runs in linear time here but would "
                           "backtrack catastrophically in other engines",
                       rule.span, {}});
      }
    }
  }
  return out;
}

}  // namespace agentguard::dsl
