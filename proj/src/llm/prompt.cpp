#include "agentguard/llm/prompt.hpp"

#include <algorithm>

#include "agentguard/common/error.hpp"

namespace agentguard::llm {
namespace {

struct Known {
  std::string_view name;
  Placeholder value;
};

constexpr Known kKnown[] = {
    {"tool.name", Placeholder::tool_name},
    {"args", Placeholder::args},
    {"history", Placeholder::history},
    {"principal.role", Placeholder::principal_role},
    {"reason_hint", Placeholder::reason_hint},
    {"result", Placeholder::result},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Cuts at a byte budget without splitting a UTF-8 sequence.
std::string utf8_prefix(std::string_view s, std::size_t limit) {
  if (s.size() <= limit) return std::string(s);
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(s.substr(0, cut));
}

Value truncate_leaves(const Value& v) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.size() <= kArgLeafLimit) return v;
    return utf8_prefix(s, kArgLeafLimit) + "...";
  }
  if (v.is_object()) {
    Value out = Value::object();
    for (const auto& [k, child] : v.items()) out[k] = truncate_leaves(child);
    return out;
  }
  if (v.is_array()) {
    Value out = Value::array();
    for (const auto& child : v) out.push_back(truncate_leaves(child));
    return out;
  }
  return v;
}

}  // namespace

std::string_view placeholder_name(Placeholder p) {
  for (const auto& k : kKnown) {
    if (k.value == p) return k.name;
  }
  return "?";
}

PromptTemplate PromptTemplate::parse(std::string_view text, int max_history_events) {
  PromptTemplate t;
  t.text = std::string(text);
  t.max_history_events = max_history_events;
  std::string literal;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "{{") == 0) {
      const auto close = text.find("}}", i + 2);
      if (close == std::string_view::npos) {
        throw UnknownPlaceholder("unterminated placeholder at offset " + std::to_string(i));
      }
      const auto name = trim(text.substr(i + 2, close - i - 2));
      const auto* it = std::find_if(std::begin(kKnown), std::end(kKnown),
                                    [&](const Known& k) { return k.name == name; });
      if (it == std::end(kKnown)) {
        throw UnknownPlaceholder("unknown placeholder {{" + std::string(name) + "}}");
      }
      if (!literal.empty()) t.pieces.emplace_back(std::move(literal));
      literal.clear();
      t.pieces.emplace_back(it->value);
      i = close + 2;
    } else {
      literal.push_back(text[i]);
      ++i;
    }
  }
  if (!literal.empty()) t.pieces.emplace_back(std::move(literal));
  return t;
}

std::string summarize_args(const Value& args) { return truncate_leaves(args).dump(); }

std::string render_prompt(const PromptTemplate& t, const ToolCallEvent& event,
                          const engine::HistoryView& history, std::string_view reason_hint,
                          const ToolResultEvent* result, std::size_t max_chars) {
  std::string out;
  for (const auto& piece : t.pieces) {
    if (const auto* lit = std::get_if<std::string>(&piece)) {
      out += *lit;
      continue;
    }
    switch (std::get<Placeholder>(piece)) {
      case Placeholder::tool_name:
        out += event.tool.name;
        break;
      case Placeholder::args:
        out += summarize_args(event.args);
        break;
      case Placeholder::principal_role:
        out += event.principal.role;
        break;
      case Placeholder::reason_hint:
        out += reason_hint;
        break;
      case Placeholder::result:
        if (result != nullptr) out += summarize_args(result->result);
        break;
      case Placeholder::history: {
        const auto keep = static_cast<std::size_t>(std::max(0, t.max_history_events));
        const auto first = history.size() > keep ? history.size() - keep : 0;
        for (std::size_t i = first; i < history.size(); ++i) {
          const auto& e = history[i].event;
          if (i != first) out.push_back('\n');
          out += std::to_string(e.seq);
          out.push_back(' ');
          out += e.tool.name;
          out.push_back(' ');
          out += summarize_args(e.args);
        }
        break;
      }
    }
    if (out.size() > max_chars) break;
  }
  if (out.size() > max_chars) out = utf8_prefix(out, max_chars);
  return out;
}

}  // namespace agentguard::llm
