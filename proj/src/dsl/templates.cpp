#include "agentguard/dsl/templates.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "agentguard/common/error.hpp"
#include "agentguard/dsl/parser.hpp"

namespace agentguard::dsl {
namespace {

std::string escape_literal(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

std::string check_param(const TemplateParam& p, const std::string& value) {
  static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_-]*)");
  static const std::regex integer(R"(-?[0-9]+)");
  static const std::regex duration(R"([0-9]+(ms|s|m|h))");
  auto bad = [&](const char* what) -> std::string {
    throw ValidationError("parameter '" + p.name + "' must be " + what + ", got '" + value + "'");
  };
  if (p.kind == "string") return escape_literal(value);
  if (p.kind == "ident") return std::regex_match(value, ident) ? value : bad("an identifier");
  if (p.kind == "integer") return std::regex_match(value, integer) ? value : bad("an integer");
  if (p.kind == "duration") return std::regex_match(value, duration) ? value : bad("a duration");
  if (p.kind == "verdict") {
    return value == "allow" || value == "deny" ? value : bad("'allow' or 'deny'");
  }
  throw ValidationError("parameter '" + p.name + "' has unknown kind '" + p.kind + "'");
}

}  // namespace

TemplateCatalog::TemplateCatalog(std::vector<RuleTemplate> templates)
    : templates_(std::move(templates)) {}

TemplateCatalog TemplateCatalog::from_json(const Value& j) {
  try {
    std::vector<RuleTemplate> out;
    for (const auto& t : j.at("templates")) {
      RuleTemplate rt;
      rt.id = t.at("id").get<std::string>();
      rt.title = t.value("title", rt.id);
      rt.scenario = t.value("scenario", "");
      rt.description = t.value("description", "");
      rt.body = t.at("body").get<std::string>();
      for (const auto& p : t.value("params", Value::array())) {
        TemplateParam tp;
        tp.name = p.at("name").get<std::string>();
        tp.kind = p.value("kind", "string");
        tp.description = p.value("description", "");
        if (p.contains("default")) tp.default_value = p.at("default").get<std::string>();
        rt.params.push_back(std::move(tp));
      }
      out.push_back(std::move(rt));
    }
    return TemplateCatalog(std::move(out));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed template catalog: ") + e.what());
  }
}

TemplateCatalog TemplateCatalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open template catalog " + path);
  try {
    return from_json(Value::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("template catalog " + path + ": " + e.what());
  }
}

const RuleTemplate* TemplateCatalog::find(std::string_view id) const {
  for (const auto& t : templates_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::string TemplateCatalog::instantiate(std::string_view id,
                                         const std::map<std::string, std::string>& params) const {
  const RuleTemplate* t = find(id);
  if (t == nullptr) throw ValidationError("unknown template '" + std::string(id) + "'");

  std::map<std::string, std::string> filled;
  for (const auto& p : t->params) {
    auto it = params.find(p.name);
    if (it != params.end()) {
      filled[p.name] = check_param(p, it->second);
    } else if (p.default_value) {
      filled[p.name] = check_param(p, *p.default_value);
    } else {
      throw ValidationError("missing parameter '" + p.name + "'");
    }
  }
  for (const auto& [name, _] : params) {
    if (filled.count(name) == 0) throw ValidationError("unknown parameter '" + name + "'");
  }

  std::string out;
  std::size_t pos = 0;
  while (pos < t->body.size()) {
    const auto open = t->body.find("{{", pos);
    if (open == std::string::npos) {
      out += t->body.substr(pos);
      break;
    }
    const auto close = t->body.find("}}", open);
    if (close == std::string::npos) throw ValidationError("unterminated hole in template " + t->id);
    out += t->body.substr(pos, open - pos);
    const auto name = t->body.substr(open + 2, close - open - 2);
    auto it = filled.find(name);
    if (it == filled.end()) {
      // Not a template hole; LLM prompt placeholders pass through.
      out += t->body.substr(open, close + 2 - open);
    } else {
      out += it->second;
    }
    pos = close + 2;
  }

  auto parsed = parse_policy_set(out);
  if (!parsed.ok()) {
    throw ValidationError("template " + t->id + " produced invalid policy text: " +
                          parsed.diagnostics.front().format());
  }
  return out;
}

Value to_json(const RuleTemplate& t) {
  Value params = Value::array();
  for (const auto& p : t.params) {
    Value pj = {{"name", p.name}, {"kind", p.kind}, {"description", p.description}};
    if (p.default_value) pj["default"] = *p.default_value;
    params.push_back(std::move(pj));
  }
  return {{"id", t.id},
          {"title", t.title},
          {"scenario", t.scenario},
          {"description", t.description},
          {"params", params},
          {"body", t.body}};
}

}  // namespace agentguard::dsl
