#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agentguard/model/types.hpp"

namespace agentguard::dsl {

// Parameterized rule forms, loaded from a JSON catalog file. A template body
// is DSL text with `{{param}}` holes.
struct TemplateParam {
  std::string name;
  std::string kind;  // "string" (quoted into a literal), "ident", "integer", "duration", "verdict"
  std::string description;
  std::optional<std::string> default_value;
};

struct RuleTemplate {
  std::string id;
  std::string title;
  std::string scenario;  // privacy_leakage, financial_loss, system_compromise, ...
  std::string description;
  std::vector<TemplateParam> params;
  std::string body;
};

class TemplateCatalog {
 public:
  TemplateCatalog() = default;
  explicit TemplateCatalog(std::vector<RuleTemplate> templates);

  // Throws ValidationError on malformed catalogs.
  static TemplateCatalog from_json(const Value& j);
  static TemplateCatalog load(const std::string& path);

  const std::vector<RuleTemplate>& templates() const { return templates_; }
  const RuleTemplate* find(std::string_view id) const;

  // Fills the holes and returns DSL text. Missing params fall back to their
  // default; unknown or ill-typed params throw ValidationError. The result is
  // checked to parse.
  std::string instantiate(std::string_view id, const std::map<std::string, std::string>& params) const;

 private:
  std::vector<RuleTemplate> templates_;
};

Value to_json(const RuleTemplate& t);

}  // namespace agentguard::dsl
