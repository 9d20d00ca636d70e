#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "agentguard/common/error.hpp"
#include "agentguard/dsl/parser.hpp"
#include "agentguard/dsl/templates.hpp"
#include "oracles.hpp"

using namespace agentguard;
using namespace agentguard::dsl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<fs::path> corpus() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(fs::path(AGENTGUARD_FIXTURES) / "policies")) {
    if (e.path().extension() == ".agp") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> codes(const std::vector<Diagnostic>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.code);
  return out;
}

bool has_code(const std::vector<Diagnostic>& ds, const std::string& code) {
  const auto cs = codes(ds);
  return std::find(cs.begin(), cs.end(), code) != cs.end();
}

int line_count(const std::string& text) {
  return 1 + static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("dsl") {

TEST_CASE("empty text is the default policy set") {
  auto r = parse_policy_set("");
  REQUIRE(r.ok());
  CHECK(r.policy->version == 1);
  CHECK(r.policy->rules.empty());
  CHECK(r.policy->default_decision == Verdict::allow);
  CHECK(r.policy->on_eval_error == EvalErrorMode::review);

  const auto text = serialize_policy_set(PolicySet{});
  CHECK(text.rfind("#", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  auto again = parse_policy_set(text);
  REQUIRE(again.ok());
  CHECK(*again.policy == PolicySet{});
}

TEST_CASE("no_shell block parses to the hand-built rule") {
  auto r = parse_policy_set(
      "rule no_shell { phase: pre  when: tool.name == \"shell\"  effect: deny  reason: \"shell banned\" }");
  REQUIRE(r.ok());
  REQUIRE(r.policy->rules.size() == 1);

  Rule expected;
  expected.id = "no_shell";
  expected.phase = Phase::pre;
  expected.priority = 0;
  expected.when = Condition{CompareNode{AttributePath{AttributeRoot::tool, {std::string("name")}},
                                        CompareOp::eq, Value("shell")}};
  expected.effect = Effect::deny("shell banned");
  expected.enabled = true;
  CHECK(r.policy->rules[0] == expected);
  CHECK(r.policy->rules[0].span.line == 1);
}

TEST_CASE("history rule parses to a nested history node") {
  auto r = parse_policy_set(slurp(fs::path(AGENTGUARD_FIXTURES) / "policies" / "02_exfiltration.agp"));
  REQUIRE(r.ok());
  const AttributePath tool_name{AttributeRoot::tool, {std::string("name")}};
  const Condition send{CompareNode{tool_name, CompareOp::eq, Value("send_email")}};
  const Condition read{CompareNode{tool_name, CompareOp::eq, Value("read_file")}};
  const Condition expected{AndNode{{send, Condition{HistoryExistsNode{read}}}}};
  CHECK(r.policy->rules.at(0).when == expected);
}

TEST_CASE("result path in a pre rule is rejected") {
  auto r = parse_policy_set("rule r { phase: pre when: result.text == \"x\" effect: deny }");
  CHECK_FALSE(r.ok());
  CHECK(has_code(r.diagnostics, "IllegalResultPath"));
  // Inside a history node result refers to the prior call and is fine.
  CHECK(parse_policy_set("rule r { when: history.exists(result.ok == true) effect: deny }").ok());
}

TEST_CASE("duplicate rule ids point at both definitions") {
  const std::string text = "rule a { when: true effect: deny }\n\nrule a { when: false effect: allow }\n";
  auto r = parse_policy_set(text);
  CHECK_FALSE(r.ok());
  auto it = std::find_if(r.diagnostics.begin(), r.diagnostics.end(),
                         [](const Diagnostic& d) { return d.code == "DuplicateRuleId"; });
  REQUIRE(it != r.diagnostics.end());
  CHECK(it->span.line == 3);
  REQUIRE(it->related.size() == 1);
  CHECK(it->related[0].line == 1);
  CHECK(it->format("p.agp").find("p.agp:3:") == 0);
}

TEST_CASE("bad pattern, placeholder and nesting diagnostics") {
  CHECK(has_code(parse_policy_set("rule r { when: args.x matches \"(ab\" effect: deny }").diagnostics,
                 "InvalidPattern"));
  CHECK(has_code(parse_policy_set("rule r { when: args.x matches \"(a)\\\\1\" effect: deny }").diagnostics,
                 "InvalidPattern"));
  CHECK(has_code(
      parse_policy_set("rule r { when: true effect: llm(prompt: \"{{secret}}\", on_flag: deny) }").diagnostics,
      "UnknownPlaceholder"));
  CHECK(has_code(parse_policy_set("rule r { when: history.exists(history.exists(true)) effect: deny }")
                     .diagnostics,
                 "NestedHistory"));
  CHECK(has_code(parse_policy_set("rule r { when: tool.name === \"x\" effect: deny }").diagnostics,
                 "SyntaxError"));
  CHECK_FALSE(parse_policy_set("rule r { effect: review(timeout: 0s, on_timeout: deny) }").ok());
}

TEST_CASE("errors in several rules are all reported") {
  auto r = parse_policy_set(
      "rule a { when: args.x matches \"(\" effect: deny }\n"
      "rule b { phase: pre when: result.y == 1 effect: deny }\n"
      "rule c { when: true effect: deny }\n");
  CHECK(has_code(r.diagnostics, "InvalidPattern"));
  CHECK(has_code(r.diagnostics, "IllegalResultPath"));
}

TEST_CASE("corpus round trips") {
  const auto files = corpus();
  REQUIRE(files.size() >= 20);
  for (const auto& f : files) {
    INFO(f.filename().string());
    const auto text = slurp(f);
    auto first = parse_policy_set(text);
    REQUIRE(first.ok());
    const auto canonical = serialize_policy_set(*first.policy);
    auto second = parse_policy_set(canonical);
    REQUIRE(second.ok());
    CHECK(*second.policy == *first.policy);
    CHECK(serialize_policy_set(*second.policy) == canonical);
  }
}

TEST_CASE("generated rule sets round trip") {
  testing::Rng rng(99);
  testing::GenOptions opt;
  opt.for_round_trip = true;
  for (int i = 0; i < 500; ++i) {
    const auto ps = testing::random_policy(rng, 6, opt);
    const auto text = serialize_policy_set(ps);
    auto back = parse_policy_set(text);
    INFO("case " << i << "\n" << text);
    REQUIRE(back.ok());
    CHECK(*back.policy == ps);
    CHECK(serialize_policy_set(*back.policy) == text);
  }
}

TEST_CASE("three-rule golden file keeps order and priorities") {
  const fs::path dir = fs::path(AGENTGUARD_FIXTURES) / "golden";
  auto r = parse_policy_set(slurp(dir / "three_rules.agp"));
  REQUIRE(r.ok());
  const auto text = serialize_policy_set(*r.policy);
  CHECK(text == slurp(dir / "three_rules.expected"));
  auto back = parse_policy_set(text);
  REQUIRE(back.ok());
  std::vector<std::pair<std::string, int>> order;
  for (const auto& rule : back.policy->rules) order.emplace_back(rule.id, rule.priority);
  CHECK(order == std::vector<std::pair<std::string, int>>{{"second_wave", 2}, {"first_wave", 9}, {"trailing", -1}});
  CHECK(back.policy->version == 4);
  CHECK(back.policy->default_decision == Verdict::deny);
}

TEST_CASE("parsing is deterministic and spans stay inside the input") {
  testing::Rng rng(5);
  const auto files = corpus();
  const std::string junk = "{}():\"#\n ==<>andornot.0123abcxyz";
  for (int i = 0; i < 400; ++i) {
    std::string text = slurp(files[i % files.size()]);
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < edits && !text.empty(); ++k) {
      const std::size_t pos = rng() % text.size();
      switch (rng() % 3) {
        case 0: text.erase(pos, 1 + rng() % 3); break;
        case 1: text.insert(pos, 1, junk[rng() % junk.size()]); break;
        default: text[pos] = junk[rng() % junk.size()];
      }
    }
    ParseResult a;
    REQUIRE_NOTHROW(a = parse_policy_set(text));
    const auto b = parse_policy_set(text);
    CHECK(a.ok() == b.ok());
    CHECK(codes(a.diagnostics) == codes(b.diagnostics));
    if (a.ok()) CHECK(*a.policy == *b.policy);
    CHECK(a.ok() == !has_errors(a.diagnostics));
    const int lines = line_count(text);
    for (const auto& d : a.diagnostics) {
      INFO(text << "\n" << d.format());
      CHECK(d.span.line >= 1);
      CHECK(d.span.line <= lines);
      CHECK(d.span.column >= 1);
    }
  }
}

TEST_CASE("validate") {
  auto valid = parse_policy_set(slurp(fs::path(AGENTGUARD_FIXTURES) / "policies" / "01_no_shell.agp"));
  REQUIRE(valid.ok());
  CHECK(validate(*valid.policy).empty());

  auto ftp = parse_policy_set("rule r { when: tool.name == \"ftp\" effect: deny }");
  REQUIRE(ftp.ok());
  const std::vector<ToolDescriptor> tools = {{"shell", std::nullopt, {}}, {"read_file", std::nullopt, {}}};
  auto ds = validate(*ftp.policy, tools);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].code == "UnknownTool");
  CHECK(ds[0].severity == Severity::warning);

  auto disabled = parse_policy_set("rule r { when: true effect: deny enabled: false }");
  REQUIRE(disabled.ok());
  ds = validate(*disabled.policy);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].code == "UnreachableRule");
  CHECK(ds[0].severity == Severity::note);

  auto risky = parse_policy_set("rule r { when: args.x matches \"(a+)+b\" effect: deny }");
  REQUIRE(risky.ok());
  CHECK(has_code(validate(*risky.policy), "BacktrackingRisk"));
}

TEST_CASE("shipped template catalog instantiates to valid rules") {
  const auto catalog =
      TemplateCatalog::load((fs::path(AGENTGUARD_SOURCE_DIR) / "templates" / "catalog.json").string());
  std::set<std::string> scenarios;
  for (const auto& t : catalog.templates()) {
    INFO(t.id);
    scenarios.insert(t.scenario);
    const auto text = catalog.instantiate(t.id, {});
    auto r = parse_policy_set(text);
    REQUIRE(r.ok());
    CHECK(r.policy->rules.size() == 1);
  }
  CHECK(scenarios == std::set<std::string>{"privacy_leakage", "financial_loss", "system_compromise"});

  const auto text = catalog.instantiate("large_payment", {{"threshold", "50"}, {"tool", "pay \"now\""}});
  auto r = parse_policy_set(text);
  REQUIRE(r.ok());
  CHECK(serialize_condition(r.policy->rules[0].when) ==
        "tool.name == \"pay \\\"now\\\"\" and args.amount > 50");

  CHECK_THROWS_AS(catalog.instantiate("large_payment", {{"threshold", "lots"}}), ValidationError);
  CHECK_THROWS_AS(catalog.instantiate("large_payment", {{"nope", "1"}}), ValidationError);
  CHECK_THROWS_AS(catalog.instantiate("missing", {}), ValidationError);
  CHECK_THROWS_AS(catalog.instantiate("block_shell", {{"rule_id", "two words"}}), ValidationError);
}

}  // TEST_SUITE
