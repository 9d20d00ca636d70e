#include "agentguard/dsl/parser.hpp"

#include <map>
#include <set>

#include "agentguard/common/error.hpp"
#include "agentguard/llm/prompt.hpp"
#include "lexer.hpp"

namespace agentguard::dsl {
namespace {

// Thrown to unwind out of a rule after the diagnostic has been recorded.
struct Abort {};

std::optional<CompareOp> compare_op(std::string_view s) {
  if (s == "==") return CompareOp::eq;
  if (s == "!=") return CompareOp::ne;
  if (s == "<") return CompareOp::lt;
  if (s == "<=") return CompareOp::le;
  if (s == ">") return CompareOp::gt;
  if (s == ">=") return CompareOp::ge;
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  ParseResult run() {
    PolicySet ps;
    bool header_seen = false;
    std::map<std::string, SourceSpan> ids;

    while (!at(Tok::end)) {
      try {
        if (peek().is_ident("policy")) {
          const auto span = peek().span;
          if (header_seen) error(span, "SyntaxError", "duplicate policy header block");
          header_seen = true;
          parse_header(ps);
        } else if (peek().is_ident("rule")) {
          Rule rule = parse_rule();
          if (auto it = ids.find(rule.id); it != ids.end()) {
            Diagnostic d{Severity::error, "DuplicateRuleId",
                         "rule id '" + rule.id + "' already defined at line " +
                             std::to_string(it->second.line) + ", column " +
                             std::to_string(it->second.column),
                         rule.span,
                         {it->second}};
            diags_.push_back(std::move(d));
          } else {
            ids.emplace(rule.id, rule.span);
          }
          ps.rules.push_back(std::move(rule));
        } else {
          error(peek().span, "SyntaxError",
                "expected 'rule' or 'policy', found " + spelling(peek()));
        }
      } catch (const Abort&) {
        recover();
      }
    }

    ParseResult result;
    result.diagnostics = std::move(diags_);
    if (!has_errors(result.diagnostics)) result.policy = std::move(ps);
    return result;
  }

 private:
  // ---- token helpers ----
  const Token& peek(std::size_t ahead = 0) const {
    const auto i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  bool at(Tok k) const { return peek().kind == k; }
  const Token& take() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  static std::string spelling(const Token& t) {
    if (t.kind == Tok::end) return "end of input";
    if (t.kind == Tok::string) return "string \"" + t.text + "\"";
    return std::string(describe(t.kind)) + " '" + t.text + "'";
  }

  [[noreturn]] void error(SourceSpan at, std::string code, std::string message) {
    diags_.push_back(Diagnostic{Severity::error, std::move(code), std::move(message), at, {}});
    throw Abort{};
  }

  const Token& expect(Tok k, std::string_view what) {
    if (!at(k)) {
      error(peek().span, "SyntaxError",
            "expected " + std::string(what) + ", found " + spelling(peek()));
    }
    return take();
  }

  const Token& expect_ident(std::string_view what) { return expect(Tok::ident, what); }

  void expect_word(std::string_view word) {
    if (!peek().is_ident(word)) {
      error(peek().span, "SyntaxError",
            "expected '" + std::string(word) + "', found " + spelling(peek()));
    }
    take();
  }

  // Skip to the next top-level `rule`/`policy` keyword that follows a '}'.
  void recover() {
    while (!at(Tok::end)) {
      const Token& t = take();
      if (t.kind == Tok::rbrace && (peek().is_ident("rule") || peek().is_ident("policy"))) return;
    }
  }

  // ---- header ----
  void parse_header(PolicySet& ps) {
    take();  // policy
    expect(Tok::lbrace, "'{'");
    std::set<std::string> seen;
    while (!at(Tok::rbrace)) {
      const Token& key = expect_ident("header field name");
      if (!seen.insert(key.text).second) {
        error(key.span, "SyntaxError", "duplicate header field '" + key.text + "'");
      }
      expect(Tok::colon, "':'");
      if (key.text == "version") {
        const Token& v = expect(Tok::integer, "integer version");
        if (v.integer < 1) error(v.span, "SyntaxError", "version must be >= 1");
        ps.version = v.integer;
      } else if (key.text == "default") {
        const Token& v = expect_ident("'allow' or 'deny'");
        auto verdict = parse_verdict(v.text);
        if (!verdict) error(v.span, "SyntaxError", "default must be 'allow' or 'deny'");
        ps.default_decision = *verdict;
      } else if (key.text == "on_eval_error") {
        const Token& v = expect_ident("'deny', 'review' or 'ignore'");
        if (v.text == "deny") ps.on_eval_error = EvalErrorMode::deny;
        else if (v.text == "review") ps.on_eval_error = EvalErrorMode::review;
        else if (v.text == "ignore") ps.on_eval_error = EvalErrorMode::ignore;
        else error(v.span, "SyntaxError", "on_eval_error must be 'deny', 'review' or 'ignore'");
      } else {
        error(key.span, "SyntaxError", "unknown header field '" + key.text + "'");
      }
    }
    take();  // }
  }

  // ---- rules ----
  Rule parse_rule() {
    Rule rule;
    rule.span = take().span;  // rule
    rule.id = expect_ident("rule name").text;
    expect(Tok::lbrace, "'{'");

    std::set<std::string> seen;
    bool have_when = false;
    bool have_effect = false;
    std::optional<std::string> reason;
    paths_.clear();

    while (!at(Tok::rbrace)) {
      const Token& key = expect_ident("rule field name");
      if (!seen.insert(key.text).second) {
        error(key.span, "SyntaxError", "duplicate field '" + key.text + "' in rule " + rule.id);
      }
      expect(Tok::colon, "':'");
      if (key.text == "phase") {
        const Token& v = expect_ident("'pre' or 'post'");
        auto phase = parse_phase(v.text);
        if (!phase) error(v.span, "SyntaxError", "phase must be 'pre' or 'post'");
        rule.phase = *phase;
      } else if (key.text == "priority") {
        const Token& v = expect(Tok::integer, "integer priority");
        if (v.integer < INT32_MIN || v.integer > INT32_MAX) {
          error(v.span, "SyntaxError", "priority out of range");
        }
        rule.priority = static_cast<int>(v.integer);
      } else if (key.text == "when") {
        history_depth_ = 0;
        rule.when = parse_or();
        have_when = true;
      } else if (key.text == "effect") {
        rule.effect = parse_effect();
        have_effect = true;
      } else if (key.text == "reason") {
        reason = expect(Tok::string, "reason string").text;
      } else if (key.text == "enabled") {
        const Token& v = expect_ident("'true' or 'false'");
        if (v.text != "true" && v.text != "false") {
          error(v.span, "SyntaxError", "enabled must be 'true' or 'false'");
        }
        rule.enabled = v.text == "true";
      } else {
        error(key.span, "SyntaxError", "unknown rule field '" + key.text + "'");
      }
    }
    const auto close = take().span;  // }
    if (!have_when) error(close, "SyntaxError", "rule " + rule.id + " has no 'when' field");
    if (!have_effect) error(close, "SyntaxError", "rule " + rule.id + " has no 'effect' field");
    if (reason) rule.effect.reason = *reason;

    if (rule.phase == Phase::pre) {
      for (const auto& [path, span, in_history] : paths_) {
        if (path.root == AttributeRoot::result && !in_history) {
          diags_.push_back(Diagnostic{Severity::error, "IllegalResultPath",
                                      "'" + path.to_string() +
                                          "' refers to the tool result, which only exists in "
                                          "phase: post rules",
                                      span,
                                      {}});
        }
      }
    }
    return rule;
  }

  Effect parse_effect() {
    const Token& kind = expect_ident("effect kind");
    if (kind.text == "allow") return Effect::allow();
    if (kind.text == "deny") return Effect::deny();
    if (kind.text == "review") {
      ReviewParams params;
      if (at(Tok::lparen)) {
        take();
        std::set<std::string> seen;
        while (!at(Tok::rparen)) {
          if (!seen.empty()) expect(Tok::comma, "',' or ')'");
          const Token& key = expect_ident("review option");
          if (!seen.insert(key.text).second) {
            error(key.span, "SyntaxError", "duplicate review option '" + key.text + "'");
          }
          expect(Tok::colon, "':'");
          if (key.text == "timeout") {
            const Token& d = expect(Tok::duration, "duration such as 300s");
            if (d.duration.count() <= 0) error(d.span, "SyntaxError", "timeout must be positive");
            params.timeout = d.duration;
          } else if (key.text == "on_timeout") {
            const Token& v = expect_ident("'allow' or 'deny'");
            auto verdict = parse_verdict(v.text);
            if (!verdict) error(v.span, "SyntaxError", "on_timeout must be 'allow' or 'deny'");
            params.on_timeout = *verdict;
          } else {
            error(key.span, "SyntaxError", "unknown review option '" + key.text + "'");
          }
        }
        take();
      }
      return Effect::review_for(params);
    }
    if (kind.text == "llm") {
      LlmParams params;
      expect(Tok::lparen, "'(' with llm options");
      std::set<std::string> seen;
      std::optional<SourceSpan> prompt_span;
      while (!at(Tok::rparen)) {
        if (!seen.empty()) expect(Tok::comma, "',' or ')'");
        const Token& key = expect_ident("llm option");
        if (!seen.insert(key.text).second) {
          error(key.span, "SyntaxError", "duplicate llm option '" + key.text + "'");
        }
        expect(Tok::colon, "':'");
        if (key.text == "prompt") {
          const Token& p = expect(Tok::string, "prompt string");
          params.prompt_template = p.text;
          prompt_span = p.span;
        } else if (key.text == "on_flag") {
          const Token& v = expect_ident("'deny' or 'review'");
          auto action = parse_flag_action(v.text);
          if (!action) error(v.span, "SyntaxError", "on_flag must be 'deny' or 'review'");
          params.on_flag = *action;
        } else if (key.text == "max_history") {
          const Token& v = expect(Tok::integer, "integer");
          if (v.integer < 0 || v.integer > 10'000) {
            error(v.span, "SyntaxError", "max_history must be within [0,10000]");
          }
          params.max_history = static_cast<int>(v.integer);
        } else {
          error(key.span, "SyntaxError", "unknown llm option '" + key.text + "'");
        }
      }
      const auto close = take().span;
      if (!prompt_span) error(close, "SyntaxError", "llm effect requires a prompt");
      try {
        llm::PromptTemplate::parse(params.prompt_template, params.max_history);
      } catch (const UnknownPlaceholder& e) {
        diags_.push_back(Diagnostic{Severity::error, "UnknownPlaceholder", e.what(), *prompt_span, {}});
      }
      return Effect::llm_check(std::move(params));
    }
    error(kind.span, "SyntaxError",
          "effect must be allow, deny, review(...) or llm(...), found '" + kind.text + "'");
  }

  // ---- conditions ----
  Condition parse_or() {
    Condition first = parse_and();
    if (!peek().is_ident("or")) return first;
    OrNode node;
    node.children.push_back(std::move(first));
    while (peek().is_ident("or")) {
      take();
      node.children.push_back(parse_and());
    }
    return Condition{std::move(node)};
  }

  Condition parse_and() {
    Condition first = parse_unary();
    if (!peek().is_ident("and")) return first;
    AndNode node;
    node.children.push_back(std::move(first));
    while (peek().is_ident("and")) {
      take();
      node.children.push_back(parse_unary());
    }
    return Condition{std::move(node)};
  }

  Condition parse_unary() {
    if (peek().is_ident("not")) {
      take();
      return Condition{NotNode{parse_unary()}};
    }
    return parse_primary();
  }

  bool predicate_follows(std::size_t ahead) const {
    const Token& t = peek(ahead);
    return t.kind == Tok::op || t.is_ident("matches") || t.is_ident("contains") ||
           t.is_ident("in");
  }

  Condition parse_primary() {
    const Token& t = peek();
    if (t.kind == Tok::lparen) {
      take();
      Condition inner = parse_or();
      expect(Tok::rparen, "')'");
      return inner;
    }
    if ((t.is_ident("true") || t.is_ident("false")) && !predicate_follows(1)) {
      take();
      return Condition{ConstNode{t.text == "true"}};
    }
    if (t.is_ident("exists") && peek(1).kind == Tok::lparen) {
      take();
      take();
      auto path = parse_path();
      expect(Tok::rparen, "')'");
      return Condition{ExistsNode{std::move(path)}};
    }
    if (t.is_ident("history") && peek(1).kind == Tok::dot) return parse_history();
    return parse_predicate();
  }

  Condition parse_history() {
    const auto span = take().span;  // history
    take();                         // .
    const Token& fn = expect_ident("'exists' or 'count'");
    if (fn.text != "exists" && fn.text != "count") {
      error(fn.span, "SyntaxError", "unknown history function '" + fn.text + "'");
    }
    if (history_depth_ > 0) {
      error(span, "NestedHistory", "history predicates cannot be nested");
    }
    expect(Tok::lparen, "'('");
    ++history_depth_;
    Condition inner = parse_or();
    --history_depth_;
    expect(Tok::rparen, "')'");
    if (fn.text == "exists") return Condition{HistoryExistsNode{std::move(inner)}};
    const Token& op = expect(Tok::op, "comparison operator after history.count(...)");
    const Token& bound = expect(Tok::integer, "integer bound");
    return Condition{HistoryCountNode{std::move(inner), *compare_op(op.text), bound.integer}};
  }

  Condition parse_predicate() {
    Operand lhs = parse_operand();
    const Token& t = peek();
    if (t.kind == Tok::op) {
      take();
      Operand rhs = parse_operand();
      return Condition{CompareNode{std::move(lhs), *compare_op(t.text), std::move(rhs)}};
    }
    if (t.is_ident("matches") || t.is_ident("contains") || t.is_ident("in")) {
      auto* path = std::get_if<AttributePath>(&lhs);
      if (path == nullptr) {
        error(t.span, "SyntaxError", "left side of '" + t.text + "' must be an attribute path");
      }
      take();
      if (t.text == "matches") {
        const Token& pat = expect(Tok::string, "pattern string");
        try {
          return Condition{MatchNode{std::move(*path), CompiledPattern::compile(pat.text)}};
        } catch (const regex::PatternError& e) {
          SourceSpan at = pat.span;
          // Point into the literal when the pattern has no escapes to shift offsets.
          at.column += 1 + static_cast<int>(e.offset());
          error(at, "InvalidPattern", std::string("invalid pattern: ") + e.what());
        }
      }
      if (t.text == "contains") {
        return Condition{ContainsNode{std::move(*path), parse_literal()}};
      }
      expect(Tok::lbracket, "'['");
      std::vector<Value> values;
      while (!at(Tok::rbracket)) {
        if (!values.empty()) expect(Tok::comma, "',' or ']'");
        values.push_back(parse_literal());
      }
      take();
      return Condition{InNode{std::move(*path), std::move(values)}};
    }
    error(t.span, "SyntaxError",
          "expected a comparison operator, 'matches', 'contains' or 'in', found " + spelling(t));
  }

  Operand parse_operand() {
    const Token& t = peek();
    if (t.kind == Tok::ident && parse_attribute_root(t.text)) return parse_path();
    if (t.kind == Tok::ident && !(t.text == "true" || t.text == "false" || t.text == "null")) {
      error(t.span, "SyntaxError",
            "unknown attribute root '" + t.text +
                "' (expected principal, tool, args, target, result or session)");
    }
    return parse_literal();
  }

  Value parse_literal() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::string: take(); return Value(t.text);
      case Tok::integer: take(); return Value(t.integer);
      case Tok::ident:
        if (t.text == "true") { take(); return Value(true); }
        if (t.text == "false") { take(); return Value(false); }
        if (t.text == "null") { take(); return Value(nullptr); }
        break;
      default:
        break;
    }
    error(t.span, "SyntaxError", "expected a literal, found " + spelling(t));
  }

  AttributePath parse_path() {
    const Token& root = expect_ident("attribute path");
    auto r = parse_attribute_root(root.text);
    if (!r) error(root.span, "SyntaxError", "unknown attribute root '" + root.text + "'");
    AttributePath path;
    path.root = *r;
    while (at(Tok::dot)) {
      take();
      const Token& seg = peek();
      if (seg.kind == Tok::ident || seg.kind == Tok::string) {
        path.segments.emplace_back(seg.text);
      } else if (seg.kind == Tok::integer && seg.integer >= 0) {
        path.segments.emplace_back(static_cast<std::size_t>(seg.integer));
      } else {
        error(seg.span, "SyntaxError", "expected path segment after '.', found " + spelling(seg));
      }
      take();
    }
    if ((path.root == AttributeRoot::args || path.root == AttributeRoot::result) &&
        path.segments.empty()) {
      error(root.span, "SyntaxError",
            "'" + root.text + "' must be followed by at least one path segment");
    }
    paths_.push_back({path, root.span, history_depth_ > 0});
    return path;
  }

  struct SeenPath {
    AttributePath path;
    SourceSpan span;
    bool in_history;
  };

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic> diags_;
  std::vector<SeenPath> paths_;
  int history_depth_ = 0;
};

}  // namespace

ParseResult parse_policy_set(std::string_view text) {
  auto lexed = lex(text);
  if (lexed.error) {
    ParseResult r;
    r.diagnostics.push_back(*lexed.error);
    return r;
  }
  return Parser(std::move(lexed.tokens)).run();
}

}  // namespace agentguard::dsl
