#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "agentguard/model/attribute.hpp"
#include "agentguard/model/types.hpp"
#include "agentguard/regex/regex.hpp"

namespace agentguard::dsl {

struct SourceSpan {
  int line = 0;
  int column = 0;
  bool operator==(const SourceSpan&) const = default;
};

// Immutable shared box with value equality, for recursive variant members.
template <typename T>
class Box {
 public:
  Box(T value) : ptr_(std::make_shared<const T>(std::move(value))) {}  // NOLINT
  const T& get() const { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  const T* operator->() const { return ptr_.get(); }
  friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

 private:
  std::shared_ptr<const T> ptr_;
};

enum class CompareOp { eq, ne, lt, le, gt, ge };
std::string_view to_string(CompareOp op);

// Either side of a comparison: a path to resolve, or a literal value.
using Operand = std::variant<AttributePath, Value>;

// Regex source plus its compiled form. Equality is by source text.
struct CompiledPattern {
  std::string source;
  std::shared_ptr<const regex::Pattern> compiled;

  static CompiledPattern compile(std::string source);  // throws regex::PatternError
  friend bool operator==(const CompiledPattern& a, const CompiledPattern& b) {
    return a.source == b.source;
  }
};

struct Condition;

struct AndNode {
  std::vector<Condition> children;
  bool operator==(const AndNode&) const;
};
struct OrNode {
  std::vector<Condition> children;
  bool operator==(const OrNode&) const;
};
struct NotNode {
  Box<Condition> child;
  bool operator==(const NotNode&) const = default;
};
struct CompareNode {
  Operand lhs;
  CompareOp op = CompareOp::eq;
  Operand rhs;
  bool operator==(const CompareNode&) const = default;
};
struct MatchNode {
  AttributePath path;
  CompiledPattern pattern;
  bool operator==(const MatchNode&) const = default;
};
struct ContainsNode {
  AttributePath path;
  Value needle;
  bool operator==(const ContainsNode&) const = default;
};
struct InNode {
  AttributePath path;
  std::vector<Value> values;
  bool operator==(const InNode&) const = default;
};
// `exists(path)`: true iff the path resolves to something (null counts).
struct ExistsNode {
  AttributePath path;
  bool operator==(const ExistsNode&) const = default;
};
// Inside history nodes, paths bind to the prior event under test.
struct HistoryExistsNode {
  Box<Condition> inner;
  bool operator==(const HistoryExistsNode&) const = default;
};
struct HistoryCountNode {
  Box<Condition> inner;
  CompareOp op = CompareOp::ge;
  std::int64_t bound = 0;
  bool operator==(const HistoryCountNode&) const = default;
};
struct ConstNode {
  bool value = true;
  bool operator==(const ConstNode&) const = default;
};

struct Condition {
  std::variant<ConstNode, AndNode, OrNode, NotNode, CompareNode, MatchNode, ContainsNode, InNode,
               ExistsNode, HistoryExistsNode, HistoryCountNode>
      node;
  bool operator==(const Condition&) const = default;
};

inline bool AndNode::operator==(const AndNode& o) const { return children == o.children; }
inline bool OrNode::operator==(const OrNode& o) const { return children == o.children; }

enum class EvalErrorMode { deny, review, ignore };
std::string_view to_string(EvalErrorMode m);

struct Rule {
  std::string id;
  Phase phase = Phase::pre;
  int priority = 0;  // audit ordering only
  Condition when{ConstNode{true}};
  Effect effect = Effect::deny();
  bool enabled = true;
  SourceSpan span;  // not part of structural equality

  friend bool operator==(const Rule& a, const Rule& b) {
    return a.id == b.id && a.phase == b.phase && a.priority == b.priority && a.when == b.when &&
           a.effect == b.effect && a.enabled == b.enabled;
  }
};

struct PolicySet {
  std::int64_t version = 1;
  std::vector<Rule> rules;
  Verdict default_decision = Verdict::allow;
  EvalErrorMode on_eval_error = EvalErrorMode::review;

  const Rule* find(std::string_view id) const;
  bool operator==(const PolicySet&) const = default;
};

// Walks every path mentioned by a condition. `in_history` is true for paths
// nested under a history node.
void for_each_path(const Condition& c,
                   const std::function<void(const AttributePath&, bool in_history)>& fn,
                   bool in_history = false);

}  // namespace agentguard::dsl
