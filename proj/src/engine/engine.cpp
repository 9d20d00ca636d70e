#include "agentguard/engine/engine.hpp"

#include <algorithm>

#include "agentguard/common/error.hpp"

namespace agentguard::engine {

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::final: return "final";
    case OutcomeKind::pending_review: return "pending_review";
    case OutcomeKind::pending_llm: return "pending_llm";
  }
  return "?";
}

namespace {

using dsl::CompareOp;

TruthResult yes() { return {Truth::true_, {}}; }
TruthResult no() { return {Truth::false_, {}}; }
TruthResult fail(std::string why) { return {Truth::error, std::move(why)}; }
TruthResult of(bool b) { return b ? yes() : no(); }

template <typename T>
bool apply_order(CompareOp op, const T& a, const T& b) {
  switch (op) {
    case CompareOp::eq: return a == b;
    case CompareOp::ne: return a != b;
    case CompareOp::lt: return a < b;
    case CompareOp::le: return a <= b;
    case CompareOp::gt: return a > b;
    case CompareOp::ge: return a >= b;
  }
  return false;
}

// -1, 0, 1 for two JSON numbers without losing 64-bit integer precision.
int compare_numbers(const Value& a, const Value& b) {
  if (a.is_number_integer() && b.is_number_integer()) {
    const bool au = a.is_number_unsigned();
    const bool bu = b.is_number_unsigned();
    if (!au && !bu) {
      const auto x = a.get<std::int64_t>(), y = b.get<std::int64_t>();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (au && bu) {
      const auto x = a.get<std::uint64_t>(), y = b.get<std::uint64_t>();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    // Mixed signedness: a negative signed value is below every unsigned one.
    if (!au) {
      const auto x = a.get<std::int64_t>();
      if (x < 0) return -1;
      const auto ux = static_cast<std::uint64_t>(x), y = b.get<std::uint64_t>();
      return ux < y ? -1 : (ux > y ? 1 : 0);
    }
    const auto y = b.get<std::int64_t>();
    if (y < 0) return 1;
    const auto x = a.get<std::uint64_t>(), uy = static_cast<std::uint64_t>(y);
    return x < uy ? -1 : (x > uy ? 1 : 0);
  }
  const double x = a.get<double>(), y = b.get<double>();
  return x < y ? -1 : (x > y ? 1 : 0);
}

Resolved resolve_operand(const dsl::Operand& o, const EvalContext& ctx) {
  if (const auto* p = std::get_if<AttributePath>(&o)) return resolve_attribute(*p, ctx);
  return Resolved(std::in_place, std::get<Value>(o));
}

std::string type_name(const Value& v) { return v.type_name(); }

TruthResult compare(const dsl::CompareNode& n, const EvalContext& ctx) {
  const Resolved lhs = resolve_operand(n.lhs, ctx);
  const Resolved rhs = resolve_operand(n.rhs, ctx);
  if (!lhs || !rhs) return no();
  if (n.op == CompareOp::eq) return of(*lhs == *rhs);
  if (n.op == CompareOp::ne) return of(*lhs != *rhs);
  if (!lhs->is_number() || !rhs->is_number()) {
    return fail("cannot order " + type_name(*lhs) + " against " + type_name(*rhs) + " with '" +
                std::string(dsl::to_string(n.op)) + "'");
  }
  return of(apply_order(n.op, compare_numbers(*lhs, *rhs), 0));
}

TruthResult match(const dsl::MatchNode& n, const EvalContext& ctx) {
  const Resolved v = resolve_attribute(n.path, ctx);
  if (!v) return no();
  const auto& re = *n.pattern.compiled;
  if (v->is_string()) return of(re.search(v->get_ref<const std::string&>()));
  if (v->is_array()) {
    for (const auto& e : *v) {
      if (e.is_string() && re.search(e.get_ref<const std::string&>())) return yes();
    }
    return no();
  }
  return fail("'matches' needs a string or a list, got " + type_name(*v) + " at " +
              n.path.to_string());
}

TruthResult contains(const dsl::ContainsNode& n, const EvalContext& ctx) {
  const Resolved v = resolve_attribute(n.path, ctx);
  if (!v) return no();
  if (v->is_string()) {
    if (!n.needle.is_string()) {
      return fail("'contains' on a string needs a string needle, got " + type_name(n.needle));
    }
    return of(v->get_ref<const std::string&>().find(n.needle.get_ref<const std::string&>()) !=
              std::string::npos);
  }
  if (v->is_array()) {
    return of(std::find(v->begin(), v->end(), n.needle) != v->end());
  }
  if (v->is_object()) {
    if (!n.needle.is_string()) {
      return fail("'contains' on a map needs a string key, got " + type_name(n.needle));
    }
    return of(v->contains(n.needle.get_ref<const std::string&>()));
  }
  return fail("'contains' needs a string, list or map, got " + type_name(*v) + " at " +
              n.path.to_string());
}

TruthResult in_list(const dsl::InNode& n, const EvalContext& ctx) {
  const Resolved v = resolve_attribute(n.path, ctx);
  if (!v) return no();
  return of(std::find(n.values.begin(), n.values.end(), *v) != n.values.end());
}

EvalContext prior_context(const HistoryEntry& e) {
  return EvalContext::prior(e.event, e.result ? &*e.result : nullptr);
}

}  // namespace

TruthResult evaluate_history_node(const dsl::HistoryExistsNode& node, const HistoryView& history) {
  std::optional<TruthResult> first_error;
  for (const auto& entry : history) {
    auto r = evaluate_condition(*node.inner, prior_context(*entry), HistoryView{});
    if (r.truth == Truth::true_) return yes();
    if (r.truth == Truth::error && !first_error) first_error = std::move(r);
  }
  return first_error ? *first_error : no();
}

TruthResult evaluate_history_node(const dsl::HistoryCountNode& node, const HistoryView& history) {
  std::int64_t count = 0;
  for (const auto& entry : history) {
    auto r = evaluate_condition(*node.inner, prior_context(*entry), HistoryView{});
    if (r.truth == Truth::error) return r;
    if (r.truth == Truth::true_) ++count;
  }
  return of(apply_order(node.op, count, node.bound));
}

TruthResult evaluate_condition(const dsl::Condition& c, const EvalContext& ctx,
                               const HistoryView& history) {
  try {
    return std::visit(
        [&](const auto& n) -> TruthResult {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::ConstNode>) {
            return of(n.value);
          } else if constexpr (std::is_same_v<T, dsl::AndNode>) {
            for (const auto& child : n.children) {
              auto r = evaluate_condition(child, ctx, history);
              if (r.truth != Truth::true_) return r;
            }
            return yes();
          } else if constexpr (std::is_same_v<T, dsl::OrNode>) {
            for (const auto& child : n.children) {
              auto r = evaluate_condition(child, ctx, history);
              if (r.truth != Truth::false_) return r;
            }
            return no();
          } else if constexpr (std::is_same_v<T, dsl::NotNode>) {
            auto r = evaluate_condition(*n.child, ctx, history);
            if (r.truth == Truth::error) return r;
            return of(r.truth == Truth::false_);
          } else if constexpr (std::is_same_v<T, dsl::CompareNode>) {
            return compare(n, ctx);
          } else if constexpr (std::is_same_v<T, dsl::MatchNode>) {
            return match(n, ctx);
          } else if constexpr (std::is_same_v<T, dsl::ContainsNode>) {
            return contains(n, ctx);
          } else if constexpr (std::is_same_v<T, dsl::InNode>) {
            return in_list(n, ctx);
          } else if constexpr (std::is_same_v<T, dsl::ExistsNode>) {
            return of(resolve_attribute(n.path, ctx).has_value());
          } else {
            return evaluate_history_node(n, history);
          }
        },
        c.node);
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

Combined Evaluation::combined() const {
  std::vector<Contribution> cs;
  for (const auto& m : matched) {
    if (m.contribution) cs.push_back(*m.contribution);
  }
  return combine(cs);
}

namespace {

bool awaiting_llm(const MatchedRule& m) {
  return !m.errored && m.effect.kind == EffectKind::llm && !m.llm_state;
}

bool from_llm(const MatchedRule& m) { return !m.errored && m.effect.kind == EffectKind::llm; }

std::string describe(const MatchedRule& m, std::string_view fallback) {
  if (m.errored) return "rule " + m.rule_id + " failed to evaluate: " + m.diagnostic;
  if (!m.effect.reason.empty()) return m.effect.reason;
  return "rule " + m.rule_id + " " + std::string(fallback);
}

// Computes the outcome from the current contributions.
void settle(Evaluation& ev, const dsl::PolicySet& ps, const Clock& clock) {
  const Combined combined = ev.combined();
  ev.pending_llm.clear();
  ev.decision.reset();
  ev.review.reset();
  ev.review_reason.clear();

  if (combined != Combined::deny) {
    for (const auto& m : ev.matched) {
      if (awaiting_llm(m)) ev.pending_llm.push_back(m.rule_id);
    }
    if (!ev.pending_llm.empty()) {
      ev.outcome = OutcomeKind::pending_llm;
      return;
    }
  }

  ev.finished = clock.now();
  switch (combined) {
    case Combined::default_:
      ev.outcome = OutcomeKind::final;
      ev.decision = Decision{ps.default_decision, Via::default_, "no rule matched", std::nullopt};
      return;
    case Combined::allow:
    case Combined::deny: {
      const auto want = combined == Combined::deny ? Contribution::deny : Contribution::allow;
      const MatchedRule* first = nullptr;
      bool any_rule = false;
      for (const auto& m : ev.matched) {
        if (m.contribution != want) continue;
        if (first == nullptr) first = &m;
        if (!from_llm(m)) any_rule = true;
      }
      const bool deny = want == Contribution::deny;
      std::string reason = first->effect.kind == EffectKind::llm && !first->errored &&
                                   first->effect.reason.empty()
                               ? "rule " + first->rule_id + ": LLM check flagged the call"
                               : describe(*first, deny ? "denied the call" : "allowed the call");
      ev.outcome = OutcomeKind::final;
      ev.decision = Decision{deny ? Verdict::deny : Verdict::allow,
                             any_rule ? Via::rule : Via::llm, std::move(reason), std::nullopt};
      return;
    }
    case Combined::review: {
      ReviewParams params;
      bool first = true;
      bool timeout_deny = false;
      for (const auto& m : ev.matched) {
        if (m.contribution != Contribution::review) continue;
        const ReviewParams p = (!m.errored && m.effect.kind == EffectKind::review && m.effect.review)
                                   ? *m.effect.review
                                   : ReviewParams{};
        if (first) {
          params = p;
          ev.review_reason = describe(m, "requires review");
          first = false;
        } else {
          params.timeout = std::min(params.timeout, p.timeout);
        }
        timeout_deny = timeout_deny || p.on_timeout == Verdict::deny;
      }
      params.on_timeout = timeout_deny ? Verdict::deny : Verdict::allow;
      ev.outcome = OutcomeKind::pending_review;
      ev.review = params;
      return;
    }
  }
}

}  // namespace

Evaluation evaluate(const ToolCallEvent& event, const ToolResultEvent* result,
                    const dsl::PolicySet& ps, const HistoryView& history, const Clock& clock) {
  Evaluation ev;
  ev.started = clock.now();
  ev.call_id = event.call_id;
  ev.phase = result ? Phase::post : Phase::pre;
  ev.policy_version = ps.version;

  const EvalContext ctx = result ? EvalContext::post(event, *result) : EvalContext::pre(event);

  for (std::size_t i = 0; i < ps.rules.size(); ++i) {
    const dsl::Rule& rule = ps.rules[i];
    if (!rule.enabled || rule.phase != ev.phase) continue;
    const TruthResult r = evaluate_condition(rule.when, ctx, history);
    if (r.truth == Truth::false_) continue;

    MatchedRule m;
    m.rule_id = rule.id;
    m.priority = rule.priority;
    m.source_index = i;
    m.effect = rule.effect;
    if (r.truth == Truth::error) {
      m.errored = true;
      m.diagnostic = r.error;
      switch (ps.on_eval_error) {
        case dsl::EvalErrorMode::deny: m.contribution = Contribution::deny; break;
        case dsl::EvalErrorMode::review: m.contribution = Contribution::review; break;
        case dsl::EvalErrorMode::ignore: break;
      }
    } else {
      switch (rule.effect.kind) {
        case EffectKind::allow: m.contribution = Contribution::allow; break;
        case EffectKind::deny: m.contribution = Contribution::deny; break;
        case EffectKind::review: m.contribution = Contribution::review; break;
        case EffectKind::llm: break;  // decided by apply_llm_verdicts
      }
    }
    ev.matched.push_back(std::move(m));
  }

  std::stable_sort(ev.matched.begin(), ev.matched.end(),
                   [](const MatchedRule& a, const MatchedRule& b) { return a.priority > b.priority; });
  settle(ev, ps, clock);
  return ev;
}

void apply_llm_verdicts(Evaluation& ev, const dsl::PolicySet& ps,
                        const std::map<std::string, llm::InspectorVerdict>& verdicts,
                        LlmErrorMode on_error, const Clock& clock) {
  if (ev.outcome != OutcomeKind::pending_llm) return;
  for (auto& m : ev.matched) {
    if (!awaiting_llm(m)) continue;
    llm::InspectorVerdict v;
    if (auto it = verdicts.find(m.rule_id); it != verdicts.end()) {
      v = it->second;
    } else {
      v.rationale = "unreachable: no verdict supplied";
    }
    m.llm_state = v.state;
    m.llm_rationale = v.rationale;
    switch (v.state) {
      case llm::VerdictState::flag:
        m.contribution = m.effect.llm && m.effect.llm->on_flag == FlagAction::review
                             ? Contribution::review
                             : Contribution::deny;
        break;
      case llm::VerdictState::safe:
        break;
      case llm::VerdictState::error:
        m.contribution = on_error == LlmErrorMode::deny ? Contribution::deny : Contribution::review;
        break;
    }
  }
  settle(ev, ps, clock);
}

Evaluation evaluate_with_inspector(const ToolCallEvent& event, const ToolResultEvent* result,
                                   const dsl::PolicySet& ps, const HistoryView& history,
                                   const llm::Inspector* inspector, LlmErrorMode on_error,
                                   const Clock& clock) {
  Evaluation ev = evaluate(event, result, ps, history, clock);
  if (ev.outcome != OutcomeKind::pending_llm) return ev;

  std::map<std::string, llm::InspectorVerdict> verdicts;
  for (const auto& id : ev.pending_llm) {
    const dsl::Rule* rule = ps.find(id);
    if (inspector == nullptr || rule == nullptr || !rule->effect.llm) {
      verdicts[id] = {llm::VerdictState::error, "unreachable: no LLM backend configured", Millis{0}};
      continue;
    }
    const auto& params = *rule->effect.llm;
    try {
      const auto prompt = llm::PromptTemplate::parse(params.prompt_template, params.max_history);
      verdicts[id] = inspector->inspect(prompt, event, history, rule->effect.reason, result);
    } catch (const std::exception& e) {
      verdicts[id] = {llm::VerdictState::error, std::string("unparseable: ") + e.what(), Millis{0}};
    }
  }
  apply_llm_verdicts(ev, ps, verdicts, on_error, clock);
  return ev;
}

Value to_json(const MatchedRule& m) {
  Value j = {{"rule_id", m.rule_id},
             {"priority", m.priority},
             {"effect_kind", to_string(m.effect.kind)},
             {"errored", m.errored}};
  if (m.errored) j["diagnostic"] = m.diagnostic;
  j["contribution"] = m.contribution ? Value(to_string(*m.contribution)) : Value(nullptr);
  if (m.llm_state) {
    j["llm_state"] = llm::to_string(*m.llm_state);
    j["llm_rationale"] = m.llm_rationale;
  }
  return j;
}

}  // namespace agentguard::engine
