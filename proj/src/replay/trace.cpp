#include "agentguard/replay/trace.hpp"

#include <map>
#include <set>
#include <sstream>

namespace agentguard::replay {

namespace {

std::string require_str(const Value& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw TraceError(line, std::string("'") + key + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

std::optional<std::string> expect_of(const Value& j, std::size_t line) {
  auto it = j.find("expect");
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw TraceError(line, "'expect' must be a string");
  const auto v = it->get<std::string>();
  if (v != "allow" && v != "deny" && v != "review") {
    throw TraceError(line, "'expect' must be allow, deny or review, not '" + v + "'");
  }
  return v;
}

std::string ref_text(const Value& v, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned() || v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw TraceError(line, "'ref' must be a string or a record number");
}

std::string expected_from_audit(const Value& final) {
  const std::string via = final.value("via", "");
  if (via == "review" || via == "timeout") return "review";
  return final.value("verdict", "deny");
}

}  // namespace

std::vector<TraceRecord> parse_trace(std::string_view text) {
  std::vector<TraceRecord> out;
  std::map<std::string, std::size_t> last_call;  // session -> index into out
  std::set<std::string> refs;
  // Audit decisions, so that a review_pending record followed by its decision
  // is replayed once.
  std::set<std::string> decided;
  std::vector<std::pair<Value, std::size_t>> parsed;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    Value j;
    try {
      j = Value::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw TraceError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw TraceError(line, "record must be a JSON object");
    if (j.value("kind", "") == "decision") {
      decided.insert(j.value("call_id", "") + "/" + j.value("phase", "pre"));
    }
    parsed.emplace_back(std::move(j), line);
  }

  for (auto& [j, ln] : parsed) {
    const std::string kind = j.value("kind", "");
    TraceRecord r;
    r.line = ln;
    try {
      if (kind == "call") {
        r.kind = RecordKind::call;
        r.session = require_str(j, "session", ln);
        if (j.contains("principal")) r.principal = j.at("principal").get<Principal>();
        const auto& tool = j.at("tool");
        r.tool = tool.is_string() ? ToolDescriptor{tool.get<std::string>(), std::nullopt, {}}
                                  : tool.get<ToolDescriptor>();
        r.tool.validate();
        r.args = j.value("args", Value::object());
        if (!r.args.is_object()) throw TraceError(ln, "'args' must be a map");
        if (j.contains("targets") && !j.at("targets").is_null()) {
          r.targets = j.at("targets").get<std::vector<NetworkTarget>>();
        }
        r.expect = expect_of(j, ln);
        r.ref = j.contains("call_id") ? require_str(j, "call_id", ln)
                                      : std::to_string(out.size() + 1);
      } else if (kind == "result") {
        r.kind = RecordKind::result;
        r.session = require_str(j, "session", ln);
        if (j.contains("ref")) {
          r.ref = ref_text(j.at("ref"), ln);
        } else if (j.contains("call_id")) {
          r.ref = require_str(j, "call_id", ln);
        } else {
          auto it = last_call.find(r.session);
          if (it == last_call.end()) throw TraceError(ln, "result before any call in session " + r.session);
          r.ref = out[it->second].ref;
        }
        const auto status = parse_result_status(j.value("status", "ok"));
        if (!status) throw TraceError(ln, "'status' must be ok or error");
        r.status = *status;
        r.result = j.value("result", Value());
        r.expect = expect_of(j, ln);
      } else if (kind == "decision" || kind == "review_pending") {
        const std::string phase = j.value("phase", "pre");
        const std::string call_id = require_str(j, "call_id", ln);
        if (kind == "review_pending" && decided.count(call_id + "/" + phase) != 0) continue;
        const auto event = j.at("event").get<ToolCallEvent>();
        r.session = require_str(j, "session_id", ln);
        r.expect = kind == "decision" ? expected_from_audit(j.at("final")) : std::string("review");
        if (phase == "pre") {
          r.kind = RecordKind::call;
          r.principal = event.principal;
          r.tool = event.tool;
          r.args = event.args;
          r.targets = event.targets;
          r.ref = call_id;
        } else {
          const auto result = j.at("result").get<ToolResultEvent>();
          r.kind = RecordKind::result;
          r.ref = call_id;
          r.status = result.status;
          r.result = result.result;
        }
      } else if (kind == "session_started" || kind == "session_ended" || kind == "policy_updated") {
        continue;
      } else {
        throw TraceError(ln, "unknown record kind '" + kind + "'");
      }
    } catch (const TraceError&) {
      throw;
    } catch (const std::exception& e) {
      throw TraceError(ln, e.what());
    }

    if (r.kind == RecordKind::call) {
      if (!refs.insert(r.ref).second) throw TraceError(ln, "duplicate call id '" + r.ref + "'");
    } else if (refs.count(r.ref) == 0) {
      throw TraceError(ln, "result references unknown call '" + r.ref + "'");
    }
    r.index = out.size() + 1;
    if (r.kind == RecordKind::call) last_call[r.session] = out.size();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace agentguard::replay
