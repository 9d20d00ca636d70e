#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentguard/common/error.hpp"
#include "agentguard/model/types.hpp"

namespace agentguard::replay {

enum class RecordKind { call, result };

// One step of a recorded trace.
//
// Call:   {"kind":"call","session":"a","tool":{...},"args":{...},
//          "targets":[...]?, "principal":{...}?, "call_id":"x"?, "expect":"allow"?}
// Result: {"kind":"result","session":"a","ref":"x"?,"status":"ok","result":...,"expect":...?}
//
// A call's reference id is its "call_id" or, when absent, its 1-based record
// number. A result without "ref" belongs to the latest call of its session.
// Audit decision records are accepted too and replay as the call or result
// they describe, expecting the recorded outcome.
struct TraceRecord {
  std::size_t index = 0;  // 1-based record number
  std::size_t line = 0;   // 1-based source line
  RecordKind kind = RecordKind::call;
  std::string session;
  std::optional<Principal> principal;
  ToolDescriptor tool;
  Value args = Value::object();
  std::optional<std::vector<NetworkTarget>> targets;
  std::string ref;  // call: own reference id; result: referenced call
  ResultStatus status = ResultStatus::ok;
  Value result;
  std::optional<std::string> expect;  // allow | deny | review
};

class TraceError : public Error {
 public:
  TraceError(std::size_t line, const std::string& message)
      : Error("TraceError", "line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Parses newline-delimited JSON. Blank lines are skipped. Throws TraceError.
std::vector<TraceRecord> parse_trace(std::string_view text);

}  // namespace agentguard::replay
