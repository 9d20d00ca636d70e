#pragma once

#include <iosfwd>

namespace agentguard::cli {

// Entry point shared by the `agentguard` binary and the tests.
// Exit codes: 0 success, 1 replay expectation mismatch, 2 bad input
// (unparseable policy, trace or arguments), 3 runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace agentguard::cli
