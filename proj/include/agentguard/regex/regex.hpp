#pragma once

#include <bitset>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Linear-time regular expressions for policy `matches` predicates.
//
// Matching is a Thompson-NFA simulation (Pike VM without captures), so the
// cost of search() is O(len(text) * len(program)) regardless of pattern
// shape. The dialect is the usual ECMAScript subset minus anything that
// needs backtracking: no backreferences, no lookaround.
//
// Supported: literals, `.`, `[...]` / `[^...]` with ranges, `\d \D \w \W \s \S`,
// `\b \B`, `^ $`, `( )`, `(?: )`, `|`, `* + ? {n} {n,} {n,m}` (lazy suffix
// accepted and ignored), `\xHH`, `\n \t \r \f \v`, and a leading `(?i)` for
// ASCII case-insensitive matching. Text is treated as bytes.
namespace agentguard::regex {

class PatternError : public std::runtime_error {
 public:
  PatternError(const std::string& message, std::size_t offset)
      : std::runtime_error(message), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class Pattern {
 public:
  // Throws PatternError.
  static Pattern compile(std::string_view source);

  // True if the pattern matches anywhere in `text`.
  bool search(std::string_view text) const;

  const std::string& source() const noexcept { return source_; }

  // Nested unbounded quantifiers such as `(a+)+`. Harmless for this engine
  // but catastrophic for backtracking engines the same policy may be ported to.
  bool backtracking_risk() const noexcept { return backtracking_risk_; }

  std::size_t program_size() const noexcept { return program_.size(); }

  static constexpr std::size_t kMaxProgramSize = 50'000;
  static constexpr int kMaxRepeat = 1000;

  enum class Op : unsigned char { byte, any, cls, split, jmp, match, bol, eol, word_b, not_word_b };
  struct Inst {
    Op op;
    unsigned char byte = 0;
    std::size_t x = 0;  // class index, or first branch/jump target
    std::size_t y = 0;  // second split branch
  };

 private:
  friend class Compiler;
  std::string source_;
  std::vector<Inst> program_;
  std::vector<std::bitset<256>> classes_;
  bool backtracking_risk_ = false;
};

}  // namespace agentguard::regex
