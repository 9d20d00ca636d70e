#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentguard/common/clock.hpp"
#include "agentguard/dsl/diagnostic.hpp"

namespace agentguard::dsl {

enum class Tok {
  ident,
  integer,
  duration,
  string,
  lbrace,
  rbrace,
  lparen,
  rparen,
  lbracket,
  rbracket,
  colon,
  comma,
  dot,
  op,  // == != < <= > >=
  end,
};

struct Token {
  Tok kind = Tok::end;
  std::string text;  // identifier / operator spelling / decoded string
  std::int64_t integer = 0;
  Millis duration{0};
  SourceSpan span;

  bool is_ident(std::string_view word) const { return kind == Tok::ident && text == word; }
};

std::string_view describe(Tok t);

struct LexResult {
  std::vector<Token> tokens;  // always terminated by Tok::end
  std::optional<Diagnostic> error;
};

LexResult lex(std::string_view text);

}  // namespace agentguard::dsl
