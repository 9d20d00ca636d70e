#include "lexer.hpp"

#include <cctype>
#include <charconv>
#include <limits>

namespace agentguard::dsl {
namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  LexResult run() {
    LexResult out;
    while (true) {
      skip_trivia();
      if (at_end()) break;
      auto tok = next_token();
      if (!tok) {
        out.error = error_;
        break;
      }
      out.tokens.push_back(std::move(*tok));
    }
    Token end;
    end.kind = Tok::end;
    end.span = here();
    out.tokens.push_back(end);
    return out;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  SourceSpan here() const { return {line_, col_}; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (!at_end()) {
      const char c = peek();
      if (c == '#') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::optional<Token> fail(SourceSpan at, std::string message) {
    error_ = Diagnostic{Severity::error, "SyntaxError", std::move(message), at, {}};
    return std::nullopt;
  }

  std::optional<Token> next_token() {
    Token tok;
    tok.span = here();
    const char c = peek();
    auto single = [&](Tok kind) {
      tok.kind = kind;
      tok.text = std::string(1, c);
      advance();
      return tok;
    };
    switch (c) {
      case '{': return single(Tok::lbrace);
      case '}': return single(Tok::rbrace);
      case '(': return single(Tok::lparen);
      case ')': return single(Tok::rparen);
      case '[': return single(Tok::lbracket);
      case ']': return single(Tok::rbracket);
      case ':': return single(Tok::colon);
      case ',': return single(Tok::comma);
      case '.': return single(Tok::dot);
      case '"': return lex_string(tok);
      case '=':
      case '!':
        if (peek(1) != '=') return fail(tok.span, std::string("unexpected character '") + c + "'");
        tok.kind = Tok::op;
        tok.text = std::string(1, c) + "=";
        advance();
        advance();
        return tok;
      case '<':
      case '>':
        tok.kind = Tok::op;
        tok.text = std::string(1, c);
        advance();
        if (peek() == '=') {
          tok.text.push_back('=');
          advance();
        }
        return tok;
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      return lex_number(tok);
    }
    if (ident_start(c)) {
      tok.kind = Tok::ident;
      while (!at_end() && ident_char(peek())) {
        tok.text.push_back(peek());
        advance();
      }
      return tok;
    }
    return fail(tok.span, std::string("unexpected character '") + c + "'");
  }

  std::optional<Token> lex_number(Token& tok) {
    const auto start = pos_;
    if (peek() == '-') advance();
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
    const auto digits = src_.substr(start, pos_ - start);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      return fail(tok.span, "integer literal out of range");
    }
    // Duration suffix glued to the digits: 300s, 500ms, 5m, 1h.
    std::string unit;
    std::size_t look = 0;
    while (std::isalpha(static_cast<unsigned char>(peek(look)))) unit.push_back(peek(look++));
    if (!unit.empty() && !ident_char(peek(look)) &&
        (unit == "ms" || unit == "s" || unit == "m" || unit == "h")) {
      if (value < 0) return fail(tok.span, "durations cannot be negative");
      for (std::size_t i = 0; i < look; ++i) advance();
      auto d = parse_duration(std::to_string(value) + unit);
      tok.kind = Tok::duration;
      tok.duration = *d;
      tok.text = std::string(digits) + unit;
      return tok;
    }
    tok.kind = Tok::integer;
    tok.integer = value;
    tok.text = std::string(digits);
    return tok;
  }

  std::optional<std::uint32_t> read_hex4() {
    std::uint32_t cp = 0;
    for (int i = 0; i < 4; ++i) {
      const char h = peek();
      int v = -1;
      if (h >= '0' && h <= '9') v = h - '0';
      else if (h >= 'a' && h <= 'f') v = h - 'a' + 10;
      else if (h >= 'A' && h <= 'F') v = h - 'A' + 10;
      if (v < 0) return std::nullopt;
      cp = cp * 16 + static_cast<std::uint32_t>(v);
      advance();
    }
    return cp;
  }

  std::optional<Token> lex_string(Token& tok) {
    tok.kind = Tok::string;
    advance();  // opening quote
    while (true) {
      if (at_end() || peek() == '\n') return fail(tok.span, "unterminated string literal");
      const char c = peek();
      if (c == '"') {
        advance();
        return tok;
      }
      if (c != '\\') {
        tok.text.push_back(c);
        advance();
        continue;
      }
      const auto esc_at = here();
      advance();
      if (at_end()) return fail(tok.span, "unterminated string literal");
      const char e = peek();
      advance();
      switch (e) {
        case '"': tok.text.push_back('"'); break;
        case '\\': tok.text.push_back('\\'); break;
        case '/': tok.text.push_back('/'); break;
        case 'n': tok.text.push_back('\n'); break;
        case 't': tok.text.push_back('\t'); break;
        case 'r': tok.text.push_back('\r'); break;
        case 'b': tok.text.push_back('\b'); break;
        case 'f': tok.text.push_back('\f'); break;
        case 'u': {
          auto cp = read_hex4();
          if (!cp) return fail(esc_at, "invalid \\u escape");
          if (*cp >= 0xD800 && *cp <= 0xDBFF) {
            if (peek() != '\\' || peek(1) != 'u') return fail(esc_at, "unpaired surrogate");
            advance();
            advance();
            auto low = read_hex4();
            if (!low || *low < 0xDC00 || *low > 0xDFFF) return fail(esc_at, "unpaired surrogate");
            *cp = 0x10000 + ((*cp - 0xD800) << 10) + (*low - 0xDC00);
          } else if (*cp >= 0xDC00 && *cp <= 0xDFFF) {
            return fail(esc_at, "unpaired surrogate");
          }
          append_utf8(tok.text, *cp);
          break;
        }
        default:
          return fail(esc_at, std::string("invalid escape '\\") + e + "'");
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Diagnostic error_;
};

}  // namespace

std::string_view describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::integer: return "integer";
    case Tok::duration: return "duration";
    case Tok::string: return "string";
    case Tok::lbrace: return "'{'";
    case Tok::rbrace: return "'}'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::lbracket: return "'['";
    case Tok::rbracket: return "']'";
    case Tok::colon: return "':'";
    case Tok::comma: return "','";
    case Tok::dot: return "'.'";
    case Tok::op: return "operator";
    case Tok::end: return "end of input";
  }
  return "token";
}

LexResult lex(std::string_view text) { return Lexer(text).run(); }

}  // namespace agentguard::dsl
