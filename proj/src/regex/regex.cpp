#include "agentguard/regex/regex.hpp"

#include <cctype>
#include <memory>
#include <optional>

namespace agentguard::regex {
namespace {

using ByteSet = std::bitset<256>;

struct Node;
using NodePtr = std::unique_ptr<Node>;

enum class Kind { empty, byte, any, cls, bol, eol, word_b, not_word_b, concat, alt, repeat };

struct Node {
  Kind kind = Kind::empty;
  unsigned char byte = 0;
  ByteSet set;
  std::vector<NodePtr> children;
  int min = 0;
  int max = -1;  // -1 = unbounded
};

NodePtr make(Kind k) {
  auto n = std::make_unique<Node>();
  n->kind = k;
  return n;
}

bool is_word(unsigned char c) { return std::isalnum(c) || c == '_'; }

ByteSet digit_set() {
  ByteSet s;
  for (int c = '0'; c <= '9'; ++c) s.set(static_cast<std::size_t>(c));
  return s;
}
ByteSet word_set() {
  ByteSet s;
  for (int c = 0; c < 256; ++c) {
    if (is_word(static_cast<unsigned char>(c))) s.set(static_cast<std::size_t>(c));
  }
  return s;
}
ByteSet space_set() {
  ByteSet s;
  for (char c : std::string_view(" \t\n\r\f\v")) s.set(static_cast<unsigned char>(c));
  return s;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    if (src_.substr(0, 4) == "(?i)") {
      icase_ = true;
      pos_ = 4;
    }
    auto node = parse_alt();
    if (pos_ < src_.size()) fail(src_[pos_] == ')' ? "unmatched ')'" : "unexpected character");
    return node;
  }

  bool icase() const { return icase_; }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw PatternError(msg, pos_); }

  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  NodePtr parse_alt() {
    auto first = parse_concat();
    if (at_end() || peek() != '|') return first;
    auto alt = make(Kind::alt);
    alt->children.push_back(std::move(first));
    while (!at_end() && peek() == '|') {
      ++pos_;
      alt->children.push_back(parse_concat());
    }
    return alt;
  }

  NodePtr parse_concat() {
    auto concat = make(Kind::concat);
    while (!at_end() && peek() != '|' && peek() != ')') {
      concat->children.push_back(parse_repeat());
    }
    return concat;
  }

  std::optional<int> read_int() {
    const auto start = pos_;
    int value = 0;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
      value = value * 10 + (peek() - '0');
      if (value > kRepeatCeiling) {
        pos_ = start;
        fail("repetition count too large");
      }
      ++pos_;
    }
    if (pos_ == start) return std::nullopt;
    return value;
  }

  // Parses `{n}`, `{n,}`, `{n,m}` at pos_ (which is at '{'). Returns false and
  // restores pos_ if this is not a well-formed counted quantifier.
  bool parse_braces(int& min, int& max) {
    const auto start = pos_;
    ++pos_;
    auto lo = read_int();
    if (!lo) {
      pos_ = start;
      return false;
    }
    min = *lo;
    max = *lo;
    if (!at_end() && peek() == ',') {
      ++pos_;
      auto hi = read_int();
      max = hi ? *hi : -1;
    }
    if (at_end() || peek() != '}') {
      pos_ = start;
      return false;
    }
    ++pos_;
    if (max != -1 && max < min) {
      pos_ = start;
      fail("repetition range out of order");
    }
    return true;
  }

  NodePtr parse_repeat() {
    auto atom = parse_atom();
    bool quantified = false;
    while (!at_end()) {
      int min = 0, max = -1;
      const char c = peek();
      if (c == '*') {
        ++pos_;
      } else if (c == '+') {
        min = 1;
        ++pos_;
      } else if (c == '?') {
        max = 1;
        ++pos_;
      } else if (c == '{') {
        if (!parse_braces(min, max)) break;
      } else {
        break;
      }
      if (quantified) fail("nothing to repeat");
      quantified = true;
      if (atom->kind == Kind::bol || atom->kind == Kind::eol || atom->kind == Kind::word_b ||
          atom->kind == Kind::not_word_b) {
        fail("nothing to repeat");
      }
      if (!at_end() && peek() == '?') ++pos_;  // lazy: same language
      auto rep = make(Kind::repeat);
      rep->min = min;
      rep->max = max;
      rep->children.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  NodePtr literal(unsigned char c) {
    auto n = make(Kind::byte);
    n->byte = c;
    return n;
  }

  NodePtr set_node(ByteSet s) {
    auto n = make(Kind::cls);
    n->set = s;
    return n;
  }

  NodePtr parse_atom() {
    const char c = peek();
    switch (c) {
      case '(': {
        ++pos_;
        if (!at_end() && peek() == '?') {
          if (src_.substr(pos_, 2) == "?:") {
            pos_ += 2;
          } else if (src_.substr(pos_, 3) == "?i)") {
            fail("(?i) is only supported at the start of the pattern");
          } else {
            fail("lookaround and named groups are not supported");
          }
        }
        auto inner = parse_alt();
        if (at_end() || peek() != ')') fail("missing ')'");
        ++pos_;
        return inner;
      }
      case ')':
        fail("unmatched ')'");
      case '*': case '+': case '?':
        fail("nothing to repeat");
      case '{': {
        int min = 0, max = 0;
        if (parse_braces(min, max)) fail("nothing to repeat");
        ++pos_;
        return literal('{');
      }
      case '[':
        return parse_class();
      case '.':
        ++pos_;
        return make(Kind::any);
      case '^':
        ++pos_;
        return make(Kind::bol);
      case '$':
        ++pos_;
        return make(Kind::eol);
      case '\\':
        return parse_escape();
      default:
        ++pos_;
        return literal(static_cast<unsigned char>(c));
    }
  }

  // Escapes shared between atoms and classes. Returns a set, or a single byte.
  struct Escape {
    std::optional<ByteSet> set;
    unsigned char byte = 0;
  };

  Escape read_escape(bool in_class) {
    ++pos_;  // backslash
    if (at_end()) fail("trailing backslash");
    const char c = peek();
    ++pos_;
    switch (c) {
      case 'd': return {digit_set()};
      case 'D': return {~digit_set()};
      case 'w': return {word_set()};
      case 'W': return {~word_set()};
      case 's': return {space_set()};
      case 'S': return {~space_set()};
      case 'n': return {std::nullopt, '\n'};
      case 't': return {std::nullopt, '\t'};
      case 'r': return {std::nullopt, '\r'};
      case 'f': return {std::nullopt, '\f'};
      case 'v': return {std::nullopt, '\v'};
      case 'x': {
        if (pos_ + 2 > src_.size()) fail("incomplete \\x escape");
        const int hi = hex_value(src_[pos_]);
        const int lo = hex_value(src_[pos_ + 1]);
        if (hi < 0 || lo < 0) fail("invalid \\x escape");
        pos_ += 2;
        return {std::nullopt, static_cast<unsigned char>(hi * 16 + lo)};
      }
      case '0':
        return {std::nullopt, '\0'};
      default:
        break;
    }
    if (c >= '1' && c <= '9') {
      --pos_;
      fail("backreferences are not supported");
    }
    if (in_class && c == 'b') return {std::nullopt, '\b'};
    if (std::isalnum(static_cast<unsigned char>(c))) {
      --pos_;
      fail(std::string("unknown escape \\") + c);
    }
    return {std::nullopt, static_cast<unsigned char>(c)};
  }

  NodePtr parse_escape() {
    if (pos_ + 1 < src_.size()) {
      const char next = src_[pos_ + 1];
      if (next == 'b') {
        pos_ += 2;
        return make(Kind::word_b);
      }
      if (next == 'B') {
        pos_ += 2;
        return make(Kind::not_word_b);
      }
    }
    auto esc = read_escape(false);
    if (esc.set) return set_node(*esc.set);
    return literal(esc.byte);
  }

  NodePtr parse_class() {
    const auto open = pos_;
    ++pos_;
    bool negate = false;
    if (!at_end() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet set;
    bool first = true;
    while (true) {
      if (at_end()) {
        pos_ = open;
        fail("missing ']'");
      }
      char c = peek();
      if (c == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      unsigned char lo;
      if (c == '\\') {
        auto esc = read_escape(true);
        if (esc.set) {
          set |= *esc.set;
          continue;
        }
        lo = esc.byte;
      } else {
        lo = static_cast<unsigned char>(c);
        ++pos_;
      }
      if (pos_ + 1 < src_.size() && peek() == '-' && src_[pos_ + 1] != ']') {
        ++pos_;
        unsigned char hi;
        if (peek() == '\\') {
          auto esc = read_escape(true);
          if (esc.set) fail("invalid range in character class");
          hi = esc.byte;
        } else {
          hi = static_cast<unsigned char>(peek());
          ++pos_;
        }
        if (hi < lo) fail("character class range out of order");
        for (int b = lo; b <= hi; ++b) set.set(static_cast<std::size_t>(b));
      } else {
        set.set(lo);
      }
    }
    if (negate) set = ~set;
    return set_node(set);
  }

  static constexpr int kRepeatCeiling = Pattern::kMaxRepeat;

  std::string_view src_;
  std::size_t pos_ = 0;
  bool icase_ = false;
};

bool has_unbounded_repeat(const Node& n) {
  if (n.kind == Kind::repeat && (n.max == -1 || n.max > n.min)) return true;
  for (const auto& c : n.children) {
    if (has_unbounded_repeat(*c)) return true;
  }
  return false;
}

bool nested_quantifier(const Node& n) {
  if (n.kind == Kind::repeat && n.max == -1) {
    for (const auto& c : n.children) {
      if (has_unbounded_repeat(*c)) return true;
    }
  }
  for (const auto& c : n.children) {
    if (nested_quantifier(*c)) return true;
  }
  return false;
}

}  // namespace

class Compiler {
 public:
  Compiler(Pattern& out, bool icase) : out_(out), icase_(icase) {}

  void compile(const Node& root) {
    emit_node(root);
    push({Pattern::Op::match});
  }

 private:
  std::size_t push(Pattern::Inst inst) {
    if (out_.program_.size() >= Pattern::kMaxProgramSize) {
      throw PatternError("pattern too large", 0);
    }
    out_.program_.push_back(inst);
    return out_.program_.size() - 1;
  }

  std::size_t add_class(ByteSet set) {
    if (icase_) {
      ByteSet folded = set;
      for (int c = 'a'; c <= 'z'; ++c) {
        const auto upper = static_cast<std::size_t>(c - 'a' + 'A');
        if (set.test(static_cast<std::size_t>(c)) || set.test(upper)) {
          folded.set(static_cast<std::size_t>(c));
          folded.set(upper);
        }
      }
      set = folded;
    }
    out_.classes_.push_back(set);
    return out_.classes_.size() - 1;
  }

  void emit_node(const Node& n) {
    using Op = Pattern::Op;
    switch (n.kind) {
      case Kind::empty:
        return;
      case Kind::byte:
        if (icase_ && std::isalpha(n.byte)) {
          ByteSet s;
          s.set(n.byte);
          push({Op::cls, 0, add_class(s)});
        } else {
          push({Op::byte, n.byte});
        }
        return;
      case Kind::any:
        push({Op::any});
        return;
      case Kind::cls:
        push({Op::cls, 0, add_class(n.set)});
        return;
      case Kind::bol:
        push({Op::bol});
        return;
      case Kind::eol:
        push({Op::eol});
        return;
      case Kind::word_b:
        push({Op::word_b});
        return;
      case Kind::not_word_b:
        push({Op::not_word_b});
        return;
      case Kind::concat:
        for (const auto& c : n.children) emit_node(*c);
        return;
      case Kind::alt: {
        std::vector<std::size_t> exits;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i + 1 < n.children.size()) {
            const auto split = push({Op::split});
            out_.program_[split].x = split + 1;
            emit_node(*n.children[i]);
            exits.push_back(push({Op::jmp}));
            out_.program_[split].y = out_.program_.size();
          } else {
            emit_node(*n.children[i]);
          }
        }
        for (auto j : exits) out_.program_[j].x = out_.program_.size();
        return;
      }
      case Kind::repeat: {
        const Node& body = *n.children.front();
        for (int i = 0; i < n.min; ++i) emit_node(body);
        if (n.max == -1) {
          const auto split = push({Op::split});
          out_.program_[split].x = split + 1;
          emit_node(body);
          const auto back = push({Op::jmp});
          out_.program_[back].x = split;
          out_.program_[split].y = out_.program_.size();
        } else {
          std::vector<std::size_t> splits;
          for (int i = n.min; i < n.max; ++i) {
            const auto split = push({Op::split});
            out_.program_[split].x = split + 1;
            splits.push_back(split);
            emit_node(body);
          }
          for (auto s : splits) out_.program_[s].y = out_.program_.size();
        }
        return;
      }
    }
  }

  Pattern& out_;
  bool icase_;
};

Pattern Pattern::compile(std::string_view source) {
  Parser parser(source);
  auto root = parser.parse();
  Pattern p;
  p.source_ = std::string(source);
  p.backtracking_risk_ = nested_quantifier(*root);
  Compiler(p, parser.icase()).compile(*root);
  return p;
}

namespace {

// Sparse set of program counters with O(1) clear.
class ThreadList {
 public:
  explicit ThreadList(std::size_t n) : dense_(n), sparse_(n), size_(0) {}
  bool contains(std::size_t pc) const {
    const auto i = sparse_[pc];
    return i < size_ && dense_[i] == pc;
  }
  void insert(std::size_t pc) {
    sparse_[pc] = size_;
    dense_[size_++] = pc;
  }
  void clear() { size_ = 0; }
  std::size_t size() const { return size_; }
  std::size_t operator[](std::size_t i) const { return dense_[i]; }

 private:
  std::vector<std::size_t> dense_;
  std::vector<std::size_t> sparse_;
  std::size_t size_;
};

}  // namespace

bool Pattern::search(std::string_view text) const {
  const std::size_t n = text.size();
  ThreadList current(program_.size());
  ThreadList next(program_.size());
  std::vector<std::size_t> stack;

  auto add_thread = [&](ThreadList& list, std::size_t start_pc, std::size_t pos) {
    stack.push_back(start_pc);
    while (!stack.empty()) {
      const auto pc = stack.back();
      stack.pop_back();
      if (list.contains(pc)) continue;
      list.insert(pc);
      const Inst& inst = program_[pc];
      switch (inst.op) {
        case Op::jmp:
          stack.push_back(inst.x);
          break;
        case Op::split:
          stack.push_back(inst.y);
          stack.push_back(inst.x);
          break;
        case Op::bol:
          if (pos == 0) stack.push_back(pc + 1);
          break;
        case Op::eol:
          if (pos == n) stack.push_back(pc + 1);
          break;
        case Op::word_b:
        case Op::not_word_b: {
          const bool before = pos > 0 && is_word(static_cast<unsigned char>(text[pos - 1]));
          const bool after = pos < n && is_word(static_cast<unsigned char>(text[pos]));
          if ((before != after) == (inst.op == Op::word_b)) stack.push_back(pc + 1);
          break;
        }
        default:
          break;
      }
    }
  };

  for (std::size_t pos = 0; pos <= n; ++pos) {
    add_thread(current, 0, pos);
    next.clear();
    for (std::size_t i = 0; i < current.size(); ++i) {
      const auto pc = current[i];
      const Inst& inst = program_[pc];
      if (inst.op == Op::match) return true;
      if (pos == n) continue;
      const auto c = static_cast<unsigned char>(text[pos]);
      bool advance = false;
      switch (inst.op) {
        case Op::byte: advance = c == inst.byte; break;
        case Op::any: advance = c != '\n'; break;
        case Op::cls: advance = classes_[inst.x].test(c); break;
        default: break;
      }
      if (advance) add_thread(next, pc + 1, pos + 1);
    }
    std::swap(current, next);
  }
  return false;
}

}  // namespace agentguard::regex
