#include "agentguard/model/targets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string>

namespace agentguard {
namespace {

bool is_scheme_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

bool is_host_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
}

bool is_delimiter(char c) {
  switch (c) {
    case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
    case '"': case '\'': case '`': case '<': case '>': case '(': case ')':
    case '{': case '}': case ',': case ';': case '|': case '=': case '\\':
      return true;
    default:
      return false;
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<int> parse_port(std::string_view digits) {
  if (digits.empty() || digits.size() > 5) return std::nullopt;
  if (!std::all_of(digits.begin(), digits.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  int port = 0;
  std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (port < 1 || port > 65535) return std::nullopt;
  return port;
}

bool valid_reg_name(std::string_view host) {
  if (host.empty() || host.front() == '.' || host.back() == '.' || host.front() == '-') {
    return false;
  }
  if (host.find("..") != std::string_view::npos) return false;
  return std::all_of(host.begin(), host.end(), is_host_char);
}

bool is_ipv4(std::string_view host) {
  int labels = 0;
  std::size_t start = 0;
  while (start <= host.size()) {
    auto dot = host.find('.', start);
    auto label = host.substr(start, dot == std::string_view::npos ? std::string_view::npos
                                                                   : dot - start);
    if (label.empty() || label.size() > 3) return false;
    if (!std::all_of(label.begin(), label.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return false;
    }
    int value = 0;
    std::from_chars(label.data(), label.data() + label.size(), value);
    if (value > 255) return false;
    ++labels;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels == 4;
}

// A bare host in a host:port literal must look like a network name, so that
// things like "12:30" or "ratio 3.5:1" are not mistaken for targets.
bool plausible_bare_host(std::string_view host) {
  if (!valid_reg_name(host)) return false;
  if (host == "localhost" || is_ipv4(host)) return true;
  const auto last_dot = host.rfind('.');
  if (last_dot == std::string_view::npos) return false;
  const auto tld = host.substr(last_dot + 1);
  return std::any_of(tld.begin(), tld.end(), [](unsigned char c) { return std::isalpha(c); });
}

std::optional<NetworkTarget> parse_url(std::string_view scheme, std::string_view rest) {
  NetworkTarget target;
  target.scheme = lower(scheme);
  const auto authority_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, authority_end);
  std::string_view tail =
      authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority.remove_prefix(at + 1);
  }
  std::string_view host;
  std::string_view port_text;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos || close == 1) return std::nullopt;
    host = authority.substr(1, close - 1);
    if (!std::all_of(host.begin(), host.end(), [](unsigned char c) {
          return std::isxdigit(c) || c == ':' || c == '.';
        })) {
      return std::nullopt;
    }
    auto after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') return std::nullopt;
      port_text = after.substr(1);
    }
  } else {
    const auto colon = authority.rfind(':');
    host = authority.substr(0, colon);
    if (colon != std::string_view::npos) port_text = authority.substr(colon + 1);
    if (!valid_reg_name(host)) return std::nullopt;
  }
  if (host.empty()) return std::nullopt;
  if (!port_text.empty()) {
    auto port = parse_port(port_text);
    if (!port) return std::nullopt;
    target.port = port;
  }
  target.host = lower(host);
  if (!tail.empty() && tail.front() == '/') {
    const auto path_end = tail.find_first_of("?#");
    target.path = std::string(tail.substr(0, path_end));
  }
  return target;
}

std::optional<NetworkTarget> parse_host_port(std::string_view token) {
  if (auto at = token.rfind('@'); at != std::string_view::npos) token.remove_prefix(at + 1);
  const auto colon = token.rfind(':');
  if (colon == std::string_view::npos) return std::nullopt;
  const auto host = token.substr(0, colon);
  if (!plausible_bare_host(host)) return std::nullopt;
  auto port = parse_port(token.substr(colon + 1));
  if (!port) return std::nullopt;
  NetworkTarget target;
  target.host = lower(host);
  target.port = port;
  return target;
}

std::string_view trim_token(std::string_view token) {
  auto count = [&](char c) { return std::count(token.begin(), token.end(), c); };
  while (!token.empty()) {
    const char c = token.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == ')') {
      token.remove_suffix(1);
    } else if (c == ']' && count('[') < count(']')) {
      token.remove_suffix(1);
    } else {
      break;
    }
  }
  return token;
}

void scan_string(std::string_view text, std::vector<NetworkTarget>& out) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_delimiter(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_delimiter(text[j])) ++j;
    if (j > i) {
      if (auto t = parse_target(text.substr(i, j - i))) out.push_back(std::move(*t));
    }
    i = j;
  }
}

void walk(const Value& v, std::vector<NetworkTarget>& out) {
  if (v.is_string()) {
    scan_string(v.get_ref<const std::string&>(), out);
  } else if (v.is_object() || v.is_array()) {
    for (const auto& child : v) walk(child, out);
  }
}

}  // namespace

std::optional<NetworkTarget> parse_target(std::string_view candidate) {
  auto token = trim_token(candidate);
  if (token.empty()) return std::nullopt;
  if (const auto sep = token.find("://"); sep != std::string_view::npos) {
    std::size_t start = sep;
    while (start > 0 && is_scheme_char(token[start - 1])) --start;
    // Scheme must begin with a letter.
    while (start < sep && !std::isalpha(static_cast<unsigned char>(token[start]))) ++start;
    if (start == sep) return std::nullopt;
    return parse_url(token.substr(start, sep - start), token.substr(sep + 3));
  }
  while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.front()))) {
    token.remove_prefix(1);
  }
  return parse_host_port(token);
}

std::vector<NetworkTarget> extract_targets(const Value& args) {
  std::vector<NetworkTarget> out;
  walk(args, out);
  return out;
}

}  // namespace agentguard
