#include "agentguard/engine/combine.hpp"

#include <algorithm>

namespace agentguard::engine {

std::string_view to_string(Contribution c) {
  switch (c) {
    case Contribution::allow: return "allow";
    case Contribution::review: return "review";
    case Contribution::deny: return "deny";
  }
  return "?";
}

std::string_view to_string(Combined c) {
  switch (c) {
    case Combined::default_: return "default";
    case Combined::allow: return "allow";
    case Combined::review: return "review";
    case Combined::deny: return "deny";
  }
  return "?";
}

Combined combine(std::span<const Contribution> contributions) {
  Combined out = Combined::default_;
  for (auto c : contributions) {
    const auto lifted = static_cast<Combined>(static_cast<int>(c) + 1);
    out = std::max(out, lifted);
  }
  return out;
}

}  // namespace agentguard::engine
