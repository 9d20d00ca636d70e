#pragma once

#include <span>
#include <string_view>

namespace agentguard::engine {

// What a single matched rule contributes once any LLM check is resolved.
enum class Contribution { allow, review, deny };

// Lattice: default < allow < review < deny. `default_` only for the empty input.
enum class Combined { default_, allow, review, deny };

std::string_view to_string(Contribution c);
std::string_view to_string(Combined c);

// Lattice maximum. Commutative, associative, idempotent.
Combined combine(std::span<const Contribution> contributions);

}  // namespace agentguard::engine
