#include "agentguard/common/ids.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <stdexcept>

namespace agentguard {
namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RandomIds::RandomIds() {
  std::random_device rd;
  std::seed_seq seq{rd(), rd(), rd(), rd(), rd(), rd()};
  rng_.seed(seq);
}

std::string RandomIds::next(std::string_view prefix) {
  std::lock_guard lock(mutex_);
  // Mix a counter in so two draws can never collide even if the RNG repeats.
  const std::uint64_t token = rng_() ^ (++counter_ * 0x9E3779B97F4A7C15ULL);
  return std::string(prefix) + "-" + hex64(token);
}

std::string RandomIds::secret() {
  std::lock_guard lock(mutex_);
  return hex64(rng_()) + hex64(rng_());
}

std::string SequentialIds::next(std::string_view prefix) {
  return std::string(prefix) + "-" + std::to_string(++counter_);
}

std::string SequentialIds::secret() { return "token-" + std::to_string(++counter_); }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string out;
  out.reserve(len * 2);
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

bool secure_equals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  }
  return diff == 0;
}

}  // namespace agentguard
