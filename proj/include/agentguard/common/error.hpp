#pragma once

#include <stdexcept>
#include <string>

namespace agentguard {

// Base for every domain error. `code()` is the stable machine-readable name
// that also appears in HTTP error payloads.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define AGENTGUARD_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

AGENTGUARD_DEFINE_ERROR(ValidationError);
AGENTGUARD_DEFINE_ERROR(IllegalRoot);
AGENTGUARD_DEFINE_ERROR(UnknownSession);
AGENTGUARD_DEFINE_ERROR(SessionEnded);
AGENTGUARD_DEFINE_ERROR(SequenceError);
AGENTGUARD_DEFINE_ERROR(UnknownReview);
AGENTGUARD_DEFINE_ERROR(AlreadyTerminal);
AGENTGUARD_DEFINE_ERROR(UnknownCall);
AGENTGUARD_DEFINE_ERROR(UnknownPlaceholder);
AGENTGUARD_DEFINE_ERROR(StorageError);
AGENTGUARD_DEFINE_ERROR(AlreadyReported);
AGENTGUARD_DEFINE_ERROR(CallNotAllowed);
AGENTGUARD_DEFINE_ERROR(StaleVersion);
AGENTGUARD_DEFINE_ERROR(Unauthorized);
AGENTGUARD_DEFINE_ERROR(Unavailable);

#undef AGENTGUARD_DEFINE_ERROR

}  // namespace agentguard
