#pragma once

#include <stdexcept>
#include <string>

namespace maestro {

// Raised when a run configuration, checkpoint, or registry violates an invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by a caller that breaks an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retriable)
      : std::runtime_error(what), retriable_(retriable) {}
  [[nodiscard]] bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

class EmbeddingError : public std::runtime_error {
 public:
  EmbeddingError(const std::string& what, bool retriable)
      : std::runtime_error(what), retriable_(retriable) {}
  [[nodiscard]] bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

}  // namespace maestro
