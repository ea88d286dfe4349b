#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace metasynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A record or config failed its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Model output could not be parsed, even after the allowed re-ask.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems are collected and reported together.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class ProviderError : public Error {
 public:
  enum class Kind {
    retries_exhausted,
    authentication,
    script_exhausted,
    script_mismatch,
    bad_response,
    budget_exhausted,
  };

  ProviderError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Raised by topic-aware seed refresh when the pool cannot supply a seed
/// whose topic differs from the recently synthesized topics.
class TopicSaturationError : public Error {
 public:
  using Error::Error;
};

}  // namespace metasynth
