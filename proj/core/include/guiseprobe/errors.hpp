#pragma once

#include <stdexcept>
#include <string>

namespace gp {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad inputs: malformed files, incompatible configuration, contract
// violations on user-supplied data. CLI exit code 2.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Scoring backend failures: transport errors after retries, malformed
// responses, missing logprobs. CLI exit code 3.
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what) : Error(what) {}
};

// Training produced a non-finite loss. CLI exit code 4.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

}  // namespace gp
