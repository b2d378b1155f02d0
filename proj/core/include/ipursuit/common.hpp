#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ipursuit {

/// Ternary answer alphabet: -1 negative, 0 unknown, +1 positive.
using Answer = std::int8_t;

inline constexpr Answer kAnswerNegative = -1;
inline constexpr Answer kAnswerUnknown = 0;
inline constexpr Answer kAnswerPositive = 1;

inline constexpr bool is_valid_answer(int value) {
  return value == -1 || value == 0 || value == 1;
}

/// Bad input data or configuration, detected before any work starts.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while carrying out otherwise valid work (I/O, numerics, remote calls).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Remote answer service failed after retries. Retryable; never an alphabet error.
class ServiceError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace ipursuit
