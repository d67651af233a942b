#pragma once

#include <stdexcept>
#include <string>

namespace survbench {

// Invalid input data: malformed files, broken invariants of a dataset.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver could not produce a finite or converged result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed experiment configuration or unknown learner.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace survbench
