// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rbstokes {

// Invalid or inconsistent configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter outside the admissible set, or a degenerate geometric map.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: wrong call order, mismatched inputs, unsupported combination.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Singular reduced saddle-point system for eps = 0.
class InstabilityError : public NumericalError {
 public:
  InstabilityError(const std::string& what, double beta_n)
      : NumericalError(what), beta_n_(beta_n) {}
  double beta_n() const { return beta_n_; }

 private:
  double beta_n_;
};

// On-disk data that does not match the expected schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbstokes
