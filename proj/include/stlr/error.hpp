// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stlr {

enum class ErrorKind {
  parameter,
  format,
  data,
  numerical,
  contract,
  configuration,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Base of every exception thrown by the library. The kind is what the CLI
/// reports in its machine-readable error object.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& message)
      : Error(ErrorKind::parameter, message) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message)
      : Error(ErrorKind::format, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorKind::data, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ErrorKind::numerical, message) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message)
      : Error(ErrorKind::contract, message) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& message)
      : Error(ErrorKind::configuration, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorKind::io, message) {}
};

/// A requested dimension exceeds the numerical rank of the data.
class RankError : public ParameterError {
 public:
  RankError(const std::string& message, long rank)
      : ParameterError(message), rank_(rank) {}

  long rank() const noexcept { return rank_; }

 private:
  long rank_;
};

/// alpha' * L + I is not positive definite. Carries the observed minimum
/// eigenvalue and the largest alpha' for which the matrix stays definite.
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(const std::string& message, double min_eigenvalue,
                      double max_admissible_alpha_prime)
      : NumericalError(message),
        min_eigenvalue_(min_eigenvalue),
        max_admissible_alpha_prime_(max_admissible_alpha_prime) {}

  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  double max_admissible_alpha_prime() const noexcept {
    return max_admissible_alpha_prime_;
  }

 private:
  double min_eigenvalue_;
  double max_admissible_alpha_prime_;
};

}  // namespace stlr
