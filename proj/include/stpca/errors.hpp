#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace stpca {

/// Raised when an optimizer or numerical routine produces non-finite values or
/// cannot make progress. Carries the last iterate so callers can inspect it.
class NumericalFailure : public std::runtime_error {
public:
  NumericalFailure(const std::string& what, Eigen::VectorXd last_iterate = {})
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

private:
  Eigen::VectorXd last_iterate_;
};

/// A fitted subsphere collapsed to (almost) a point, so the data cannot be
/// descended to the next nested level.
class DegenerateSubsphere : public NumericalFailure {
public:
  using NumericalFailure::NumericalFailure;
};

/// Malformed tabular input. Row and column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    std::string out = what;
    if (row > 0) {
      out += " (row " + std::to_string(row);
      if (column > 0) out += ", column " + std::to_string(column);
      out += ")";
    }
    return out;
  }

  std::size_t row_;
  std::size_t column_;
};

}  // namespace stpca
