#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace steindisc {

/// A point of the integer lattice, one coordinate per axis.
using Point = std::span<const std::int64_t>;

/// Raised when an argument lies outside the mathematical domain of an operation
/// (a lattice point outside the support, a negative argument to log_gamma, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when model parameters violate the family's constraints.
class InvalidModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on API misuse (empty samples, dimension mismatch, bad method/family pairs).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a config or data file cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major matrix of integers; one observation per row.
class IntMatrix {
 public:
  IntMatrix() = default;
  IntMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  IntMatrix(std::size_t cols, std::initializer_list<std::int64_t> values)
      : cols_(cols), data_(values) {
    if (cols_ == 0 || data_.size() % cols_ != 0) {
      throw UsageError("IntMatrix: value count is not a multiple of the column count");
    }
    rows_ = data_.size() / cols_;
  }

  /// Column vector from a list of scalars (univariate samples).
  static IntMatrix column(std::span<const std::int64_t> values) {
    IntMatrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  Point row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<std::int64_t> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }

  std::int64_t operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  std::int64_t& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  void push_row(Point values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw UsageError("IntMatrix: row length mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  const std::vector<std::int64_t>& data() const noexcept { return data_; }

  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int64_t> data_;
};

}  // namespace steindisc
