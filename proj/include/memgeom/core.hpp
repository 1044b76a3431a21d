#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace memgeom {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = Vec<double>;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

/// Bad caller input: parameters out of range, malformed files, shape mismatches.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed data file; carries the 1-based row and column of the offending entry
/// (0 when the problem is not tied to a cell, e.g. a short header).
class FormatError : public InputError {
 public:
  FormatError(const std::string& what, std::size_t row, std::size_t column)
      : InputError(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// A computation produced a non-finite value or a factorization failed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

/// Squared Euclidean distance accumulated directly as sum (a_i - b_i)^2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).squaredNorm();
}

}  // namespace memgeom
