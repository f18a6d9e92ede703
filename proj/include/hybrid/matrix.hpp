#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "hybrid/errors.hpp"

namespace hybrid {

/// Dense row-major matrix of doubles. Sizes here are tiny (d < 64), so
/// everything is a straightforward loop.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  /// Copies `src` into the sub-block whose top-left corner is (r0, c0).
  void set_block(std::size_t r0, std::size_t c0, const Matrix& src);
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// y = A x
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
/// y += A x
void matvec_acc(const Matrix& a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Vertical concatenation [a; b; ...].
Matrix vstack(std::span<const Matrix> parts);

}  // namespace hybrid
