#pragma once

// Small dense linear algebra used by the embedder, the prototype adapter and
// the cosine classifier. Row-major, double precision, no external BLAS.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace protopipe {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  Vector row_vector(std::size_t r) const;

  const std::vector<double>& values() const noexcept { return values_; }

  Matrix transpose() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Throws Error(kDimensionMismatch) when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);

// Row vector times matrix: returns v * m (length m.cols()).
Vector vecmat(std::span<const double> v, const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);

// Adds `bias` to every row.
Matrix add_row_bias(const Matrix& m, std::span<const double> bias);

Matrix scale(const Matrix& m, double factor);

// Numerically stable row-wise softmax (max subtraction).
Matrix softmax_rows(const Matrix& m);

// Per-row normalization with population variance and eps inside the sqrt,
// followed by an elementwise affine map.
Matrix layer_norm_rows(const Matrix& m, std::span<const double> gain,
                       std::span<const double> bias, double eps);

/// Cosine of the angle between `a` and `b`. Returns 0 when either norm is
/// below 1e-12 so degenerate embeddings never produce NaN.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Column-wise arithmetic mean. Throws Error(kEmptyInput) for zero rows.
Vector mean_rows(const Matrix& m);

Matrix relu(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// Concatenates matrices with equal row counts side by side.
Matrix hconcat(const std::vector<Matrix>& blocks);

// Returns the rows of `m` reordered so that output row i is m.row(order[i]).
Matrix permute_rows(const Matrix& m, std::span<const std::size_t> order);

}  // namespace protopipe
