#include "protopipe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protopipe/error.hpp"

namespace protopipe {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                    std::to_string(values_.size()) + " values");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorCode::kDimensionMismatch, "ragged matrix literal");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw Error(ErrorCode::kDimensionMismatch, "rows of unequal length");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Matrix(rows.size(), cols, std::move(values));
}

Vector Matrix::row_vector(std::size_t r) const {
  auto s = row(r);
  return {s.begin(), s.end()};
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "matmul " + shape(a) + " by " + shape(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Vector vecmat(std::span<const double> v, const Matrix& m) {
  if (v.size() != m.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector of length " + std::to_string(v.size()) + " by " + shape(m));
  }
  Vector out(m.cols(), 0.0);
  for (std::size_t k = 0; k < m.rows(); ++k) {
    const double vk = v[k];
    auto r = m.row(k);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += vk * r[j];
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "add " + shape(a) + " and " + shape(b));
  }
  Matrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) += b(r, c);
  return out;
}

Matrix add_row_bias(const Matrix& m, std::span<const double> bias) {
  if (bias.size() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "bias of length " + std::to_string(bias.size()) + " for " + shape(m));
  }
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) += bias[c];
  return out;
}

Matrix scale(const Matrix& m, double factor) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double& x : out.row(r)) x *= factor;
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  if (m.empty()) throw Error(ErrorCode::kEmptyInput, "softmax of an empty matrix");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& x : o) x /= total;
  }
  return out;
}

Matrix layer_norm_rows(const Matrix& m, std::span<const double> gain,
                       std::span<const double> bias, double eps) {
  if (gain.size() != m.cols() || bias.size() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "layer norm gain/bias of length " + std::to_string(gain.size()) + "/" +
                    std::to_string(bias.size()) + " for " + shape(m));
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "layer norm eps must be positive");
  Matrix out(m.rows(), m.cols());
  const double n = static_cast<double>(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    double mean = 0.0;
    for (double x : in) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : in) var += (x - mean) * (x - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = (in[c] - mean) * inv * gain[c] + bias[c];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dot of lengths " + std::to_string(a.size()) +
                                                   " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double ab = dot(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(ab / (na * nb), -1.0, 1.0);
}

Vector mean_rows(const Matrix& m) {
  if (m.rows() == 0) throw Error(ErrorCode::kEmptyInput, "mean of zero rows");
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += in[c];
  }
  for (double& x : out) x /= static_cast<double>(m.rows());
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double& x : out.row(r)) x = std::max(0.0, x);
  return out;
}

Matrix hconcat(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw Error(ErrorCode::kDimensionMismatch, "hconcat row counts differ");
    cols += b.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) out(r, offset + c) = b(r, c);
    offset += b.cols();
  }
  return out;
}

Matrix permute_rows(const Matrix& m, std::span<const std::size_t> order) {
  if (order.size() != m.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "permutation length differs from row count");
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= m.rows()) throw Error(ErrorCode::kDimensionMismatch, "permutation index out of range");
    auto src = m.row(order[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace protopipe
