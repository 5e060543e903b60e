#include "xgkn/num/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xgkn/error.hpp"

namespace xgkn::num {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  require(data_.size() == rows_ * cols_, ErrorCode::kShape,
          "Matrix: value count does not match shape");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require(same_shape(other), ErrorCode::kShape,
          "Matrix +=: shape mismatch " + shape_str(*this) + " vs " + shape_str(other));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require(same_shape(other), ErrorCode::kShape,
          "Matrix -=: shape mismatch " + shape_str(*this) + " vs " + shape_str(other));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorCode::kShape,
          "matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorCode::kShape,
          "matmul_bt: shape mismatch " + shape_str(a) + " * " + shape_str(b) + "^T");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorCode::kShape,
          "matmul_at: shape mismatch " + shape_str(a) + "^T * " + shape_str(b));
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), ErrorCode::kShape, "matvec: shape mismatch");
  std::vector<double> y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * x[k];
    y[i] = s;
  }
  return y;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), ErrorCode::kShape, "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace xgkn::num
