// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dmgnn/error.hpp"

namespace dmgnn {

/// Dense row-major matrix of doubles. Row vectors are 1×n.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
      throw DimensionError("matrix " + std::to_string(r) + "x" + std::to_string(c) + " given " +
                           std::to_string(data.size()) + " values");
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> init) {
    Matrix m;
    m.rows = init.size();
    m.cols = m.rows == 0 ? 0 : init.begin()->size();
    for (const auto& row : init) {
      if (row.size() != m.cols) throw DimensionError("ragged matrix literal");
      m.data.insert(m.data.end(), row.begin(), row.end());
    }
    return m;
  }
  static Matrix row_vector(std::initializer_list<double> v) { return Matrix(1, v.size(), std::vector<double>(v)); }
  static Matrix row_vector(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] bool empty() const { return data.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  [[nodiscard]] bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  [[nodiscard]] std::string shape_str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }

  [[nodiscard]] bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Matrix&) const = default;
};

/// A named trainable value with its accumulated gradient.
struct Tensor {
  Matrix value;
  Matrix grad;

  Tensor() = default;
  explicit Tensor(Matrix v) : value(std::move(v)), grad(value.rows, value.cols) {}

  [[nodiscard]] std::size_t rows() const { return value.rows; }
  [[nodiscard]] std::size_t cols() const { return value.cols; }
  void zero_grad() { grad = Matrix(value.rows, value.cols); }
};

namespace linalg {

// out (+)= a * b
inline void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out, bool accumulate) {
  if (!accumulate) out.fill(0.0);
  const std::size_t m = a.rows, k = a.cols, n = b.cols;
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data.data() + i * n;
    const double* arow = a.data.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out += a * bᵀ
inline void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t m = a.rows, k = a.cols, n = b.rows;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      out.data[i * n + j] += s;
    }
  }
}

// out += aᵀ * b
inline void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t k = a.rows, m = a.cols, n = b.cols;
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.data.data() + p * m;
    const double* brow = b.data.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: " + a.shape_str() + " x " + b.shape_str());
  Matrix out(a.rows, b.cols);
  gemm_nn(a, b, out, true);
  return out;
}

inline void axpy(double alpha, const Matrix& x, Matrix& y) {
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace linalg
}  // namespace dmgnn
