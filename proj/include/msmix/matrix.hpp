// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "msmix/error.hpp"

namespace msmix {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto &row : rows) {
      if (row.size() != c)
        throw DimensionError("ragged row in Matrix::from_rows");
      std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
      ++i;
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      m(i, i) = 1.0;
    return m;
  }

  /// Single-row matrix view of a vector (used for bias / gain tensors).
  static Matrix row_vector(const Vector &v) { return Matrix(1, v.size(), v); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> &values() noexcept { return data_; }
  const std::vector<double> &values() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  Matrix &operator+=(const Matrix &o) {
    check_same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i)
      data_[i] += o.data_[i];
    return *this;
  }

  Matrix &operator*=(double s) {
    for (double &x : data_)
      x *= s;
    return *this;
  }

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  void check_same_shape(const Matrix &o, const char *op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionError(std::string("shape mismatch in Matrix ") + op);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_string(const Matrix &m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// a * b with a fixed i-k-j accumulation order, so repeated calls are bit-identical.
inline Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + shape_string(a) + " * " + shape_string(b));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j)
        out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix &m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      t(j, i) = m(i, j);
  return t;
}

/// Adds `bias` (length cols) to every row.
inline Matrix add_row_bias(Matrix m, std::span<const double> bias) {
  if (bias.size() != m.cols())
    throw DimensionError("add_row_bias: bias length " + std::to_string(bias.size()) +
                         " for " + shape_string(m));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j)
      r[j] += bias[j];
  }
  return m;
}

inline Vector column_sums(const Matrix &m) {
  Vector s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      s[j] += m(i, j);
  return s;
}

inline Matrix tanh_elementwise(Matrix m) {
  for (double &x : m.values())
    x = std::tanh(x);
  return m;
}

/// Horizontal concatenation of matrices that share a row count.
inline Matrix hconcat(std::span<const Matrix> parts) {
  if (parts.empty())
    return {};
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto &p : parts) {
    if (p.rows() != rows)
      throw DimensionError("hconcat: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t offset = 0;
    for (const auto &p : parts) {
      auto src = p.row(i);
      std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += p.cols();
    }
  }
  return out;
}

/// Columns [first, first + count) of `m`.
inline Matrix column_block(const Matrix &m, std::size_t first, std::size_t count) {
  if (first + count > m.cols())
    throw DimensionError("column_block out of range");
  Matrix out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j)
      out(i, j) = m(i, first + j);
  return out;
}

/// Rows stacked vertically; all inputs must share a column count.
inline Matrix vconcat(const Matrix &top, const Matrix &bottom) {
  if (top.empty())
    return bottom;
  if (bottom.empty())
    return top;
  if (top.cols() != bottom.cols())
    throw DimensionError("vconcat: column mismatch");
  std::vector<double> data = top.values();
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

/// Numerically stable softmax over each row (max-shifted).
inline Matrix softmax_rows(const Matrix &m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    if (in.empty())
      continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double &x : o)
      x /= sum;
  }
  return out;
}

/// Backward of softmax_rows: given the forward output and dL/d(output), returns dL/d(input).
inline Matrix softmax_rows_backward(const Matrix &probs, const Matrix &grad_out) {
  Matrix g(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < probs.cols(); ++j)
      dot += probs(i, j) * grad_out(i, j);
    for (std::size_t j = 0; j < probs.cols(); ++j)
      g(i, j) = probs(i, j) * (grad_out(i, j) - dot);
  }
  return g;
}

inline constexpr double kLayerNormEpsilon = 1e-5;

struct LayerNormResult {
  Matrix output;
  Matrix normalized; // pre-affine values
  Vector inv_std;    // per row: 1 / sqrt(var + eps)
};

/// Per-row layer normalization with population variance and a fixed variance
/// epsilon, followed by the affine map gain * x + bias.
inline LayerNormResult layer_norm_forward(const Matrix &m, std::span<const double> gain,
                                          std::span<const double> bias,
                                          double eps = kLayerNormEpsilon) {
  if (gain.size() != m.cols() || bias.size() != m.cols())
    throw DimensionError("layer_norm: gain/bias length does not match " + shape_string(m));
  LayerNormResult r{Matrix(m.rows(), m.cols()), Matrix(m.rows(), m.cols()), Vector(m.rows())};
  const double n = static_cast<double>(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    double mean = 0.0;
    for (double x : in)
      mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : in)
      var += (x - mean) * (x - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    r.inv_std[i] = inv;
    for (std::size_t j = 0; j < in.size(); ++j) {
      const double xhat = (in[j] - mean) * inv;
      r.normalized(i, j) = xhat;
      r.output(i, j) = gain[j] * xhat + bias[j];
    }
  }
  return r;
}

inline Matrix layer_norm(const Matrix &m, std::span<const double> gain, std::span<const double> bias) {
  return layer_norm_forward(m, gain, bias).output;
}

struct LayerNormGrads {
  Matrix input;
  Vector gain;
  Vector bias;
};

inline LayerNormGrads layer_norm_backward(const LayerNormResult &fwd, std::span<const double> gain,
                                          const Matrix &grad_out) {
  const std::size_t rows = grad_out.rows(), cols = grad_out.cols();
  LayerNormGrads g{Matrix(rows, cols), Vector(cols, 0.0), Vector(cols, 0.0)};
  const double n = static_cast<double>(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean_dx = 0.0, mean_dx_xhat = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double xhat = fwd.normalized(i, j);
      g.gain[j] += grad_out(i, j) * xhat;
      g.bias[j] += grad_out(i, j);
      const double dxhat = grad_out(i, j) * gain[j];
      mean_dx += dxhat;
      mean_dx_xhat += dxhat * xhat;
    }
    mean_dx /= n;
    mean_dx_xhat /= n;
    for (std::size_t j = 0; j < cols; ++j) {
      const double dxhat = grad_out(i, j) * gain[j];
      g.input(i, j) = fwd.inv_std[i] * (dxhat - mean_dx - fwd.normalized(i, j) * mean_dx_xhat);
    }
  }
  return g;
}

/// Scales every row to unit Euclidean norm; all-zero rows stay zero.
inline Matrix l2_normalize_rows(const Matrix &m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.row(i);
    double sq = 0.0;
    for (double x : r)
      sq += x * x;
    if (sq == 0.0)
      continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (double &x : r)
      x *= inv;
  }
  return out;
}

} // namespace msmix
