#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kvr {

/// Dense row-major float32 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  Matrix(std::size_t r, std::size_t c, std::vector<float> values);

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::string shape() const;

  bool operator==(const Matrix&) const = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// Softmax over each row, with per-row max subtraction.
Matrix row_softmax(const Matrix& m);

/// In-place softmax of a single row.
void softmax_inplace(std::span<float> row);

/// Dot product accumulated in double precision.
double dot(std::span<const float> a, std::span<const float> b);

/// Throws ErrorKind::DegenerateEmbedding on a zero (or non-finite) norm.
std::vector<float> l2_normalize(std::span<const float> v);

/// y[j] = bias[j] + sum_i x[i] * w(i, j), one row at a time with double
/// accumulation. Each output row depends only on its own input row, so the
/// result for a row is bit-identical however many rows are batched together.
Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> bias);

bool all_finite(std::span<const float> v);

}  // namespace kvr
