#include "kvrecycle/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "kvrecycle/error.hpp"

namespace kvr {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw Error(ErrorKind::Shape, "matrix " + shape() + " built from " +
                                      std::to_string(data.size()) + " values");
  }
}

std::string Matrix::shape() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw Error(ErrorKind::Shape, "matmul " + a.shape() + " x " + b.shape());
  }
  return linear(a, b, {});
}

Matrix linear(const Matrix& x, const Matrix& w, std::span<const float> bias) {
  if (x.cols != w.rows) {
    throw Error(ErrorKind::Shape, "linear " + x.shape() + " x " + w.shape());
  }
  if (!bias.empty() && bias.size() != w.cols) {
    throw Error(ErrorKind::Shape, "bias of length " + std::to_string(bias.size()) +
                                      " for weight " + w.shape());
  }
  Matrix out(x.rows, w.cols);
  std::vector<double> acc(w.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    if (bias.empty()) {
      std::fill(acc.begin(), acc.end(), 0.0);
    } else {
      std::copy(bias.begin(), bias.end(), acc.begin());
    }
    const float* xr = x.data.data() + r * x.cols;
    for (std::size_t i = 0; i < x.cols; ++i) {
      const double xi = xr[i];
      const float* wr = w.data.data() + i * w.cols;
      for (std::size_t j = 0; j < w.cols; ++j) acc[j] += xi * wr[j];
    }
    float* o = out.data.data() + r * out.cols;
    for (std::size_t j = 0; j < w.cols; ++j) o[j] = static_cast<float>(acc[j]);
  }
  return out;
}

void softmax_inplace(std::span<float> row) {
  if (row.empty()) return;
  const float peak = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (float& v : row) {
    v = std::exp(v - peak);
    total += v;
  }
  for (float& v : row) v = static_cast<float>(v / total);
}

Matrix row_softmax(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows; ++r) softmax_inplace(out.row(r));
  return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::Shape, "dot of lengths " + std::to_string(a.size()) + " and " +
                                      std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

std::vector<float> l2_normalize(std::span<const float> v) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorKind::DegenerateEmbedding,
                "cannot normalize a vector of norm " + std::to_string(norm));
  }
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace kvr
