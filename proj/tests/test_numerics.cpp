#include <cmath>
#include <random>

#include "doctest.h"
#include "kvrecycle/error.hpp"
#include "kvrecycle/numerics.hpp"
#include "oracles.hpp"

using kvr::Matrix;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Matrix m(r, c);
  for (float& v : m.data) v = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("matmul identity and unit row") {
  const Matrix id(2, 2, {1, 0, 0, 1});
  const Matrix m(2, 2, {1, 2, 3, 4});
  CHECK(kvr::matmul(id, m) == m);

  const Matrix row(1, 2, {1, 0});
  const Matrix col(2, 1, {5, 7});
  const Matrix out = kvr::matmul(row, col);
  CHECK(out.rows == 1);
  CHECK(out.cols == 1);
  CHECK(out(0, 0) == 5.0f);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(rng, 3, 4);
    const Matrix b = random_matrix(rng, 4, 2);
    const std::vector<double> ad(a.data.begin(), a.data.end());
    const std::vector<double> bd(b.data.begin(), b.data.end());
    const auto expected = oracle::naive_matmul(ad, 3, 4, bd, 2);
    const Matrix got = kvr::matmul(a, b);
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(std::abs(got.data[i] - expected[i]) < 1e-6);
    }
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Matrix a(2, 3);
  const Matrix b(2, 2);
  try {
    kvr::matmul(a, b);
    FAIL("expected a shape error");
  } catch (const kvr::Error& e) {
    CHECK(e.kind() == kvr::ErrorKind::Shape);
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random small matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 3, 5);
    const Matrix b = random_matrix(rng, 5, 4);
    const Matrix c = random_matrix(rng, 4, 2);
    const Matrix left = kvr::matmul(kvr::matmul(a, b), c);
    const Matrix right = kvr::matmul(a, kvr::matmul(b, c));
    for (std::size_t i = 0; i < left.data.size(); ++i) {
      CHECK(std::abs(left.data[i] - right.data[i]) < 1e-4);
    }
  }
}

TEST_CASE("row_softmax examples") {
  const Matrix half = kvr::row_softmax(Matrix(1, 2, {0, 0}));
  CHECK(half(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(half(0, 1) == doctest::Approx(0.5).epsilon(1e-7));

  const Matrix big = kvr::row_softmax(Matrix(1, 3, {1000, 1000, 1000}));
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(big(0, j) - 1.0 / 3.0) < 1e-6);

  // exp(0) / (1 + 3) and exp(ln 3) / (1 + 3)
  const Matrix quarter = kvr::row_softmax(Matrix(1, 2, {0.0f, static_cast<float>(std::log(3.0))}));
  CHECK(std::abs(quarter(0, 0) - 0.25) < 1e-6);
  CHECK(std::abs(quarter(0, 1) - 0.75) < 1e-6);
}

TEST_CASE("row_softmax rows sum to one, including wide spreads") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> dist(-5000.0f, 5000.0f);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix m(4, 9);
    for (float& v : m.data) v = dist(rng);
    const Matrix s = kvr::row_softmax(m);
    CHECK(kvr::all_finite(s.data));
    for (std::size_t r = 0; r < s.rows; ++r) {
      double total = 0;
      for (float v : s.row(r)) {
        CHECK(v >= 0.0f);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("l2_normalize") {
  const std::vector<float> v{3, 4};
  const auto u = kvr::l2_normalize(v);
  CHECK(std::abs(u[0] - 0.6) < 1e-6);
  CHECK(std::abs(u[1] - 0.8) < 1e-6);

  const std::vector<float> unit{1, 0, 0};
  CHECK(kvr::l2_normalize(unit) == unit);

  const std::vector<float> zero{0, 0};
  try {
    kvr::l2_normalize(zero);
    FAIL("expected degenerate embedding");
  } catch (const kvr::Error& e) {
    CHECK(e.kind() == kvr::ErrorKind::DegenerateEmbedding);
  }
}

TEST_CASE("l2_normalize has unit norm and is idempotent") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> dist(0.0f, 10.0f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> v(1 + trial % 40);
    for (float& x : v) x = dist(rng);
    const auto once = kvr::l2_normalize(v);
    CHECK(std::abs(std::sqrt(kvr::dot(once, once)) - 1.0) < 1e-6);
    const auto twice = kvr::l2_normalize(once);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(once[i] - twice[i]) < 1e-6);
  }
}

TEST_CASE("Matrix rejects inconsistent data length") {
  CHECK_THROWS_AS(Matrix(2, 2, {1, 2, 3}), kvr::Error);
}
