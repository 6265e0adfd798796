// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "reference.hpp"
#include "test_util.hpp"

using namespace msmix;
using msmix::testing::random_matrix;

TEST(Matmul, IdentityAndZero) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Matrix::identity(2), a), a);
  EXPECT_EQ(matmul(a, Matrix(2, 2)), Matrix(2, 2));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  const Matrix a = random_matrix(2, 3, rng), b = random_matrix(3, 2, rng);
  const Matrix c = matmul(a, b);
  const auto expect = ref::matmul(ref::to_rows(a), ref::to_rows(b));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_LT(std::abs(c(i, j) - expect[i][j]), 1e-12);
}

TEST(Matmul, BitIdenticalOnRepeat) {
  Rng rng(3);
  const Matrix a = random_matrix(17, 9, rng), b = random_matrix(9, 13, rng);
  EXPECT_EQ(matmul(a, b).values(), matmul(a, b).values());
}

TEST(Matmul, DimensionMismatchThrows) { EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError); }

TEST(Matrix, RejectsWrongDataLength) { EXPECT_THROW(Matrix(2, 2, Vector{1, 2, 3}), DimensionError); }

TEST(SoftmaxRows, KnownRows) {
  const Matrix s = softmax_rows(Matrix::from_rows({{0, 0}, {5, 5}}));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(1, 1), 0.5);
  for (double c : {-40.0, 0.0, 3.5, 700.0}) {
    const Matrix t = softmax_rows(Matrix::from_rows({{c, c, c}}));
    for (double x : t.values())
      EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  }
  // Direct exp/sum evaluation.
  const Matrix u = softmax_rows(Matrix::from_rows({{1, 2, 3}}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(u(0, 0), std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(u(0, 1), std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(u(0, 2), std::exp(3.0) / z, 1e-15);
  EXPECT_NEAR(u(0, 2), 0.6652409557748218, 1e-15);
}

TEST(SoftmaxRows, RowsSumToOneAndShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix m = random_matrix(4, 7, rng, 10.0);
    const Matrix s = softmax_rows(m);
    Matrix shifted = m;
    const double c = rng.uniform(-50, 50);
    for (double &x : shifted.row(2))
      x += c;
    const Matrix s2 = softmax_rows(shifted);
    for (std::size_t i = 0; i < 4; ++i) {
      double sum = 0.0;
      for (double x : s.row(i)) {
        sum += x;
        EXPECT_GT(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
      EXPECT_LT(std::abs(sum - 1.0), 1e-12);
    }
    for (std::size_t j = 0; j < 7; ++j)
      EXPECT_NEAR(s(2, j), s2(2, j), 1e-12);
  }
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  const Vector g{1, 1, 1}, b{0, 0, 0};
  const Matrix out = layer_norm(Matrix::from_rows({{4, 4, 4}}), g, b);
  for (double x : out.values())
    EXPECT_EQ(x, 0.0);
}

TEST(LayerNorm, AlreadyNormalizedRow) {
  const Vector g{1, 1}, b{0, 0};
  const Matrix out = layer_norm(Matrix::from_rows({{1, -1}}), g, b);
  // The variance epsilon shifts the result by 1/sqrt(1 + 1e-5) - 1 ~ -5e-6.
  EXPECT_NEAR(out(0, 0), 1.0, 1e-5);
  EXPECT_NEAR(out(0, 1), -1.0, 1e-5);
  EXPECT_NEAR(out(0, 0), 1.0 / std::sqrt(1.0 + 1e-5), 1e-15);
}

TEST(LayerNorm, MomentsMatchDirectFormula) {
  Rng rng(8);
  const std::size_t d = 9;
  const Vector g(d, 1.0), b(d, 0.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_matrix(3, d, rng, 3.0);
    const Matrix out = layer_norm(m, g, b);
    for (std::size_t i = 0; i < 3; ++i) {
      double mean = 0.0, var = 0.0;
      for (double x : m.row(i))
        mean += x;
      mean /= d;
      for (double x : m.row(i))
        var += (x - mean) * (x - mean);
      var /= d;
      double om = 0.0, ov = 0.0;
      for (double x : out.row(i))
        om += x;
      om /= d;
      for (double x : out.row(i))
        ov += (x - om) * (x - om);
      ov /= d;
      EXPECT_LT(std::abs(om), 1e-10);
      EXPECT_LT(std::abs(ov - var / (var + kLayerNormEpsilon)), 1e-10);
    }
  }
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  Rng rng(21);
  const Matrix x = random_matrix(3, 5, rng);
  const Vector gain = msmix::testing::random_vector(5, rng, 0.5, 1.5);
  const Vector bias = msmix::testing::random_vector(5, rng);
  const Matrix weight = random_matrix(3, 5, rng);
  auto loss = [&](std::span<const double> v) {
    const Matrix out = layer_norm(Matrix(3, 5, Vector(v.begin(), v.end())), gain, bias);
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k)
      s += out.values()[k] * weight.values()[k];
    return s;
  };
  const auto fwd = layer_norm_forward(x, gain, bias);
  const auto g = layer_norm_backward(fwd, gain, weight);
  const Vector num = finite_diff_grad(loss, x.values());
  EXPECT_LT(relative_error(g.input.values(), num), 1e-7);
}

TEST(L2Normalize, KnownRowsAndZeroRow) {
  const Matrix out = l2_normalize_rows(Matrix::from_rows({{3, 4}, {0, 0}, {1, 0}}));
  EXPECT_NEAR(out(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.8, 1e-15);
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_EQ(out(1, 1), 0.0);
  EXPECT_EQ(out(2, 0), 1.0);
}

TEST(L2Normalize, UnitNormsAndIdempotent) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix m = random_matrix(6, 5, rng, rng.uniform(0.01, 100.0));
    const Matrix once = l2_normalize_rows(m);
    const Matrix twice = l2_normalize_rows(once);
    for (std::size_t i = 0; i < 6; ++i) {
      double sq = 0.0;
      for (double x : once.row(i))
        sq += x * x;
      EXPECT_LT(std::abs(std::sqrt(sq) - 1.0), 1e-12);
    }
    EXPECT_LT(msmix::testing::max_abs_diff(once.values(), twice.values()), 1e-12);
  }
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformOpenIntervalAndIndexRange) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.index(7), 7u);
  }
  EXPECT_THROW(rng.index(0), ValueError);
}

TEST(SampleBeta, RangeMeanAndDeterminism) {
  Rng rng(2024);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_beta(rng, kDefaultAlpha);
    ASSERT_GE(x, 0.0);
    ASSERT_LE(x, 1.0);
    sum += x;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);

  Rng a(5), b(5);
  for (int i = 0; i < 50; ++i)
    EXPECT_EQ(sample_beta(a, 2.0), sample_beta(b, 2.0));
}

TEST(SampleBeta, VarianceMatchesSymmetricBeta) {
  // Var of Beta(a, a) is 1 / (4 (2a + 1)).
  for (double alpha : {0.5, 2.0, 5.0}) {
    Rng rng(77);
    const int n = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = sample_beta(rng, alpha);
      s += x;
      s2 += x * x;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, 0.5, 0.01) << alpha;
    EXPECT_NEAR(var, 1.0 / (4.0 * (2.0 * alpha + 1.0)), 0.003) << alpha;
  }
}

TEST(SampleBeta, RejectsNonPositiveAlpha) {
  Rng rng(0);
  EXPECT_THROW(sample_beta(rng, 0.0), ValueError);
  EXPECT_THROW(sample_beta(rng, -1.0), ValueError);
}

TEST(FiniteDiff, PolynomialAndConstant) {
  const Vector g = finite_diff_grad([](std::span<const double> p) { return p[0] * p[0]; }, Vector{3.0});
  EXPECT_NEAR(g[0], 6.0, 1e-6);
  const Vector z = finite_diff_grad([](std::span<const double>) { return 4.2; }, Vector{1.0, -2.0, 0.5});
  for (double x : z)
    EXPECT_EQ(x, 0.0);
  EXPECT_THROW(finite_diff_grad([](std::span<const double>) { return 0.0; }, Vector{1.0}, 0.0), ValueError);
}
