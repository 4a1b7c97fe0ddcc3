#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qcal/errors.hpp"
#include "qcal/qmath.hpp"
#include "qcal/random.hpp"

using namespace qcal;

namespace {

ComplexOperator random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  ComplexOperator m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = {rng.normal(), rng.normal()};
  return m;
}

// Physicists' Hermite polynomial from the explicit sum.
double hermite(int n, double y) {
  double s = 0.0;
  for (int k = 0; k <= n / 2; ++k) {
    s += std::pow(-1.0, k) * std::tgamma(n + 1) / (std::tgamma(k + 1) * std::tgamma(n - 2 * k + 1)) *
         std::pow(2.0 * y, n - 2 * k);
  }
  return s;
}

}  // namespace

TEST(Qmath, TensorProductMatchesIndexFormula) {
  const auto a = random_matrix(2, 2, 1), b = random_matrix(3, 3, 2);
  const auto t = tensor_product(a, b);
  ASSERT_EQ(t.rows(), 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) EXPECT_EQ(t(i * 3 + p, j * 3 + q), a(i, j) * b(p, q));
}

TEST(Qmath, PartialTracesOfProductOperator) {
  const auto a = random_matrix(2, 2, 3), b = random_matrix(3, 3, 4);
  const auto t = tensor_product(a, b);
  EXPECT_LT((partial_trace_first(t, 2) - a.trace() * b).norm(), 1e-12);
  EXPECT_LT((partial_trace_second(t, 3) - b.trace() * a).norm(), 1e-12);
}

TEST(Qmath, PartialTraceByLoops) {
  const auto x = random_matrix(6, 6, 5);
  ComplexOperator expect = ComplexOperator::Zero(3, 3);
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      for (int i = 0; i < 2; ++i) expect(p, q) += x(i * 3 + p, i * 3 + q);
  EXPECT_LT((partial_trace_first(x, 2) - expect).norm(), 1e-12);
  EXPECT_THROW(partial_trace_first(x, 4), DimensionMismatch);
}

TEST(Qmath, VectorizeRoundTrip) {
  const auto x = random_matrix(3, 3, 6);
  const auto v = vectorize(x);
  EXPECT_EQ(v(1 + 2 * 3), x(1, 2));
  EXPECT_EQ(unvectorize(v, 3), x);
}

TEST(Qmath, PsdPowerClipsNegativeEigenvalues) {
  ComplexOperator x = ComplexOperator::Zero(2, 2);
  x(0, 0) = 4.0;
  x(1, 1) = -1.0;
  const auto s = psd_power(x, 0.5);
  EXPECT_NEAR(s(0, 0).real(), 2.0, 1e-12);
  EXPECT_NEAR(std::abs(s(1, 1)), 0.0, 1e-12);
}

TEST(Qmath, PseudoInverseRankAndCondition) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(3, 3);
  a(0, 0) = 2.0;
  a(1, 1) = 0.5;
  auto p = pseudo_inverse(a, 1e-10);
  EXPECT_EQ(p.rank, 2);
  EXPECT_TRUE(std::isinf(p.condition_number));
  a(2, 2) = 1.0;
  p = pseudo_inverse(a, 1e-10);
  EXPECT_EQ(p.rank, 3);
  EXPECT_NEAR(p.condition_number, 4.0, 1e-12);
  EXPECT_LT((p.matrix * a - Eigen::MatrixXcd::Identity(3, 3)).norm(), 1e-12);
}

TEST(Qmath, PositivityReport) {
  ComplexOperator x = ComplexOperator::Identity(2, 2);
  x(0, 1) = {0.0, 0.5};
  const auto r = positivity_report(x);
  EXPECT_NEAR(r.max_antihermitian_deviation, 0.5, 1e-12);
  // Hermitian part [[1, i/4], [-i/4, 1]] has eigenvalues 3/4 and 5/4.
  EXPECT_NEAR(r.min_eigenvalue, 0.75, 1e-12);
}

TEST(Qmath, FockAmplitudesMatchHermiteFormula) {
  // psi_m(x) = (2/pi)^{1/4} / sqrt(2^m m!) H_m(sqrt2 x) exp(-x^2) for vacuum variance 1/4.
  for (int m = 0; m <= 8; ++m) {
    for (double x : {-2.1, -0.3, 0.0, 0.7, 1.9}) {
      const double y = std::sqrt(2.0) * x;
      const double expect = std::pow(2.0 / std::numbers::pi, 0.25) / std::sqrt(std::pow(2.0, m) * std::tgamma(m + 1)) *
                            hermite(m, y) * std::exp(-x * x);
      EXPECT_NEAR(fock_quadrature_amplitude(m, x), expect, 1e-12) << m << " " << x;
    }
  }
}

TEST(Qmath, FockAmplitudesOrthonormalWithQuadratureVariance) {
  const int M = 30;
  const double h = 1.0 / 256.0;
  std::vector<std::vector<double>> psi;
  std::vector<double> buf(M + 1);
  std::vector<double> xs;
  for (double x = -10.0; x <= 10.0; x += h) {
    fock_quadrature_amplitudes(x, buf);
    psi.push_back(buf);
    xs.push_back(x);
  }
  for (int m = 0; m <= M; m += 3) {
    for (int n = 0; n <= M; n += 5) {
      double s = 0.0, v = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        s += h * psi[i][m] * psi[i][n];
        v += h * psi[i][m] * psi[i][m] * xs[i] * xs[i];
      }
      EXPECT_NEAR(s, m == n ? 1.0 : 0.0, 1e-10);
      if (m == n) EXPECT_NEAR(v, (2.0 * m + 1.0) / 4.0, 1e-9);
    }
  }
}
