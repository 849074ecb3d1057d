#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace oodselect;
using oodselect::testing::reference_probit;

TEST(Probit, MedianIsZero) { EXPECT_DOUBLE_EQ(probit(0.5, 1e-3), 0.0); }

TEST(Probit, MatchesBisectionOracle) {
  EXPECT_NEAR(probit(0.975, 1e-3), reference_probit(0.975), 1e-9);
  EXPECT_NEAR(probit(0.975, 1e-3), 1.959964, 1e-6);
  for (double p = 0.001; p < 1.0; p += 0.0137) EXPECT_NEAR(inverse_normal_cdf(p), reference_probit(p), 1e-9) << p;
  for (double p : {1e-10, 1e-6, 0.02425, 0.97575, 1 - 1e-6})
    EXPECT_NEAR(inverse_normal_cdf(p), reference_probit(p), 1e-8 * std::max(1.0, std::abs(reference_probit(p))));
}

TEST(Probit, ClipsSaturatedAccuracies) {
  EXPECT_EQ(probit(1.0, 1e-3), probit(0.999, 1e-3));
  EXPECT_EQ(probit(0.0, 1e-3), probit(0.001, 1e-3));
  EXPECT_EQ(probit(0.9995, 1e-3), probit(0.999, 1e-3));
}

TEST(Probit, RejectsBadArguments) {
  EXPECT_THROW(probit(0.5, 0.0), Error);
  EXPECT_THROW(probit(0.5, 0.5), Error);
  EXPECT_THROW(probit(1.5, 1e-3), Error);
  EXPECT_THROW(probit(-0.1, 1e-3), Error);
}

TEST(ProbitProperty, OddSymmetryAndMonotone) {
  constexpr double eps = 1e-3;
  double prev = -1e300;
  for (int k = 0; k <= 2000; ++k) {
    const double p = eps + (1 - 2 * eps) * k / 2000.0;
    EXPECT_NEAR(probit(p, eps) + probit(1 - p, eps), 0.0, 1e-9);
    const double v = probit(p, eps);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(ProbitProperty, DerivativeMatchesDifferences) {
  for (double p : {0.01, 0.2, 0.5, 0.77, 0.98}) {
    const double h = 1e-6;
    const double fd = (probit(p + h) - probit(p - h)) / (2 * h);
    EXPECT_NEAR(probit_derivative(p), fd, 1e-5 * fd);
  }
  EXPECT_EQ(probit_derivative(0.0005), 0.0);
  EXPECT_EQ(probit_derivative(0.9999), 0.0);
}
