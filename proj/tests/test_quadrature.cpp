#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "lidar_bias/errors.hpp"
#include "lidar_bias/quadrature.hpp"

using namespace lidar_bias;

TEST(Quadrature, SimpsonIsExactForCubics) {
  auto f = [](double x) { return 4.0 * x * x * x - 3.0 * x * x + 2.0 * x - 1.0; };
  // antiderivative x^4 - x^3 + x^2 - x on [-1, 2]: 10 - 4 = 6
  EXPECT_NEAR(integrate_composite_simpson(f, -1.0, 2.0, 1), 6.0, 1e-13);
  EXPECT_NEAR(integrate_adaptive_simpson(f, -1.0, 2.0).value, 6.0, 1e-13);
}

TEST(Quadrature, GaussianMatchesErf) {
  auto f = [](double x) { return std::exp(-x * x); };
  const double exact = std::sqrt(std::numbers::pi) / 2.0 * (std::erf(3.0) - std::erf(-1.5));
  const auto r = integrate_adaptive_simpson(f, -1.5, 3.0, {1e-13, 8, 40});
  EXPECT_NEAR(r.value, exact, 1e-12);
  EXPECT_GT(r.evaluations, 0);
  EXPECT_LE(r.error_estimate, 1e-12);
}

TEST(Quadrature, CompositeConvergesAtFourthOrder) {
  auto f = [](double x) { return std::sin(x); };
  const double exact = 1.0 - std::cos(2.0);
  const double e1 = std::abs(integrate_composite_simpson(f, 0.0, 2.0, 8) - exact);
  const double e2 = std::abs(integrate_composite_simpson(f, 0.0, 2.0, 16) - exact);
  EXPECT_NEAR(e1 / e2, 16.0, 0.5);
}

TEST(Quadrature, RejectsEmptyIntervals) {
  auto f = [](double x) { return x; };
  EXPECT_THROW(integrate_adaptive_simpson(f, 1.0, 1.0), DomainError);
  EXPECT_THROW(integrate_adaptive_simpson(f, 2.0, 0.0), DomainError);
  EXPECT_THROW(integrate_adaptive_simpson(f, 0.0, 1.0, {1e-12, 0, 40}), DomainError);
}

TEST(Quadrature, ThrowsWithEstimateWhenDepthExhausted) {
  auto spike = [](double x) { return 1.0 / (1e-9 + x * x); };
  try {
    integrate_adaptive_simpson(spike, -1.0, 1.0, {1e-14, 2, 3});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_TRUE(std::isfinite(e.estimate()));
    EXPECT_GT(e.error_bound(), 0.0);
  }
}
