#include <gtest/gtest.h>

#include "dempref/errors.hpp"
#include "dempref/metric.hpp"

using namespace dempref;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Metric, Endpoints) {
  const Vector w = vec({0.5, -0.2, 0.2, -0.7});
  EXPECT_NEAR(convergence_metric(std::vector<Vector>{w, 3 * w}, w).m, 1.0, 1e-15);
  EXPECT_NEAR(convergence_metric(std::vector<Vector>{-w}, w).m, -1.0, 1e-15);
  EXPECT_NEAR(convergence_metric(std::vector<Vector>{vec({1, 0}), vec({0, 1})}, vec({1, 0})).m, 0.5, 1e-15);
  EXPECT_NEAR(convergence_metric(std::vector<Vector>{vec({1, 0}), vec({-1, 0})}, vec({1, 0})).m, 0.0, 1e-15);
}

TEST(Metric, IgnoresScaleOfTheTrueVector) {
  const std::vector<Vector> samples{vec({0.3, 0.4}), vec({-0.1, 0.9})};
  EXPECT_DOUBLE_EQ(convergence_metric(samples, vec({1, 2})).m, convergence_metric(samples, vec({10, 20})).m);
}

TEST(Metric, ExcludesZeroSamples) {
  const MetricResult r = convergence_metric(std::vector<Vector>{vec({0, 0}), vec({0, 2})}, vec({0, 1}));
  EXPECT_EQ(r.excluded, 1);
  EXPECT_DOUBLE_EQ(r.m, 1.0);
}

TEST(Metric, Errors) {
  EXPECT_THROW(convergence_metric(std::vector<Vector>{vec({1, 0})}, vec({0, 0})), ZeroTrueVector);
  EXPECT_THROW(convergence_metric(std::vector<Vector>{vec({0, 0})}, vec({1, 0})), EmptyBelief);
  EXPECT_THROW(convergence_metric(std::vector<Vector>{}, vec({1, 0})), EmptyBelief);
  EXPECT_THROW(convergence_metric(std::vector<Vector>{vec({1, 0, 0})}, vec({1, 0})), DimensionMismatch);
}

TEST(Metric, BeliefOverload) {
  Belief b;
  b.samples = {vec({1, 1}), vec({1, -1})};
  EXPECT_NEAR(metric_m(b, vec({1, 0})), std::sqrt(0.5), 1e-15);
}
