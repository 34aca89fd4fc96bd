#include <cmath>

#include <gtest/gtest.h>

#include "dempref/errors.hpp"
#include "dempref/optimizer.hpp"

using namespace dempref;

namespace {

BoxObjectiveFactory factory(BoxObjective f) {
  return [f] { return f; };
}

}  // namespace

TEST(Optimizer, FindsInteriorMaximumOfConcaveQuadratic) {
  const std::vector<double> lo{-1, -1, -1}, hi{1, 1, 1};
  auto f = [](std::span<const double> x) {
    return -std::pow(x[0] - 0.3, 2) - 2 * std::pow(x[1] + 0.6, 2) - 0.5 * std::pow(x[2], 2);
  };
  LocalSearchOptions options;
  options.restarts = 3;
  options.iterations = 60;
  const auto result = maximize_in_box(lo, hi, factory(f), options);
  EXPECT_NEAR(result.x[0], 0.3, 1e-3);
  EXPECT_NEAR(result.x[1], -0.6, 1e-3);
  EXPECT_NEAR(result.x[2], 0.0, 1e-3);
  EXPECT_NEAR(result.value, 0.0, 1e-6);
  EXPECT_EQ(result.restart_values.size(), 3u);
}

TEST(Optimizer, ReachesBoxCornersExactly) {
  const std::vector<double> lo{-1, -2}, hi{1, 0.5};
  auto f = [](std::span<const double> x) { return x[0] - x[1]; };
  const auto result = maximize_in_box(lo, hi, factory(f), {});
  EXPECT_EQ(result.x[0], 1.0);
  EXPECT_EQ(result.x[1], -2.0);
}

TEST(Optimizer, ParallelRestartsMatchSequential) {
  const std::vector<double> lo(4, -1.0), hi(4, 1.0);
  auto f = [](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::sin(3 * x[i] + static_cast<double>(i)) * x[(i + 1) % 4];
    return s;
  };
  LocalSearchOptions options;
  options.seed = 99;
  options.restarts = 5;
  const auto seq = maximize_in_box(lo, hi, factory(f), options);
  options.threads = 3;
  const auto par = maximize_in_box(lo, hi, factory(f), options);
  EXPECT_EQ(seq.x, par.x);
  EXPECT_EQ(seq.restart_values, par.restart_values);
  EXPECT_EQ(seq.best_restart, par.best_restart);
  for (double v : seq.restart_values) EXPECT_LE(v, seq.value);
}

TEST(Optimizer, TiesGoToTheLowestRestart) {
  const std::vector<double> lo{0}, hi{1};
  LocalSearchOptions options;
  options.restarts = 4;
  const auto result = maximize_in_box(lo, hi, factory([](std::span<const double>) { return 1.0; }), options);
  EXPECT_EQ(result.best_restart, 0);
}

TEST(Optimizer, NanIsWorseThanAnyNumber) {
  const std::vector<double> lo{-1}, hi{1};
  auto f = [](std::span<const double> x) { return x[0] > 0.5 ? std::nan("") : x[0]; };
  const auto result = maximize_in_box(lo, hi, factory(f), {});
  EXPECT_LE(result.x[0], 0.5);
  EXPECT_GT(result.value, 0.45);
  EXPECT_THROW(maximize_in_box(lo, hi, factory([](std::span<const double>) { return std::nan(""); }), {}),
               OptimizerFailed);
}

TEST(Optimizer, ZeroIterationsReturnsBestStart) {
  const std::vector<double> lo{-1}, hi{1};
  LocalSearchOptions options;
  options.iterations = 0;
  options.restarts = 6;
  const auto result = maximize_in_box(lo, hi, factory([](std::span<const double> x) { return x[0]; }), options);
  EXPECT_EQ(result.value, result.x[0]);
  for (double v : result.restart_values) EXPECT_LE(v, result.value);
}
