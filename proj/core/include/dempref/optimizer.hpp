#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dempref {

// Objective to maximize. NaN values are treated as -inf.
using BoxObjective = std::function<double(std::span<const double>)>;
// Creates one objective instance per restart, so instances may hold caches.
using BoxObjectiveFactory = std::function<BoxObjective()>;

struct LocalSearchOptions {
  int restarts = 8;
  // Coordinate sweeps per restart.
  int iterations = 40;
  std::uint64_t seed = 0;
  // Initial probe step as a fraction of each coordinate's box width.
  double initial_step_fraction = 0.25;
  // Steps below this fraction of the box width stop being halved further and
  // end the restart once every coordinate has reached it.
  double min_step_fraction = 1e-4;
  int threads = 1;
};

struct LocalSearchResult {
  std::vector<double> x;
  double value = 0.0;
  int best_restart = -1;
  std::vector<double> restart_values;
};

// Random-restart coordinate search inside the box [lo, hi].
//
// Restart r draws a uniform starting point from its own stream
// derive_seed(seed, "restart", r). Each sweep probes every coordinate at
// x_i + step_i and x_i - step_i (clipped to the box) and moves to the better
// probe if it strictly improves the objective; otherwise step_i is halved.
// The best restart wins, ties going to the lowest restart index. Restarts run
// on up to `threads` workers with results identical to sequential execution.
// Throws OptimizerFailed if every restart ends with a NaN objective.
LocalSearchResult maximize_in_box(std::span<const double> lo, std::span<const double> hi,
                                  const BoxObjectiveFactory& make_objective, const LocalSearchOptions& options);

}  // namespace dempref
