#include "dempref/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "dempref/errors.hpp"
#include "dempref/random.hpp"

namespace dempref {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sanitize(double v) { return std::isnan(v) ? kNegInf : v; }

struct RestartOutcome {
  std::vector<double> x;
  double value = kNegInf;
  bool any_finite = false;
};

RestartOutcome run_restart(std::span<const double> lo, std::span<const double> hi, const BoxObjective& objective,
                           const LocalSearchOptions& options, int restart) {
  const std::size_t dim = lo.size();
  Rng rng = make_rng(derive_seed(options.seed, "restart", static_cast<std::uint64_t>(restart)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  RestartOutcome out;
  out.x.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) out.x[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
  const double first = objective(out.x);
  out.any_finite = !std::isnan(first);
  out.value = sanitize(first);

  std::vector<double> step(dim), min_step(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    step[i] = options.initial_step_fraction * (hi[i] - lo[i]);
    min_step[i] = options.min_step_fraction * (hi[i] - lo[i]);
  }

  std::vector<double> probe = out.x;
  for (int sweep = 0; sweep < options.iterations; ++sweep) {
    bool active = false;
    for (std::size_t i = 0; i < dim; ++i) {
      if (step[i] < min_step[i]) continue;
      active = true;
      const double base = out.x[i];
      double best_value = out.value;
      double best_coord = base;
      for (double dir : {1.0, -1.0}) {
        const double candidate = std::clamp(base + dir * step[i], lo[i], hi[i]);
        if (candidate == base) continue;
        probe[i] = candidate;
        const double raw = objective(probe);
        out.any_finite = out.any_finite || !std::isnan(raw);
        const double v = sanitize(raw);
        if (v > best_value) {
          best_value = v;
          best_coord = candidate;
        }
      }
      if (best_coord != base) {
        out.x[i] = best_coord;
        out.value = best_value;
      } else {
        step[i] *= 0.5;
      }
      probe[i] = out.x[i];
    }
    if (!active) break;
  }
  return out;
}

}  // namespace

LocalSearchResult maximize_in_box(std::span<const double> lo, std::span<const double> hi,
                                  const BoxObjectiveFactory& make_objective, const LocalSearchOptions& options) {
  if (lo.size() != hi.size()) throw DimensionMismatch("box bounds differ in length");
  if (options.restarts < 1) throw InvalidArgument("restarts must be >= 1");
  if (options.iterations < 0) throw InvalidArgument("iterations must be >= 0");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw InvalidArgument("box lower bound exceeds upper bound");

  std::vector<RestartOutcome> outcomes(options.restarts);
  std::vector<std::exception_ptr> errors(options.restarts);
  auto work = [&](int r) {
    try {
      const BoxObjective objective = make_objective();
      outcomes[r] = run_restart(lo, hi, objective, options, r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const int workers = std::clamp(options.threads, 1, options.restarts);
  if (workers == 1) {
    for (int r = 0; r < options.restarts; ++r) work(r);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (int r = t; r < options.restarts; r += workers) work(r);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  LocalSearchResult result;
  result.value = kNegInf;
  bool any_finite = false;
  for (int r = 0; r < options.restarts; ++r) {
    any_finite = any_finite || outcomes[r].any_finite;
    result.restart_values.push_back(outcomes[r].value);
    if (result.best_restart < 0 || outcomes[r].value > result.value) {
      result.best_restart = r;
      result.value = outcomes[r].value;
    }
  }
  if (!any_finite) throw OptimizerFailed("every restart produced a NaN objective");
  result.x = std::move(outcomes[result.best_restart].x);
  return result;
}

}  // namespace dempref
