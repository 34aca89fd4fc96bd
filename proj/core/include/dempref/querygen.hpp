#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dempref/belief.hpp"
#include "dempref/dynamics.hpp"

namespace dempref {

// Largest query the ranking objective accepts (5! = 120 permutations).
inline constexpr int kMaxOptions = 5;

struct Query {
  std::vector<Trajectory> trajectories;
  std::optional<int> stored_index;
  double objective_value = 0.0;

  int size() const { return static_cast<int>(trajectories.size()); }
  std::vector<Vector> phis() const;
};

struct OptBudget {
  int restarts = 8;
  int iterations = 40;
  int mc_samples = 10000;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

// Belief samples used by the objectives, one sample per row.
using WeightSamples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Draws mc_samples rows from the belief: a seeded shuffle prefix when the
// belief is at least that large, otherwise seeded draws with replacement.
// Throws EmptyBelief.
WeightSamples monte_carlo_subsample(const Belief& belief, int mc_samples, std::uint64_t seed);
WeightSamples all_samples(const Belief& belief);

// min{ E[1 - P(phi1 | w)], E[1 - P(phi2 | w)] }.
double pairwise_volume_objective(const Vector& phi1, const Vector& phi2, const WeightSamples& samples,
                                 double beta, ResponseModel model = ResponseModel::exact);
// min over all n! rankings s of E[1 - P(s | w)] under Plackett-Luce.
// Throws TooManyOptions for n > kMaxOptions.
double ranking_volume_objective(std::span<const Vector> phis, const WeightSamples& samples, double beta);
// min over options i of E[1 - P(i is picked | w)].
double pick_best_volume_objective(std::span<const Vector> phis, const WeightSamples& samples, double beta);

enum class QueryObjective { ranking, pick_best, pairwise };

struct QuerySettings {
  double beta_response = 5.0;
  QueryObjective objective = QueryObjective::ranking;
  ResponseModel pairwise_model = ResponseModel::exact;
};

double query_objective(std::span<const Vector> phis, const WeightSamples& samples, const QuerySettings& settings);

// Synthesizes an n_opt-option query maximizing the selected volume-removal
// objective. With a stored trajectory it is placed, unmodified, at index 0
// and only the remaining n_opt - 1 control sequences are optimized.
Query generate_query(const Belief& belief, const System& system, int n_opt, const Trajectory* stored,
                     const OptBudget& budget, const QuerySettings& settings = {});

// Re-evaluates a query's objective with the same Monte Carlo subsample the
// generator would draw for `budget`.
double evaluate_query(const Query& query, const Belief& belief, const OptBudget& budget,
                      const QuerySettings& settings = {});

}  // namespace dempref
