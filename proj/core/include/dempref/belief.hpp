#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dempref/dynamics.hpp"

namespace dempref {

// Pairwise response model: the exact two-way softmax or the
// min(1, exp(beta w.(phi1 - phi2))) approximation.
enum class ResponseModel { exact, approx };

// How a recorded response enters the likelihood.
//   rank      - Plackett-Luce probability of the full ranking
//   pick_best - softmax probability of the top-ranked item only
//   pairwise  - two-item preference under a ResponseModel
enum class ResponseKind { rank, pick_best, pairwise };

// One answered query: the feature sums of the options as they were shown,
// and the ranking as option indices ordered best to worst.
struct Response {
  std::vector<Vector> phis;
  std::vector<int> ranking;
  ResponseKind kind = ResponseKind::rank;
};

struct Evidence {
  std::vector<Vector> demonstrations;  // feature sums of the demonstrations
  std::vector<Response> responses;
  double beta_demo = 0.1;
  double beta_response = 5.0;
  ResponseModel pairwise_model = ResponseModel::exact;

  // Throws InvalidArgument on malformed rankings or negative betas.
  void validate() const;
};

bool is_permutation_of_range(std::span<const int> ranking, int n);

double reward(const Vector& w, const Vector& phi);

// beta * sum_i w . phi_i. Throws EmptyEvidence on no demonstrations.
double demo_log_likelihood(const Vector& w, std::span<const Vector> demo_phis, double beta_demo);

double preference_probability(const Vector& w, const Vector& phi1, const Vector& phi2, double beta,
                              ResponseModel model = ResponseModel::exact);
double pick_best_probability(const Vector& w, std::span<const Vector> phis, int index, double beta);
// phis ordered best to worst.
double ranking_probability(const Vector& w, std::span<const Vector> ranked_phis, double beta);

// Log-space counterparts, stable for large beta * reward gaps.
double log_preference_probability(const Vector& w, const Vector& phi1, const Vector& phi2, double beta,
                                  ResponseModel model = ResponseModel::exact);
double log_pick_best_probability(const Vector& w, std::span<const Vector> phis, int index, double beta);
double log_ranking_probability(const Vector& w, std::span<const Vector> ranked_phis, double beta);

double response_log_likelihood(const Vector& w, const Response& response, double beta,
                               ResponseModel pairwise_model);

// Unnormalized log posterior under the uniform unit-ball prior; -inf outside
// the ball.
double posterior_log_density(const Vector& w, const Evidence& evidence);

struct SamplerSettings {
  int burn_in = 2000;
  int thin = 50;
  double target_acceptance = 0.23;
  double initial_scale = 0.3;
  int adapt_window = 50;
  double min_acceptance = 0.01;
};

// Settings and outcome of one Metropolis chain; samples [first, first + count)
// of the owning Belief came from this chain.
struct ChainProvenance {
  std::uint64_t seed = 0;
  int first = 0;
  int count = 0;
  double acceptance_rate = 0.0;
  double proposal_scale = 0.0;
};

struct Belief {
  std::vector<Vector> samples;
  std::uint64_t seed = 0;
  std::string evidence_digest;
  SamplerSettings settings;
  std::vector<ChainProvenance> chains;

  int size() const { return static_cast<int>(samples.size()); }
  int dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().size()); }
  Vector mean() const;
};

// Stable digest of the evidence (hex FNV-1a of its canonical JSON).
std::string evidence_digest(const Evidence& evidence);
std::string belief_digest(const Belief& belief);

// Random-walk Metropolis-Hastings on the unit ball, started at the origin.
// The isotropic Gaussian proposal scale is adapted during burn-in toward the
// target acceptance rate and frozen afterwards; every thin-th state after
// burn-in is kept. Throws SamplerDiverged if the post-burn-in acceptance rate
// falls below settings.min_acceptance.
Belief sample_posterior(const Evidence& evidence, int dim, int num_samples, std::uint64_t seed,
                        const SamplerSettings& settings = {});

// Independent chains with distinct seeds, run on up to `threads` workers and
// concatenated in seed order. Chain j contributes num_samples / seeds.size()
// samples (the first num_samples % seeds.size() chains one extra).
Belief sample_posterior_chains(const Evidence& evidence, int dim, int num_samples,
                               std::span<const std::uint64_t> seeds, int threads,
                               const SamplerSettings& settings = {});

// Exact draws from the uniform unit ball (direction from a Gaussian, radius
// U^(1/k)).
std::vector<Vector> sample_unit_ball(int dim, int num_samples, std::uint64_t seed);

}  // namespace dempref
