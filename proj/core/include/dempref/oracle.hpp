#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dempref/belief.hpp"
#include "dempref/dynamics.hpp"
#include "dempref/querygen.hpp"
#include "dempref/random.hpp"

namespace dempref {

enum class Responder { simulated, live };

// sigma as 0-based option indices, best first.
struct RankingResponse {
  std::vector<int> ranking;
  Responder responder = Responder::simulated;

  int top() const { return ranking.front(); }
};

// Anything that can rank a query: the simulated human below, or a live
// person behind the session service.
class RankingSource {
 public:
  virtual ~RankingSource() = default;
  virtual RankingResponse respond(const Query& query, std::uint64_t seed) = 0;
};

// Simulated responder with a hidden weight vector. w_true is rescaled to unit
// norm when its norm exceeds 1.
class SimulatedHuman final : public RankingSource {
 public:
  SimulatedHuman(Vector w_true, double beta_demo, double beta_response, bool deterministic);

  const Vector& w_true() const { return w_true_; }
  double beta_demo() const { return beta_demo_; }
  double beta_response() const { return beta_response_; }
  bool deterministic() const { return deterministic_; }

  RankingResponse respond(const Query& query, std::uint64_t seed) override;

 private:
  Vector w_true_;
  double beta_demo_;
  double beta_response_;
  bool deterministic_;
};

// Ranking by descending reward, ties to the lower index.
std::vector<int> sort_by_reward(const Vector& w, std::span<const Vector> phis);

// Sequential Plackett-Luce draw: repeatedly pick the top remaining option
// from the beta-softmax over what is left.
std::vector<int> sample_plackett_luce(const Vector& w, std::span<const Vector> phis, double beta, Rng& rng);

RankingResponse answer_ranking(const SimulatedHuman& human, const Query& query, std::uint64_t seed);

// Controls that maximize w . Phi found with the query optimizer, then
// perturbed by clipped Gaussian noise of standard deviation noise_scale.
Trajectory mpc_demonstration(const System& system, const Vector& w_true, double noise_scale, std::uint64_t seed,
                             const OptBudget& budget);

struct GradedPoolSettings {
  double noise_scale = 0.3;
  double beta_demo = 0.1;
  int posterior_samples = 1000;
  SamplerSettings sampler;
  OptBudget mpc_budget;
};

struct GradedPool {
  Trajectory low;
  Trajectory high;
  std::vector<double> scores;  // metric of each member's one-demo posterior
  int low_index = 0;
  int high_index = 0;
};

// Scores each demonstration by the cosine metric of the posterior it alone
// induces and returns the worst and best.
GradedPool grade_demonstrations(std::span<const Trajectory> pool, const Vector& w_true, std::uint64_t seed,
                                const GradedPoolSettings& settings = {});

// Generates pool_size noisy demonstrations (member i from
// derive_seed(seed, "pool", i)), scores each by the cosine metric of the
// posterior it alone induces, and returns the worst and best.
GradedPool graded_demo_pool(const System& system, const Vector& w_true, int pool_size, std::uint64_t seed,
                            const GradedPoolSettings& settings = {});

}  // namespace dempref
