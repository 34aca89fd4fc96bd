#include "dempref/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dempref/errors.hpp"
#include "dempref/metric.hpp"
#include "dempref/optimizer.hpp"
#include "dempref/random.hpp"

namespace dempref {

SimulatedHuman::SimulatedHuman(Vector w_true, double beta_demo, double beta_response, bool deterministic)
    : w_true_(std::move(w_true)),
      beta_demo_(beta_demo),
      beta_response_(beta_response),
      deterministic_(deterministic) {
  if (w_true_.size() == 0) throw InvalidArgument("w_true must not be empty");
  if (!(beta_demo_ >= 0.0) || !(beta_response_ >= 0.0)) throw InvalidArgument("betas must be >= 0");
  const double norm = w_true_.norm();
  if (norm > 1.0) w_true_ /= norm;
}

RankingResponse SimulatedHuman::respond(const Query& query, std::uint64_t seed) {
  return answer_ranking(*this, query, seed);
}

std::vector<int> sort_by_reward(const Vector& w, std::span<const Vector> phis) {
  std::vector<double> r;
  r.reserve(phis.size());
  for (const Vector& phi : phis) r.push_back(reward(w, phi));
  std::vector<int> order(phis.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r[a] > r[b]; });
  return order;
}

std::vector<int> sample_plackett_luce(const Vector& w, std::span<const Vector> phis, double beta, Rng& rng) {
  std::vector<int> remaining(phis.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<double> z;
  for (const Vector& phi : phis) z.push_back(beta * reward(w, phi));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> ranking;
  ranking.reserve(phis.size());
  while (!remaining.empty()) {
    double hi = z[remaining.front()];
    for (int i : remaining) hi = std::max(hi, z[i]);
    std::vector<double> weights;
    double total = 0.0;
    for (int i : remaining) {
      weights.push_back(std::exp(z[i] - hi));
      total += weights.back();
    }
    const double u = unit(rng) * total;
    std::size_t pick = 0;
    double cumulative = weights[0];
    while (pick + 1 < remaining.size() && u >= cumulative) cumulative += weights[++pick];
    ranking.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<long>(pick));
  }
  return ranking;
}

RankingResponse answer_ranking(const SimulatedHuman& human, const Query& query, std::uint64_t seed) {
  const std::vector<Vector> phis = query.phis();
  RankingResponse response;
  response.responder = Responder::simulated;
  if (human.deterministic()) {
    response.ranking = sort_by_reward(human.w_true(), phis);
  } else {
    Rng rng = make_rng(seed);
    response.ranking = sample_plackett_luce(human.w_true(), phis, human.beta_response(), rng);
  }
  return response;
}

Trajectory mpc_demonstration(const System& system, const Vector& w_true, double noise_scale, std::uint64_t seed,
                             const OptBudget& budget) {
  if (!(noise_scale >= 0.0)) throw InvalidArgument("noise_scale must be >= 0");
  budget.validate();
  const SystemSpec& spec = system.spec();
  if (w_true.size() != spec.feature_dim) throw DimensionMismatch("w_true does not match the feature dimension");

  std::vector<double> lo, hi;
  for (int c = 0; c < spec.horizon; ++c)
    for (int j = 0; j < spec.control_dim; ++j) {
      lo.push_back(spec.control_lo[j]);
      hi.push_back(spec.control_hi[j]);
    }
  auto factory = [&]() -> BoxObjective {
    return [&](std::span<const double> x) { return w_true.dot(rollout_feature_sum(system, x)); };
  };
  LocalSearchOptions options;
  options.restarts = budget.restarts;
  options.iterations = budget.iterations;
  options.seed = derive_seed(seed, "mpc");
  options.threads = budget.threads;
  std::vector<double> controls = maximize_in_box(lo, hi, factory, options).x;

  if (noise_scale > 0.0) {
    Rng rng = make_rng(derive_seed(seed, "noise"));
    std::normal_distribution<double> normal(0.0, noise_scale);
    for (std::size_t i = 0; i < controls.size(); ++i) controls[i] = std::clamp(controls[i] + normal(rng), lo[i], hi[i]);
  }
  return rollout(system, std::span<const double>(controls));
}

GradedPool grade_demonstrations(std::span<const Trajectory> pool, const Vector& w_true, std::uint64_t seed,
                                const GradedPoolSettings& settings) {
  if (pool.size() < 2) throw InvalidArgument("pool_size must be >= 2");
  GradedPool out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    Evidence evidence;
    evidence.beta_demo = settings.beta_demo;
    evidence.demonstrations.push_back(pool[i].phi);
    const Belief belief = sample_posterior(evidence, static_cast<int>(w_true.size()), settings.posterior_samples,
                                           derive_seed(seed, "score"), settings.sampler);
    out.scores.push_back(metric_m(belief, w_true));
  }
  // Every member is scored with the same sampler stream, so identical
  // demonstrations score identically. First occurrence wins on ties.
  out.low_index = static_cast<int>(std::min_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
  out.high_index = static_cast<int>(std::max_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
  out.low = pool[out.low_index];
  out.high = pool[out.high_index];
  return out;
}

GradedPool graded_demo_pool(const System& system, const Vector& w_true, int pool_size, std::uint64_t seed,
                            const GradedPoolSettings& settings) {
  if (pool_size < 2) throw InvalidArgument("pool_size must be >= 2");
  std::vector<Trajectory> pool;
  pool.reserve(pool_size);
  for (int i = 0; i < pool_size; ++i)
    pool.push_back(mpc_demonstration(system, w_true, settings.noise_scale,
                                     derive_seed(seed, "pool", static_cast<std::uint64_t>(i)), settings.mpc_budget));
  return grade_demonstrations(pool, w_true, seed, settings);
}

}  // namespace dempref
