#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dempref/belief.hpp"
#include "dempref/errors.hpp"
#include "dempref/random.hpp"

using namespace dempref;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::vector<Vector> random_phis(Rng& rng, int n, int k, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<Vector> phis;
  for (int i = 0; i < n; ++i) {
    Vector p(k);
    for (int j = 0; j < k; ++j) p[j] = normal(rng);
    phis.push_back(p);
  }
  return phis;
}

Vector random_in_ball(Rng& rng, int k) {
  std::normal_distribution<double> normal;
  Vector w(k);
  for (int j = 0; j < k; ++j) w[j] = normal(rng);
  return w / w.norm() * std::uniform_real_distribution<double>(0, 1)(rng);
}

// Plackett-Luce written out directly: prod_j exp(b r_j) / sum_{l >= j} exp(b r_l).
double pl_oracle(const Vector& w, const std::vector<Vector>& ranked, double beta) {
  double p = 1.0;
  for (std::size_t j = 0; j < ranked.size(); ++j) {
    double denom = 0.0;
    for (std::size_t l = j; l < ranked.size(); ++l) denom += std::exp(beta * w.dot(ranked[l]));
    p *= std::exp(beta * w.dot(ranked[j])) / denom;
  }
  return p;
}

std::vector<Vector> reorder(const std::vector<Vector>& phis, const std::vector<int>& order) {
  std::vector<Vector> out;
  for (int i : order) out.push_back(phis[i]);
  return out;
}

}  // namespace

TEST(Belief, DemoLikelihoodIsScaledRewardSum) {
  const Vector w = vec({0.5, -0.5});
  const std::vector<Vector> demos{vec({1, 2}), vec({3, -1})};
  EXPECT_DOUBLE_EQ(demo_log_likelihood(w, demos, 0.1), 0.1 * (-0.5 + 2.0));
  EXPECT_THROW(demo_log_likelihood(w, {}, 0.1), EmptyEvidence);
  EXPECT_THROW(reward(w, vec({1, 2, 3})), DimensionMismatch);
}

TEST(Belief, PairwiseModels) {
  const Vector w = vec({1, 0});
  const Vector a = vec({0.3, 5}), b = vec({0.1, -2});
  const double z = 5.0 * 0.2;
  EXPECT_NEAR(preference_probability(w, a, b, 5.0), 1.0 / (1.0 + std::exp(-z)), 1e-15);
  EXPECT_NEAR(preference_probability(w, a, b, 5.0) + preference_probability(w, b, a, 5.0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(preference_probability(w, a, b, 5.0, ResponseModel::approx), 1.0);
  EXPECT_NEAR(preference_probability(w, b, a, 5.0, ResponseModel::approx), std::exp(-z), 1e-15);
  EXPECT_NEAR(log_preference_probability(w, b, a, 5.0, ResponseModel::approx), -z, 1e-15);
}

TEST(Belief, RankingMatchesDirectProductFormula) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 4;
    const auto phis = random_phis(rng, n, 4, 1.0);
    const Vector w = random_in_ball(rng, 4);
    EXPECT_NEAR(ranking_probability(w, phis, 2.0), pl_oracle(w, phis, 2.0), 1e-12);
  }
}

TEST(Belief, PlackettLuceSumsToOneOverAllPermutations) {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto phis = random_phis(rng, 4, 4, 3.0);
    const Vector w = random_in_ball(rng, 4);
    std::vector<int> order{0, 1, 2, 3};
    double total = 0.0;
    int count = 0;
    do {
      total += ranking_probability(w, reorder(phis, order), 5.0);
      ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    EXPECT_EQ(count, 24);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Belief, PickBestMatchesSoftmaxAndSumsToOne) {
  Rng rng = make_rng(8);
  const auto phis = random_phis(rng, 5, 3, 1.0);
  const Vector w = random_in_ball(rng, 3);
  double total = 0.0, denom = 0.0;
  for (const auto& p : phis) denom += std::exp(3.0 * w.dot(p));
  for (int i = 0; i < 5; ++i) {
    const double p = pick_best_probability(w, phis, i, 3.0);
    EXPECT_NEAR(p, std::exp(3.0 * w.dot(phis[i])) / denom, 1e-14);
    total += p;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(pick_best_probability(w, phis, 5, 3.0), IndexOutOfRange);
}

TEST(Belief, TwoOptionReductionIdentities) {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto phis = random_phis(rng, 2, 4, 2.0);
    const Vector w = random_in_ball(rng, 4);
    const double beta = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
    const double pref = preference_probability(w, phis[0], phis[1], beta, ResponseModel::exact);
    EXPECT_NEAR(ranking_probability(w, phis, beta), pref, 1e-12);
    EXPECT_NEAR(pick_best_probability(w, phis, 0, beta), pref, 1e-12);
  }
}

TEST(Belief, ResponseProbabilitiesAreTranslationInvariant) {
  Rng rng = make_rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 4;
    auto phis = random_phis(rng, n, 4, 2.0);
    const Vector w = random_in_ball(rng, 4);
    const Vector shift = random_phis(rng, 1, 4, 10.0)[0];
    auto shifted = phis;
    for (auto& p : shifted) p += shift;
    EXPECT_NEAR(ranking_probability(w, phis, 5.0), ranking_probability(w, shifted, 5.0), 1e-12);
    EXPECT_NEAR(pick_best_probability(w, phis, 0, 5.0), pick_best_probability(w, shifted, 0, 5.0), 1e-12);
    for (auto model : {ResponseModel::exact, ResponseModel::approx})
      EXPECT_NEAR(preference_probability(w, phis[0], phis[1], 5.0, model),
                  preference_probability(w, shifted[0], shifted[1], 5.0, model), 1e-12);
  }
}

TEST(Belief, LogProbabilitiesStayFiniteForLargeGaps) {
  const Vector w = vec({1, 0});
  const std::vector<Vector> phis{vec({-400, 0}), vec({0, 0}), vec({400, 0})};
  const double lp = log_ranking_probability(w, phis, 5.0);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_NEAR(lp, -5.0 * 800 - 5.0 * 400, 1e-6);
  EXPECT_NEAR(log_pick_best_probability(w, phis, 2, 5.0), 0.0, 1e-12);
  EXPECT_NEAR(log_preference_probability(w, phis[0], phis[2], 5.0), -5.0 * 800, 1e-6);
}

TEST(Belief, EvidenceValidation) {
  Evidence e;
  e.responses.push_back({{vec({1, 0}), vec({0, 1})}, {0, 0}, ResponseKind::rank});
  EXPECT_THROW(e.validate(), InvalidArgument);
  e.responses.back().ranking = {1, 0};
  EXPECT_NO_THROW(e.validate());
  e.beta_response = -1;
  EXPECT_THROW(e.validate(), InvalidArgument);
  EXPECT_TRUE(is_permutation_of_range(std::vector<int>{2, 0, 1}, 3));
  EXPECT_FALSE(is_permutation_of_range(std::vector<int>{2, 0, 3}, 3));
  EXPECT_FALSE(is_permutation_of_range(std::vector<int>{0, 1}, 3));
}

TEST(Belief, PosteriorDensityIsUniformPriorTimesLikelihood) {
  Evidence e;
  e.demonstrations = {vec({1, 2})};
  e.responses.push_back({{vec({1, 0}), vec({0, 1})}, {1, 0}, ResponseKind::rank});
  const Vector w = vec({0.3, 0.4});
  const double expected = 0.1 * w.dot(vec({1, 2})) + std::log(ranking_probability(w, std::vector<Vector>{vec({0, 1}), vec({1, 0})}, 5.0));
  EXPECT_NEAR(posterior_log_density(w, e), expected, 1e-14);
  EXPECT_EQ(posterior_log_density(vec({0.8, 0.7}), e), -std::numeric_limits<double>::infinity());
}

TEST(Sampler, PriorSamplesFillTheBall) {
  // E|w| = k / (k + 1) for the uniform ball.
  const Belief prior = sample_posterior(Evidence{}, 4, 5000, 21);
  ASSERT_EQ(prior.size(), 5000);
  double mean_norm = 0.0;
  for (const auto& w : prior.samples) {
    EXPECT_LE(w.squaredNorm(), 1.0);
    mean_norm += w.norm();
  }
  EXPECT_NEAR(mean_norm / 5000, 0.8, 0.03);
  EXPECT_LT(prior.mean().norm(), 0.1);
  ASSERT_EQ(prior.chains.size(), 1u);
  EXPECT_GT(prior.chains[0].acceptance_rate, 0.1);
  EXPECT_LT(prior.chains[0].acceptance_rate, 0.4);
}

TEST(Sampler, ExactBallSamples) {
  const auto samples = sample_unit_ball(4, 20000, 3);
  double mean_norm = 0.0;
  for (const auto& w : samples) {
    EXPECT_LE(w.norm(), 1.0);
    mean_norm += w.norm();
  }
  EXPECT_NEAR(mean_norm / 20000, 0.8, 0.005);
  EXPECT_EQ(sample_unit_ball(4, 10, 3), sample_unit_ball(4, 10, 3));
}

TEST(Sampler, MatchesGridIntegrationInTwoDimensions) {
  Evidence e;
  e.beta_response = 5.0;
  e.responses.push_back({{vec({1.0, 0.2}), vec({-0.3, 0.5})}, {0, 1}, ResponseKind::rank});
  e.responses.push_back({{vec({0.1, 0.9}), vec({0.4, -0.8}), vec({0.0, 0.0})}, {0, 2, 1}, ResponseKind::rank});
  e.responses.push_back({{vec({-1.0, 0.0}), vec({0.5, 0.5})}, {1, 0}, ResponseKind::rank});

  // Posterior mean by midpoint integration on a 400 x 400 grid over the disk.
  Vector grid_mean = Vector::Zero(2);
  double mass = 0.0;
  const int n = 400;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vector w = vec({-1.0 + (i + 0.5) * 2.0 / n, -1.0 + (j + 0.5) * 2.0 / n});
      if (w.squaredNorm() > 1.0) continue;
      double lp = 0.0;
      for (const auto& r : e.responses) {
        std::vector<Vector> ranked;
        for (int idx : r.ranking) ranked.push_back(r.phis[idx]);
        lp += std::log(pl_oracle(w, ranked, e.beta_response));
      }
      const double p = std::exp(lp);
      grid_mean += p * w;
      mass += p;
    }
  grid_mean /= mass;

  const Belief belief = sample_posterior(e, 2, 4000, 77);
  const Vector mh_mean = belief.mean();
  EXPECT_GE(mh_mean.dot(grid_mean) / (mh_mean.norm() * grid_mean.norm()), 0.99);
  EXPECT_NEAR(mh_mean.norm(), grid_mean.norm(), 0.05);
}

TEST(Sampler, IsDeterministicPerSeed) {
  Evidence e;
  e.demonstrations = {vec({2, -1, 0.5})};
  const Belief a = sample_posterior(e, 3, 200, 9);
  const Belief b = sample_posterior(e, 3, 200, 9);
  const Belief c = sample_posterior(e, 3, 200, 10);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(belief_digest(a), belief_digest(b));
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.evidence_digest, evidence_digest(e));
}

TEST(Sampler, ParallelChainsMatchSequential) {
  Evidence e;
  e.demonstrations = {vec({1, 1})};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const Belief seq = sample_posterior_chains(e, 2, 100, seeds, 1);
  const Belief par = sample_posterior_chains(e, 2, 100, seeds, 3);
  EXPECT_EQ(seq.samples, par.samples);
  ASSERT_EQ(seq.chains.size(), 3u);
  EXPECT_EQ(seq.chains[0].count, 34);
  EXPECT_EQ(seq.chains[1].first, 34);
  EXPECT_EQ(seq.chains[2].count, 33);
  const Belief single = sample_posterior(e, 2, 34, 1);
  EXPECT_TRUE(std::equal(single.samples.begin(), single.samples.end(), seq.samples.begin()));
}

TEST(Sampler, ReportsDivergence) {
  SamplerSettings s;
  s.min_acceptance = 0.99;
  EXPECT_THROW(sample_posterior(Evidence{}, 2, 50, 1, s), SamplerDiverged);
}

TEST(Sampler, DigestTracksEvidence) {
  Evidence a, b;
  a.demonstrations = {vec({1, 2})};
  b.demonstrations = {vec({1, 2.0000001})};
  EXPECT_NE(evidence_digest(a), evidence_digest(b));
  EXPECT_EQ(evidence_digest(a), evidence_digest(a));
  EXPECT_EQ(evidence_digest(a).size(), 16u);
}
