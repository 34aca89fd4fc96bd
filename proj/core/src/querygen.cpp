#include "dempref/querygen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "dempref/errors.hpp"
#include "dempref/optimizer.hpp"
#include "dempref/random.hpp"

namespace dempref {

namespace {

using Matrix = Eigen::MatrixXd;

// Items whose scaled reward trails the best by more than this may underflow
// in the shared-max exponentials, so the sample falls back to log space.
constexpr double kFastPathGap = 600.0;

Matrix stack_phis(std::span<const Vector> phis, int dim) {
  Matrix m(dim, static_cast<Eigen::Index>(phis.size()));
  for (std::size_t j = 0; j < phis.size(); ++j) {
    if (phis[j].size() != dim)
      throw DimensionMismatch("query features have " + std::to_string(phis[j].size()) +
                              " components, belief samples have " + std::to_string(dim));
    m.col(static_cast<Eigen::Index>(j)) = phis[j];
  }
  return m;
}

// Scaled rewards beta * w_s . phi_j, one row per belief sample.
Matrix scaled_rewards(std::span<const Vector> phis, const WeightSamples& samples, double beta) {
  if (samples.rows() == 0) throw EmptyBelief("no belief samples");
  return beta * (samples * stack_phis(phis, static_cast<int>(samples.cols())));
}

// Accumulates the Plackett-Luce probability of every ranking, enumerated in
// lexicographic order of the ranked option indices.
class RankingAccumulator {
 public:
  explicit RankingAccumulator(int n) : n_(n) {
    int f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    totals_.assign(f, 0.0);
  }

  void add_sample(const double* z) {
    double hi = z[0], lo = z[0];
    for (int i = 1; i < n_; ++i) {
      hi = std::max(hi, z[i]);
      lo = std::min(lo, z[i]);
    }
    const int full = (1 << n_) - 1;
    leaf_ = 0;
    if (hi - lo < kFastPathGap) {
      std::array<double, kMaxOptions> e{};
      for (int i = 0; i < n_; ++i) e[i] = std::exp(z[i] - hi);
      for (int mask = 1; mask <= full; ++mask) {
        double s = 0.0;
        for (int i = 0; i < n_; ++i)
          if (mask & (1 << i)) s += e[i];
        mask_norm_[mask] = s;
      }
      descend_linear(e.data(), full, 1.0);
    } else {
      for (int mask = 1; mask <= full; ++mask) {
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_; ++i)
          if (mask & (1 << i)) m = std::max(m, z[i]);
        double s = 0.0;
        for (int i = 0; i < n_; ++i)
          if (mask & (1 << i)) s += std::exp(z[i] - m);
        mask_norm_[mask] = m + std::log(s);
      }
      descend_log(z, full, 0.0);
    }
  }

  const std::vector<double>& totals() const { return totals_; }

 private:
  void descend_linear(const double* e, int mask, double prob) {
    const double norm = mask_norm_[mask];
    for (int i = 0; i < n_; ++i) {
      if (!(mask & (1 << i))) continue;
      const double p = prob * (e[i] / norm);
      const int rest = mask & ~(1 << i);
      if (rest == 0)
        totals_[leaf_++] += p;
      else
        descend_linear(e, rest, p);
    }
  }

  void descend_log(const double* z, int mask, double log_prob) {
    const double norm = mask_norm_[mask];
    for (int i = 0; i < n_; ++i) {
      if (!(mask & (1 << i))) continue;
      const double lp = log_prob + (z[i] - norm);
      const int rest = mask & ~(1 << i);
      if (rest == 0)
        totals_[leaf_++] += std::exp(lp);
      else
        descend_log(z, rest, lp);
    }
  }

  int n_;
  int leaf_ = 0;
  std::array<double, 1 << kMaxOptions> mask_norm_{};
  std::vector<double> totals_;
};

}  // namespace

std::vector<Vector> Query::phis() const {
  std::vector<Vector> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) out.push_back(t.phi);
  return out;
}

void OptBudget::validate() const {
  if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (mc_samples < 1) throw InvalidArgument("mc_samples must be >= 1");
}

WeightSamples monte_carlo_subsample(const Belief& belief, int mc_samples, std::uint64_t seed) {
  if (belief.samples.empty()) throw EmptyBelief("belief has no samples");
  if (mc_samples < 1) throw InvalidArgument("mc_samples must be >= 1");
  const int available = belief.size();
  const int dim = belief.dim();
  Rng rng = make_rng(seed);
  std::vector<int> picks;
  if (available >= mc_samples) {
    picks.resize(available);
    std::iota(picks.begin(), picks.end(), 0);
    // Partial Fisher-Yates: the first mc_samples entries are the draw.
    for (int i = 0; i < mc_samples; ++i) {
      std::uniform_int_distribution<int> pick(i, available - 1);
      std::swap(picks[i], picks[pick(rng)]);
    }
    picks.resize(mc_samples);
  } else {
    std::uniform_int_distribution<int> pick(0, available - 1);
    picks.resize(mc_samples);
    for (int& p : picks) p = pick(rng);
  }
  WeightSamples out(mc_samples, dim);
  for (int r = 0; r < mc_samples; ++r) out.row(r) = belief.samples[picks[r]].transpose();
  return out;
}

WeightSamples all_samples(const Belief& belief) {
  if (belief.samples.empty()) throw EmptyBelief("belief has no samples");
  WeightSamples out(belief.size(), belief.dim());
  for (int r = 0; r < belief.size(); ++r) out.row(r) = belief.samples[r].transpose();
  return out;
}

double pairwise_volume_objective(const Vector& phi1, const Vector& phi2, const WeightSamples& samples, double beta,
                                 ResponseModel model) {
  const std::array<Vector, 2> phis{phi1, phi2};
  const Matrix z = scaled_rewards(phis, samples, beta);
  double removed1 = 0.0, removed2 = 0.0;
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    const double d = z(s, 0) - z(s, 1);
    double p1, p2;
    if (model == ResponseModel::approx) {
      p1 = std::min(1.0, std::exp(d));
      p2 = std::min(1.0, std::exp(-d));
    } else {
      // Logistic of d, evaluated on the non-overflowing side.
      const double e = std::exp(-std::abs(d));
      const double big = 1.0 / (1.0 + e);
      const double small = e / (1.0 + e);
      p1 = d >= 0 ? big : small;
      p2 = d >= 0 ? small : big;
    }
    removed1 += 1.0 - p1;
    removed2 += 1.0 - p2;
  }
  const double count = static_cast<double>(z.rows());
  return std::min(removed1 / count, removed2 / count);
}

double ranking_volume_objective(std::span<const Vector> phis, const WeightSamples& samples, double beta) {
  const int n = static_cast<int>(phis.size());
  if (n > kMaxOptions)
    throw TooManyOptions(std::to_string(n) + " options exceeds the limit of " + std::to_string(kMaxOptions));
  if (n < 2) throw InvalidArgument("a query needs at least 2 options");
  const Matrix z = scaled_rewards(phis, samples, beta);
  RankingAccumulator acc(n);
  std::array<double, kMaxOptions> row{};
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    for (int j = 0; j < n; ++j) row[j] = z(s, j);
    acc.add_sample(row.data());
  }
  const double best = *std::max_element(acc.totals().begin(), acc.totals().end());
  return 1.0 - best / static_cast<double>(z.rows());
}

double pick_best_volume_objective(std::span<const Vector> phis, const WeightSamples& samples, double beta) {
  const int n = static_cast<int>(phis.size());
  if (n < 2) throw InvalidArgument("a query needs at least 2 options");
  const Matrix z = scaled_rewards(phis, samples, beta);
  std::vector<double> totals(n, 0.0);
  for (Eigen::Index s = 0; s < z.rows(); ++s) {
    const double hi = z.row(s).maxCoeff();
    double norm = 0.0;
    for (int j = 0; j < n; ++j) norm += std::exp(z(s, j) - hi);
    for (int j = 0; j < n; ++j) totals[j] += std::exp(z(s, j) - hi) / norm;
  }
  const double best = *std::max_element(totals.begin(), totals.end());
  return 1.0 - best / static_cast<double>(z.rows());
}

double query_objective(std::span<const Vector> phis, const WeightSamples& samples, const QuerySettings& settings) {
  switch (settings.objective) {
    case QueryObjective::ranking:
      return ranking_volume_objective(phis, samples, settings.beta_response);
    case QueryObjective::pick_best:
      return pick_best_volume_objective(phis, samples, settings.beta_response);
    case QueryObjective::pairwise:
      if (phis.size() != 2) throw InvalidArgument("pairwise objective needs exactly 2 options");
      return pairwise_volume_objective(phis[0], phis[1], samples, settings.beta_response, settings.pairwise_model);
  }
  return 0.0;
}

Query generate_query(const Belief& belief, const System& system, int n_opt, const Trajectory* stored,
                     const OptBudget& budget, const QuerySettings& settings) {
  budget.validate();
  if (n_opt < 2) throw InvalidArgument("n_opt must be >= 2");
  if (settings.objective == QueryObjective::ranking && n_opt > kMaxOptions)
    throw TooManyOptions(std::to_string(n_opt) + " options exceeds the limit of " + std::to_string(kMaxOptions));
  if (settings.objective == QueryObjective::pairwise && n_opt != 2)
    throw InvalidArgument("pairwise objective needs n_opt == 2");
  const SystemSpec& spec = system.spec();
  if (stored && stored->phi.size() != spec.feature_dim)
    throw DimensionMismatch("stored trajectory does not belong to this system");

  const WeightSamples samples = monte_carlo_subsample(belief, budget.mc_samples, derive_seed(budget.seed, "mc"));
  const int offset = stored ? 1 : 0;
  const int free_count = n_opt - offset;
  const int block = spec.decision_dim();

  std::vector<double> lo, hi;
  for (int f = 0; f < free_count; ++f)
    for (int c = 0; c < spec.horizon; ++c)
      for (int j = 0; j < spec.control_dim; ++j) {
        lo.push_back(spec.control_lo[j]);
        hi.push_back(spec.control_hi[j]);
      }

  // Each objective instance caches per-block feature sums, so a coordinate
  // probe re-simulates only the trajectory it touches.
  auto factory = [&]() -> BoxObjective {
    struct Cache {
      std::vector<double> x;
      std::vector<Vector> phis;
    };
    auto cache = std::make_shared<Cache>();
    cache->phis.resize(n_opt);
    if (stored) cache->phis[0] = stored->phi;
    return [&, cache](std::span<const double> x) {
      const bool fresh = cache->x.empty();
      for (int f = 0; f < free_count; ++f) {
        const auto block_x = x.subspan(static_cast<std::size_t>(f) * block, block);
        if (fresh || !std::equal(block_x.begin(), block_x.end(), cache->x.begin() + static_cast<long>(f) * block))
          cache->phis[offset + f] = rollout_feature_sum(system, block_x);
      }
      cache->x.assign(x.begin(), x.end());
      return query_objective(cache->phis, samples, settings);
    };
  };

  LocalSearchOptions options;
  options.restarts = budget.restarts;
  options.iterations = budget.iterations;
  options.seed = derive_seed(budget.seed, "optimizer");
  options.threads = budget.threads;
  const LocalSearchResult best = maximize_in_box(lo, hi, factory, options);

  Query query;
  if (stored) {
    query.trajectories.push_back(*stored);
    query.stored_index = 0;
  }
  for (int f = 0; f < free_count; ++f)
    query.trajectories.push_back(
        rollout(system, std::span<const double>(best.x).subspan(static_cast<std::size_t>(f) * block, block)));
  query.objective_value = query_objective(query.phis(), samples, settings);
  return query;
}

double evaluate_query(const Query& query, const Belief& belief, const OptBudget& budget,
                      const QuerySettings& settings) {
  const WeightSamples samples = monte_carlo_subsample(belief, budget.mc_samples, derive_seed(budget.seed, "mc"));
  return query_objective(query.phis(), samples, settings);
}

}  // namespace dempref
