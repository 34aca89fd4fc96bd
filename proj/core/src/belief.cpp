#include "dempref/belief.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "dempref/errors.hpp"
#include "dempref/random.hpp"

namespace dempref {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

void check_dims(const Vector& w, const Vector& phi) {
  if (w.size() != phi.size())
    throw DimensionMismatch("weight vector has " + std::to_string(w.size()) + " components, features have " +
                            std::to_string(phi.size()));
}

// Running FNV-1a over the bit patterns of numbers.
class Digest {
 public:
  void add(std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (bits >> (8 * i)) & 0xffu;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double x) { add(std::bit_cast<std::uint64_t>(x == 0.0 ? 0.0 : x)); }
  void add(const Vector& v) {
    add(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) add(v[i]);
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

void Evidence::validate() const {
  if (!(beta_demo >= 0.0)) throw InvalidArgument("beta_demo must be >= 0");
  if (!(beta_response >= 0.0)) throw InvalidArgument("beta_response must be >= 0");
  for (std::size_t r = 0; r < responses.size(); ++r) {
    const Response& resp = responses[r];
    const int n = static_cast<int>(resp.phis.size());
    if (!is_permutation_of_range(resp.ranking, n))
      throw InvalidArgument("response " + std::to_string(r) + " ranking is not a permutation of its options");
    if (resp.kind == ResponseKind::pairwise && n != 2)
      throw InvalidArgument("pairwise response " + std::to_string(r) + " must have exactly 2 options");
  }
}

bool is_permutation_of_range(std::span<const int> ranking, int n) {
  if (n < 1 || static_cast<int>(ranking.size()) != n) return false;
  std::vector<bool> seen(n, false);
  for (int idx : ranking) {
    if (idx < 0 || idx >= n || seen[idx]) return false;
    seen[idx] = true;
  }
  return true;
}

double reward(const Vector& w, const Vector& phi) {
  check_dims(w, phi);
  return w.dot(phi);
}

double demo_log_likelihood(const Vector& w, std::span<const Vector> demo_phis, double beta_demo) {
  if (demo_phis.empty()) throw EmptyEvidence("no demonstrations");
  double total = 0.0;
  for (const Vector& phi : demo_phis) total += reward(w, phi);
  return beta_demo * total;
}

double log_preference_probability(const Vector& w, const Vector& phi1, const Vector& phi2, double beta,
                                  ResponseModel model) {
  const double z1 = beta * reward(w, phi1);
  const double z2 = beta * reward(w, phi2);
  if (model == ResponseModel::approx) return std::min(0.0, z1 - z2);
  return z1 - log_add_exp(z1, z2);
}

double preference_probability(const Vector& w, const Vector& phi1, const Vector& phi2, double beta,
                              ResponseModel model) {
  return std::exp(log_preference_probability(w, phi1, phi2, beta, model));
}

double log_pick_best_probability(const Vector& w, std::span<const Vector> phis, int index, double beta) {
  const int n = static_cast<int>(phis.size());
  if (index < 0 || index >= n)
    throw IndexOutOfRange("index " + std::to_string(index) + " outside [0, " + std::to_string(n) + ")");
  double lse = kNegInf;
  double chosen = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = beta * reward(w, phis[i]);
    if (i == index) chosen = z;
    lse = log_add_exp(lse, z);
  }
  return chosen - lse;
}

double pick_best_probability(const Vector& w, std::span<const Vector> phis, int index, double beta) {
  return std::exp(log_pick_best_probability(w, phis, index, beta));
}

double log_ranking_probability(const Vector& w, std::span<const Vector> ranked_phis, double beta) {
  // Walk from the worst item up, carrying log-sum-exp of the suffix.
  double lse = kNegInf;
  double total = 0.0;
  for (auto it = ranked_phis.rbegin(); it != ranked_phis.rend(); ++it) {
    const double z = beta * reward(w, *it);
    lse = log_add_exp(lse, z);
    total += z - lse;
  }
  return total;
}

double ranking_probability(const Vector& w, std::span<const Vector> ranked_phis, double beta) {
  return std::exp(log_ranking_probability(w, ranked_phis, beta));
}

double response_log_likelihood(const Vector& w, const Response& response, double beta,
                               ResponseModel pairwise_model) {
  switch (response.kind) {
    case ResponseKind::rank: {
      double lse = kNegInf;
      double total = 0.0;
      for (auto it = response.ranking.rbegin(); it != response.ranking.rend(); ++it) {
        const double z = beta * reward(w, response.phis[*it]);
        lse = log_add_exp(lse, z);
        total += z - lse;
      }
      return total;
    }
    case ResponseKind::pick_best:
      return log_pick_best_probability(w, response.phis, response.ranking.front(), beta);
    case ResponseKind::pairwise:
      return log_preference_probability(w, response.phis[response.ranking[0]], response.phis[response.ranking[1]],
                                        beta, pairwise_model);
  }
  return 0.0;
}

double posterior_log_density(const Vector& w, const Evidence& evidence) {
  if (w.squaredNorm() > 1.0) return kNegInf;
  double lp = 0.0;
  if (!evidence.demonstrations.empty()) lp += demo_log_likelihood(w, evidence.demonstrations, evidence.beta_demo);
  for (const Response& r : evidence.responses)
    lp += response_log_likelihood(w, r, evidence.beta_response, evidence.pairwise_model);
  return lp;
}

Vector Belief::mean() const {
  if (samples.empty()) throw EmptyBelief("belief has no samples");
  Vector m = Vector::Zero(samples.front().size());
  for (const Vector& w : samples) m += w;
  return m / static_cast<double>(samples.size());
}

std::string evidence_digest(const Evidence& evidence) {
  Digest d;
  d.add(evidence.beta_demo);
  d.add(evidence.beta_response);
  d.add(static_cast<std::uint64_t>(evidence.pairwise_model));
  d.add(static_cast<std::uint64_t>(evidence.demonstrations.size()));
  for (const Vector& phi : evidence.demonstrations) d.add(phi);
  d.add(static_cast<std::uint64_t>(evidence.responses.size()));
  for (const Response& r : evidence.responses) {
    d.add(static_cast<std::uint64_t>(r.kind));
    d.add(static_cast<std::uint64_t>(r.phis.size()));
    for (const Vector& phi : r.phis) d.add(phi);
    for (int idx : r.ranking) d.add(static_cast<std::uint64_t>(idx));
  }
  return d.hex();
}

std::string belief_digest(const Belief& belief) {
  Digest d;
  d.add(belief.seed);
  d.add(static_cast<std::uint64_t>(belief.samples.size()));
  for (const Vector& w : belief.samples) d.add(w);
  return d.hex();
}

Belief sample_posterior(const Evidence& evidence, int dim, int num_samples, std::uint64_t seed,
                        const SamplerSettings& settings) {
  if (num_samples < 1) throw InvalidArgument("sample count must be >= 1");
  if (dim < 1) throw InvalidArgument("dimension must be >= 1");
  if (settings.thin < 1 || settings.burn_in < 0 || settings.adapt_window < 1)
    throw InvalidArgument("invalid sampler settings");
  evidence.validate();

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector w = Vector::Zero(dim);
  double lp = posterior_log_density(w, evidence);
  Vector proposal(dim);
  double scale = settings.initial_scale;

  auto advance = [&]() -> bool {
    for (int i = 0; i < dim; ++i) proposal[i] = w[i] + scale * normal(rng);
    const double lp_new = posterior_log_density(proposal, evidence);
    // Consume the uniform unconditionally so the stream does not depend on
    // which branch was taken.
    const double u = unit(rng);
    if (lp_new == kNegInf) return false;
    if (lp_new >= lp || std::log(u) < lp_new - lp) {
      w = proposal;
      lp = lp_new;
      return true;
    }
    return false;
  };

  int window_accepts = 0;
  for (int it = 1; it <= settings.burn_in; ++it) {
    window_accepts += advance() ? 1 : 0;
    if (it % settings.adapt_window == 0) {
      const double rate = static_cast<double>(window_accepts) / settings.adapt_window;
      scale = std::clamp(scale * std::exp(rate - settings.target_acceptance), 1e-6, 2.0);
      window_accepts = 0;
    }
  }

  Belief belief;
  belief.seed = seed;
  belief.settings = settings;
  belief.evidence_digest = evidence_digest(evidence);
  belief.samples.reserve(num_samples);
  long accepts = 0;
  const long steps = static_cast<long>(num_samples) * settings.thin;
  for (long it = 1; it <= steps; ++it) {
    accepts += advance() ? 1 : 0;
    if (it % settings.thin == 0) belief.samples.push_back(w);
  }
  const double rate = static_cast<double>(accepts) / static_cast<double>(steps);
  if (rate < settings.min_acceptance)
    throw SamplerDiverged("acceptance rate " + std::to_string(rate) + " below " +
                          std::to_string(settings.min_acceptance) + " after adaptation");
  belief.chains.push_back({seed, 0, num_samples, rate, scale});
  return belief;
}

Belief sample_posterior_chains(const Evidence& evidence, int dim, int num_samples,
                               std::span<const std::uint64_t> seeds, int threads,
                               const SamplerSettings& settings) {
  if (seeds.empty()) throw InvalidArgument("at least one chain seed is required");
  const int chains = static_cast<int>(seeds.size());
  if (num_samples < chains) throw InvalidArgument("fewer samples than chains");
  std::vector<Belief> parts(chains);
  std::vector<std::exception_ptr> errors(chains);
  auto run_chain = [&](int j) {
    const int count = num_samples / chains + (j < num_samples % chains ? 1 : 0);
    try {
      parts[j] = sample_posterior(evidence, dim, count, seeds[j], settings);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  const int workers = std::clamp(threads, 1, chains);
  if (workers == 1) {
    for (int j = 0; j < chains; ++j) run_chain(j);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (int j = t; j < chains; j += workers) run_chain(j);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Belief out;
  out.seed = seeds.front();
  out.settings = settings;
  out.evidence_digest = evidence_digest(evidence);
  for (Belief& part : parts) {
    ChainProvenance chain = part.chains.front();
    chain.first = out.size();
    out.chains.push_back(chain);
    for (Vector& w : part.samples) out.samples.push_back(std::move(w));
  }
  return out;
}

std::vector<Vector> sample_unit_ball(int dim, int num_samples, std::uint64_t seed) {
  if (dim < 1 || num_samples < 1) throw InvalidArgument("dimension and sample count must be >= 1");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(num_samples);
  while (static_cast<int>(out.size()) < num_samples) {
    Vector g(dim);
    for (int i = 0; i < dim; ++i) g[i] = normal(rng);
    const double norm = g.norm();
    const double radius = std::pow(unit(rng), 1.0 / dim);
    if (norm == 0.0) continue;
    out.push_back(g * (radius / norm));
  }
  return out;
}

}  // namespace dempref
