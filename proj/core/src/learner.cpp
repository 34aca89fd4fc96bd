#include "dempref/learner.hpp"

#include "dempref/errors.hpp"
#include "dempref/metric.hpp"
#include "dempref/random.hpp"

namespace dempref {

void DemPrefConfig::validate() const {
  if (n_dem < 0) throw InvalidArgument("n_dem must be >= 0");
  if (n_queries < 0) throw InvalidArgument("n_queries must be >= 0");
  if (n_opt < 2 || n_opt > kMaxOptions)
    throw InvalidArgument("n_opt must be in [2, " + std::to_string(kMaxOptions) + "]");
  if (use_ic && n_dem < 1) throw InvalidArgument("use_ic requires n_dem >= 1");
  if (update_mode == UpdateMode::pairwise && n_opt != 2) throw InvalidArgument("pairwise updates require n_opt == 2");
  if (!(beta_demo >= 0.0)) throw InvalidArgument("beta_demo must be >= 0");
  if (!(beta_response >= 0.0)) throw InvalidArgument("beta_response must be >= 0");
  if (belief_samples < 1) throw InvalidArgument("belief_samples must be >= 1");
  budget.validate();
}

QuerySettings DemPrefConfig::query_settings() const {
  QuerySettings s;
  s.beta_response = beta_response;
  s.pairwise_model = pairwise_model;
  switch (update_mode) {
    case UpdateMode::rank:
      s.objective = QueryObjective::ranking;
      break;
    case UpdateMode::pick_best:
      s.objective = QueryObjective::pick_best;
      break;
    case UpdateMode::pairwise:
      s.objective = QueryObjective::pairwise;
      break;
  }
  return s;
}

ResponseKind DemPrefConfig::response_kind() const {
  switch (update_mode) {
    case UpdateMode::rank:
      return ResponseKind::rank;
    case UpdateMode::pick_best:
      return ResponseKind::pick_best;
    case UpdateMode::pairwise:
      return ResponseKind::pairwise;
  }
  return ResponseKind::rank;
}

StageSeeds StageSeeds::at(std::uint64_t master, int iteration) {
  const auto i = static_cast<std::uint64_t>(iteration);
  return {derive_seed(master, "optimizer", i), derive_seed(master, "responder", i), derive_seed(master, "buffer", i),
          derive_seed(master, "sampler", i + 1)};
}

std::uint64_t StageSeeds::prior(std::uint64_t master) { return derive_seed(master, "sampler", 0); }

namespace {

Evidence base_evidence(std::span<const Trajectory> demos, const DemPrefConfig& config) {
  Evidence evidence;
  evidence.beta_demo = config.beta_demo;
  evidence.beta_response = config.beta_response;
  evidence.pairwise_model = config.pairwise_model;
  for (const Trajectory& d : demos) evidence.demonstrations.push_back(d.phi);
  return evidence;
}

Belief posterior_or_prior(const Evidence& evidence, const DemPrefConfig& config, int feature_dim,
                          std::uint64_t seed) {
  if (evidence.demonstrations.empty() && evidence.responses.empty()) {
    Belief prior;
    prior.samples = sample_unit_ball(feature_dim, config.belief_samples, seed);
    prior.seed = seed;
    prior.settings = config.sampler;
    prior.evidence_digest = evidence_digest(evidence);
    prior.chains.push_back({seed, 0, config.belief_samples, 1.0, 0.0});
    return prior;
  }
  return sample_posterior(evidence, feature_dim, config.belief_samples, seed, config.sampler);
}

}  // namespace

Belief learn_prior(std::span<const Trajectory> demos, const DemPrefConfig& config, int feature_dim) {
  return posterior_or_prior(base_evidence(demos, config), config, feature_dim, StageSeeds::prior(config.seed));
}

SessionState start_session(std::span<const Trajectory> demos, const DemPrefConfig& config, int feature_dim,
                           const std::optional<Vector>& w_true) {
  config.validate();
  if (static_cast<int>(demos.size()) != config.n_dem)
    throw InvalidArgument("expected " + std::to_string(config.n_dem) + " demonstrations, got " +
                          std::to_string(demos.size()));
  SessionState state;
  state.evidence = base_evidence(demos, config);
  state.belief = learn_prior(demos, config, feature_dim);
  state.demonstrations.assign(demos.begin(), demos.end());
  state.buffer = state.demonstrations;
  if (w_true) state.initial_metric = metric_m(state.belief, *w_true);
  return state;
}

PendingQuery prepare_query(const SessionState& state, const DemPrefConfig& config, const System& system) {
  const StageSeeds seeds = StageSeeds::at(config.seed, state.iteration);
  PendingQuery pending;
  pending.iteration = state.iteration;
  pending.belief_digest = belief_digest(state.belief);

  const Trajectory* stored = nullptr;
  if (config.use_ic) {
    if (state.buffer.empty()) throw InvalidArgument("iterated correction needs a non-empty buffer");
    Rng rng = make_rng(seeds.buffer);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(state.buffer.size()) - 1);
    pending.buffer_slot = pick(rng);
    stored = &state.buffer[*pending.buffer_slot];
  }
  OptBudget budget = config.budget;
  budget.seed = seeds.optimizer;
  pending.query = generate_query(state.belief, system, config.n_opt, stored, budget, config.query_settings());
  return pending;
}

SessionState apply_response(SessionState state, const DemPrefConfig& config, const PendingQuery& pending,
                            const RankingResponse& response, const std::optional<Vector>& w_true) {
  if (pending.iteration != state.iteration)
    throw InvalidArgument("response for iteration " + std::to_string(pending.iteration) + " but session is at " +
                          std::to_string(state.iteration));
  if (!is_permutation_of_range(response.ranking, pending.query.size()))
    throw InvalidArgument("ranking is not a permutation of the query's options");

  const StageSeeds seeds = StageSeeds::at(config.seed, state.iteration);
  Response recorded;
  recorded.phis = pending.query.phis();
  recorded.ranking = response.ranking;
  recorded.kind = config.response_kind();
  state.evidence.responses.push_back(std::move(recorded));
  state.belief = posterior_or_prior(state.evidence, config, state.belief.dim(), seeds.sampler);

  if (config.use_ic && pending.buffer_slot)
    state.buffer.at(*pending.buffer_slot) = pending.query.trajectories.at(response.top());

  TraceRecord record;
  record.iteration = state.iteration;
  record.belief_digest = pending.belief_digest;
  record.query = pending.query;
  record.response = response;
  record.buffer_slot = pending.buffer_slot;
  if (w_true) record.metric = metric_m(state.belief, *w_true);
  state.trace.push_back(std::move(record));
  ++state.iteration;
  return state;
}

SessionState dempref_step(SessionState state, const DemPrefConfig& config, const System& system,
                          RankingSource& responder, const std::optional<Vector>& w_true) {
  const PendingQuery pending = prepare_query(state, config, system);
  const RankingResponse response = responder.respond(pending.query, StageSeeds::at(config.seed, state.iteration).responder);
  return apply_response(std::move(state), config, pending, response, w_true);
}

SessionState run(const DemPrefConfig& config, const System& system, std::span<const Trajectory> demos,
                 RankingSource& responder, const std::optional<Vector>& w_true, const StepCallback& on_step) {
  SessionState state = start_session(demos, config, system.spec().feature_dim, w_true);
  if (on_step) on_step(state);
  for (int q = 0; q < config.n_queries; ++q) {
    state = dempref_step(std::move(state), config, system, responder, w_true);
    if (on_step) on_step(state);
  }
  return state;
}

}  // namespace dempref
