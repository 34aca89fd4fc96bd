#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dempref/belief.hpp"
#include "dempref/dynamics.hpp"
#include "dempref/oracle.hpp"
#include "dempref/querygen.hpp"

namespace dempref {

enum class UpdateMode { rank, pick_best, pairwise };

struct DemPrefConfig {
  int n_dem = 1;
  int n_queries = 25;
  int n_opt = 2;
  bool use_ic = false;
  UpdateMode update_mode = UpdateMode::rank;
  double beta_demo = 0.1;
  double beta_response = 5.0;
  ResponseModel pairwise_model = ResponseModel::exact;
  int belief_samples = 1000;
  SamplerSettings sampler;
  // budget.seed is ignored; each query derives its own from `seed`.
  OptBudget budget;
  std::uint64_t seed = 0;

  void validate() const;
  QuerySettings query_settings() const;
  ResponseKind response_kind() const;
};

// Seeds of iteration i. Every stage has its own stream so that conditions
// sharing a master seed share responder and buffer draws.
struct StageSeeds {
  std::uint64_t optimizer;
  std::uint64_t responder;
  std::uint64_t buffer;
  std::uint64_t sampler;  // posterior after this iteration's response

  static StageSeeds at(std::uint64_t master, int iteration);
  // Seed of the Stage-1 belief.
  static std::uint64_t prior(std::uint64_t master);
};

struct TraceRecord {
  int iteration = 0;
  std::string belief_digest;  // belief the query was generated from
  Query query;
  RankingResponse response;
  std::optional<int> buffer_slot;
  std::optional<double> metric;  // m after the update, when w_true is known
};

struct SessionState {
  Evidence evidence;
  Belief belief;
  std::vector<Trajectory> demonstrations;
  // Iterated-correction buffer; holds the demonstrations when use_ic is off
  // too, but is then never drawn from.
  std::vector<Trajectory> buffer;
  std::vector<TraceRecord> trace;
  int iteration = 0;
  std::optional<double> initial_metric;
};

// A generated query waiting for its response.
struct PendingQuery {
  int iteration = 0;
  Query query;
  std::optional<int> buffer_slot;
  std::string belief_digest;
};

// Stage 1: the uniform-ball prior for no demonstrations, otherwise the
// demonstration posterior.
Belief learn_prior(std::span<const Trajectory> demos, const DemPrefConfig& config, int feature_dim);

SessionState start_session(std::span<const Trajectory> demos, const DemPrefConfig& config, int feature_dim,
                           const std::optional<Vector>& w_true = std::nullopt);

// Generates the next query. With use_ic the stored trajectory is drawn
// uniformly from the buffer.
PendingQuery prepare_query(const SessionState& state, const DemPrefConfig& config, const System& system);

// Records the response, resamples the belief and, with use_ic, replaces the
// drawn buffer entry with the top-ranked trajectory. Throws InvalidArgument on
// an invalid ranking or an iteration mismatch.
SessionState apply_response(SessionState state, const DemPrefConfig& config, const PendingQuery& pending,
                            const RankingResponse& response, const std::optional<Vector>& w_true = std::nullopt);

SessionState dempref_step(SessionState state, const DemPrefConfig& config, const System& system,
                          RankingSource& responder, const std::optional<Vector>& w_true = std::nullopt);

using StepCallback = std::function<void(const SessionState&)>;

// Stage 1 followed by n_queries steps. on_step (if set) sees the state after
// Stage 1 and after every step.
SessionState run(const DemPrefConfig& config, const System& system, std::span<const Trajectory> demos,
                 RankingSource& responder, const std::optional<Vector>& w_true = std::nullopt,
                 const StepCallback& on_step = {});

}  // namespace dempref
