#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dempref/learner.hpp"

namespace dempref {

enum class ExperimentId { init_demos, update_func, iterated_corr };

std::string to_string(ExperimentId id);
ExperimentId experiment_from_string(std::string_view text);
std::vector<std::string> experiment_names();

// Where a condition's demonstrations come from.
enum class DemoSource { none, clean_mpc, graded_low, graded_high };

struct Condition {
  std::string name;
  DemPrefConfig config;  // config.seed is overwritten per repetition
  DemoSource demos = DemoSource::none;
};

// Knobs shared by every condition of an experiment.
struct ExperimentSettings {
  int n_queries = 25;
  double beta_demo = 0.1;
  double beta_response = 5.0;
  int belief_samples = 1000;
  SamplerSettings sampler;
  OptBudget query_budget;             // restarts 8, iterations 40, mc_samples 10000
  OptBudget mpc_budget{8, 40, 1, 0};  // mc_samples unused by demonstrations
  int pool_size = 100;
  double pool_noise = 0.3;
  bool deterministic_responder = true;
};

struct ExperimentConfig {
  ExperimentId id = ExperimentId::init_demos;
  std::string domain = "driver";
  int reps = 8;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: DEMPREF_THREADS, else hardware concurrency
  ExperimentSettings settings;
  // Empty: default_conditions(id, settings).
  std::vector<Condition> conditions;
  // Empty: default_true_weights(domain).
  std::optional<Vector> w_true;

  void validate() const;
};

std::vector<Condition> default_conditions(ExperimentId id, const ExperimentSettings& settings);
Vector default_true_weights(std::string_view domain);

// Worker count honoring DEMPREF_THREADS; `requested` <= 0 means automatic.
int resolve_threads(int requested);

struct ResultRow {
  std::string condition;
  std::uint64_t seed = 0;
  int query_index = 0;  // 0 is the belief before any query
  double m = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct CellFailure {
  std::string condition;
  std::uint64_t seed = 0;
  std::string message;

  bool operator==(const CellFailure&) const = default;
};

struct ResultTable {
  std::string experiment;
  nlohmann::json config;
  std::vector<ResultRow> rows;
  std::vector<CellFailure> failures;

  // Mean m over repetitions; nullopt when no row matches.
  std::optional<double> mean(std::string_view condition, int query_index) const;
  std::vector<double> values(std::string_view condition, int query_index) const;
  bool operator==(const ResultTable&) const = default;
};

struct AggregatePoint {
  std::string condition;
  int query_index = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;
};

// Runs every (condition, repetition) cell. Repetition i uses master seed
// config.seed + i in every condition, so the manipulated variable is the only
// difference between paired cells. Cells run on resolve_threads(threads)
// workers; the table is identical to sequential execution. A failing cell
// keeps the rows it produced and is listed in `failures`.
ResultTable run_experiment(const ExperimentConfig& config);

// Mean and bootstrap 95% interval over repetitions per (condition, query).
std::vector<AggregatePoint> aggregate(const ResultTable& table, int resamples = 2000, std::uint64_t seed = 0);

nlohmann::json to_json(const ExperimentConfig& config);

// JSON lines: a header {"experiment", "config", "failures"} followed by one
// {"experiment", "condition", "seed", "query_index", "m"} record per row.
std::string to_jsonl(const ResultTable& table);
ResultTable parse_jsonl(std::string_view text);
std::string aggregate_csv(const std::vector<AggregatePoint>& points);

// Writes `path` (JSON lines) and the aggregate CSV next to it.
void write_results(const ResultTable& table, const std::filesystem::path& path);
ResultTable load_results(const std::filesystem::path& path);
std::filesystem::path aggregate_path(const std::filesystem::path& results_path);

}  // namespace dempref
