#include "dempref/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "dempref/errors.hpp"
#include "dempref/metric.hpp"
#include "dempref/random.hpp"
#include "dempref/serialization.hpp"
#include "parallel.hpp"

namespace dempref {

std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::init_demos:
      return "init_demos";
    case ExperimentId::update_func:
      return "update_func";
    case ExperimentId::iterated_corr:
      return "iterated_corr";
  }
  return "init_demos";
}

ExperimentId experiment_from_string(std::string_view text) {
  if (text == "init_demos") return ExperimentId::init_demos;
  if (text == "update_func") return ExperimentId::update_func;
  if (text == "iterated_corr") return ExperimentId::iterated_corr;
  throw InvalidArgument("unknown experiment '" + std::string(text) +
                        "'; valid experiments: init_demos, update_func, iterated_corr");
}

std::vector<std::string> experiment_names() { return {"init_demos", "update_func", "iterated_corr"}; }

namespace {

const char* to_string(DemoSource s) {
  switch (s) {
    case DemoSource::none:
      return "none";
    case DemoSource::clean_mpc:
      return "clean_mpc";
    case DemoSource::graded_low:
      return "graded_low";
    case DemoSource::graded_high:
      return "graded_high";
  }
  return "none";
}

DemPrefConfig base_config(const ExperimentSettings& s) {
  DemPrefConfig c;
  c.n_queries = s.n_queries;
  c.beta_demo = s.beta_demo;
  c.beta_response = s.beta_response;
  c.belief_samples = s.belief_samples;
  c.sampler = s.sampler;
  c.budget = s.query_budget;
  c.update_mode = UpdateMode::rank;
  return c;
}

// Demonstrations shared by every condition of one repetition.
struct RepDemos {
  std::vector<Trajectory> clean;
  std::optional<GradedPool> pool;
  std::exception_ptr error;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (reps < 1) throw InvalidArgument("reps must be >= 1");
  if (settings.n_queries < 0) throw InvalidArgument("n_queries must be >= 0");
  if (settings.pool_size < 2) throw InvalidArgument("pool_size must be >= 2");
  make_system(domain);
  for (const Condition& c : conditions) c.config.validate();
}

std::vector<Condition> default_conditions(ExperimentId id, const ExperimentSettings& settings) {
  std::vector<Condition> out;
  switch (id) {
    case ExperimentId::init_demos:
      for (int n : {0, 1, 3}) {
        Condition c{"n_dem=" + std::to_string(n), base_config(settings), n > 0 ? DemoSource::clean_mpc : DemoSource::none};
        c.config.n_dem = n;
        c.config.n_opt = 2;
        out.push_back(c);
      }
      break;
    case ExperimentId::update_func:
      for (int n_opt : {3, 5})
        for (UpdateMode mode : {UpdateMode::pick_best, UpdateMode::rank}) {
          Condition c{to_string(mode) + "/n_opt=" + std::to_string(n_opt), base_config(settings), DemoSource::none};
          c.config.n_dem = 0;
          c.config.n_opt = n_opt;
          c.config.update_mode = mode;
          out.push_back(c);
        }
      break;
    case ExperimentId::iterated_corr:
      for (DemoSource quality : {DemoSource::graded_low, DemoSource::graded_high})
        for (bool ic : {true, false}) {
          const std::string q = quality == DemoSource::graded_low ? "low" : "high";
          Condition c{std::string(ic ? "ic/" : "no_ic/") + q, base_config(settings), quality};
          c.config.n_dem = 1;
          // IC adds the stored trajectory to the two generated ones; the
          // baseline is the standard two-option query.
          c.config.n_opt = ic ? 3 : 2;
          c.config.use_ic = ic;
          out.push_back(c);
        }
      break;
  }
  return out;
}

Vector default_true_weights(std::string_view domain) {
  if (domain == "driver") return (Vector(4) << 0.5, -0.2, 0.2, -0.7).finished();
  make_system(domain);  // throws UnknownDomain
  throw UnknownDomain("no default weights for domain '" + std::string(domain) + "'");
}

int resolve_threads(int requested) {
  int threads = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("DEMPREF_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) threads = std::min(threads, cap);
  }
  return std::max(threads, 1);
}

std::optional<double> ResultTable::mean(std::string_view condition, int query_index) const {
  const std::vector<double> v = values(condition, query_index);
  if (v.empty()) return std::nullopt;
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

std::vector<double> ResultTable::values(std::string_view condition, int query_index) const {
  std::vector<double> out;
  for (const ResultRow& r : rows)
    if (r.condition == condition && r.query_index == query_index) out.push_back(r.m);
  return out;
}

nlohmann::json to_json(const ExperimentConfig& config) {
  const auto& s = config.settings;
  const std::vector<Condition> conditions =
      config.conditions.empty() ? default_conditions(config.id, s) : config.conditions;
  json conds = json::array();
  for (const Condition& c : conditions)
    conds.push_back({{"name", c.name}, {"config", c.config}, {"demos", to_string(c.demos)}});
  const Vector w_true = config.w_true ? *config.w_true : default_true_weights(config.domain);
  return json{{"experiment", to_string(config.id)},
              {"domain", config.domain},
              {"reps", config.reps},
              {"seed", config.seed},
              {"w_true", vector_to_json(w_true)},
              {"settings",
               {{"n_queries", s.n_queries},
                {"beta_demo", s.beta_demo},
                {"beta_response", s.beta_response},
                {"belief_samples", s.belief_samples},
                {"sampler", s.sampler},
                {"query_budget", s.query_budget},
                {"mpc_budget", s.mpc_budget},
                {"pool_size", s.pool_size},
                {"pool_noise", s.pool_noise},
                {"deterministic_responder", s.deterministic_responder}}},
              {"conditions", conds}};
}

ResultTable run_experiment(const ExperimentConfig& input) {
  ExperimentConfig config = input;
  if (config.conditions.empty()) config.conditions = default_conditions(config.id, config.settings);
  if (!config.w_true) config.w_true = default_true_weights(config.domain);
  config.validate();
  const auto system = make_system(config.domain);
  const Vector& w_true = *config.w_true;
  const ExperimentSettings& s = config.settings;
  const int threads = resolve_threads(config.threads);

  int clean_needed = 0;
  bool pool_needed = false;
  for (const Condition& c : config.conditions) {
    if (c.demos == DemoSource::clean_mpc) clean_needed = std::max(clean_needed, c.config.n_dem);
    if (c.demos == DemoSource::graded_low || c.demos == DemoSource::graded_high) pool_needed = true;
  }

  std::vector<RepDemos> rep_demos(config.reps);
  detail::parallel_for(config.reps, threads, [&](int r) {
    const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(r);
    try {
      for (int j = 0; j < clean_needed; ++j)
        rep_demos[r].clean.push_back(mpc_demonstration(*system, w_true, 0.0,
                                                       derive_seed(rep_seed, "demo", static_cast<std::uint64_t>(j)),
                                                       s.mpc_budget));
      if (pool_needed) {
        GradedPoolSettings pool;
        pool.noise_scale = s.pool_noise;
        pool.beta_demo = s.beta_demo;
        pool.posterior_samples = s.belief_samples;
        pool.sampler = s.sampler;
        pool.mpc_budget = s.mpc_budget;
        rep_demos[r].pool = graded_demo_pool(*system, w_true, s.pool_size, derive_seed(rep_seed, "pool"), pool);
      }
    } catch (...) {
      rep_demos[r].error = std::current_exception();
    }
  });

  const int cells = static_cast<int>(config.conditions.size()) * config.reps;
  std::vector<std::vector<ResultRow>> cell_rows(cells);
  std::vector<std::optional<CellFailure>> cell_failures(cells);
  detail::parallel_for(cells, threads, [&](int cell) {
    const Condition& cond = config.conditions[cell / config.reps];
    const int r = cell % config.reps;
    const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(r);
    try {
      if (rep_demos[r].error) std::rethrow_exception(rep_demos[r].error);
      std::vector<Trajectory> demos;
      switch (cond.demos) {
        case DemoSource::none:
          break;
        case DemoSource::clean_mpc:
          demos.assign(rep_demos[r].clean.begin(), rep_demos[r].clean.begin() + cond.config.n_dem);
          break;
        case DemoSource::graded_low:
          demos.assign(cond.config.n_dem, rep_demos[r].pool->low);
          break;
        case DemoSource::graded_high:
          demos.assign(cond.config.n_dem, rep_demos[r].pool->high);
          break;
      }
      DemPrefConfig dp = cond.config;
      dp.seed = rep_seed;
      SimulatedHuman human(w_true, s.beta_demo, s.beta_response, s.deterministic_responder);
      run(dp, *system, demos, human, w_true, [&](const SessionState& state) {
        const double m = state.iteration == 0 ? *state.initial_metric : *state.trace.back().metric;
        cell_rows[cell].push_back({cond.name, rep_seed, state.iteration, m});
      });
    } catch (const std::exception& e) {
      spdlog::error("experiment {} condition {} seed {} failed: {}", to_string(config.id), cond.name, rep_seed,
                    e.what());
      cell_failures[cell] = CellFailure{cond.name, rep_seed, e.what()};
    }
  });

  ResultTable table;
  table.experiment = to_string(config.id);
  table.config = to_json(config);
  for (int cell = 0; cell < cells; ++cell) {
    table.rows.insert(table.rows.end(), cell_rows[cell].begin(), cell_rows[cell].end());
    if (cell_failures[cell]) table.failures.push_back(*cell_failures[cell]);
  }
  return table;
}

std::vector<AggregatePoint> aggregate(const ResultTable& table, int resamples, std::uint64_t seed) {
  // Preserve first-appearance order of conditions and query indices.
  std::vector<std::pair<std::string, int>> keys;
  for (const ResultRow& r : table.rows) {
    const std::pair<std::string, int> key{r.condition, r.query_index};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<AggregatePoint> out;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& [condition, q] = keys[k];
    const std::vector<double> v = table.values(condition, q);
    AggregatePoint p;
    p.condition = condition;
    p.query_index = q;
    p.n = static_cast<int>(v.size());
    double total = 0.0;
    for (double x : v) total += x;
    p.mean = total / p.n;
    Rng rng = make_rng(derive_seed(seed, "bootstrap", k));
    std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
    std::vector<double> means(std::max(resamples, 1));
    for (double& m : means) {
      double sum = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) sum += v[pick(rng)];
      m = sum / static_cast<double>(v.size());
    }
    std::sort(means.begin(), means.end());
    auto quantile = [&](double f) {
      const double pos = f * static_cast<double>(means.size() - 1);
      const auto lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, means.size() - 1);
      return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    p.ci_low = quantile(0.025);
    p.ci_high = quantile(0.975);
    out.push_back(p);
  }
  return out;
}

std::string to_jsonl(const ResultTable& table) {
  json failures = json::array();
  for (const CellFailure& f : table.failures)
    failures.push_back({{"condition", f.condition}, {"seed", f.seed}, {"message", f.message}});
  std::string out = json{{"experiment", table.experiment}, {"config", table.config}, {"failures", failures}}.dump();
  out += '\n';
  for (const ResultRow& r : table.rows) {
    out += json{{"experiment", table.experiment},
                {"condition", r.condition},
                {"seed", r.seed},
                {"query_index", r.query_index},
                {"m", r.m}}
               .dump();
    out += '\n';
  }
  return out;
}

ResultTable parse_jsonl(std::string_view text) {
  ResultTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.contains("config")) {
      table.experiment = j.at("experiment").get<std::string>();
      table.config = j.at("config");
      for (const json& f : j.at("failures"))
        table.failures.push_back(
            {f.at("condition").get<std::string>(), f.at("seed").get<std::uint64_t>(), f.at("message").get<std::string>()});
      header = true;
      continue;
    }
    table.rows.push_back({j.at("condition").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                          j.at("query_index").get<int>(), j.at("m").get<double>()});
  }
  if (!header) throw InvalidArgument("results file has no header record");
  return table;
}

std::string aggregate_csv(const std::vector<AggregatePoint>& points) {
  std::string out = "condition,query_index,mean,ci_low,ci_high,n\n";
  char buf[160];
  for (const AggregatePoint& p : points) {
    std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g,%.17g,%d\n", p.query_index, p.mean, p.ci_low, p.ci_high, p.n);
    out += p.condition;
    out += buf;
  }
  return out;
}

std::filesystem::path aggregate_path(const std::filesystem::path& results_path) {
  std::filesystem::path p = results_path;
  p.replace_extension(".csv");
  if (p == results_path) p += ".csv";
  return p;
}

void write_results(const ResultTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomically(path, to_jsonl(table));
  write_file_atomically(aggregate_path(path), aggregate_csv(aggregate(table)));
}

ResultTable load_results(const std::filesystem::path& path) { return parse_jsonl(read_file(path)); }

}  // namespace dempref
