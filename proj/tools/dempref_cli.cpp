// dempref: run experiments, drive sessions and serve the session API.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dempref/driver.hpp"
#include "dempref/errors.hpp"
#include "dempref/experiment.hpp"
#include "dempref/http_service.hpp"
#include "dempref/metric.hpp"
#include "dempref/serialization.hpp"
#include "dempref/session_store.hpp"

using namespace dempref;

namespace {

constexpr int kUsageError = 2;

std::string env_or(const char* name, std::string fallback) {
  const char* value = std::getenv(name);
  return value && *value ? value : fallback;
}

Vector parse_weights(const std::string& text, int dim) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(std::stod(item));
  if (static_cast<int>(values.size()) != dim)
    throw InvalidArgument("--weights needs " + std::to_string(dim) + " comma-separated numbers");
  return Eigen::Map<Vector>(values.data(), dim);
}

// "s,a;s,a;..." or "s,a s,a ..." -> [[s, a], ...]
json parse_controls(std::string text) {
  std::replace(text.begin(), text.end(), ';', ' ');
  json controls = json::array();
  std::stringstream in(text);
  std::string step;
  while (in >> step) {
    json u = json::array();
    std::stringstream parts(step);
    std::string x;
    while (std::getline(parts, x, ',')) u.push_back(std::stod(x));
    controls.push_back(u);
  }
  return controls;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

struct ExperimentArgs {
  std::string id;
  std::string domain = "driver";
  int reps = 8;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  int queries = 25;
  int restarts = 8;
  int iterations = 40;
  int mc_samples = 10000;
  int belief_samples = 1000;
  int pool_size = 100;
  bool stochastic = false;
};

int run_experiment_command(const ExperimentArgs& a) {
  ExperimentConfig config;
  config.id = experiment_from_string(a.id);
  config.domain = a.domain;
  config.reps = a.reps;
  config.seed = a.seed;
  config.threads = a.threads;
  ExperimentSettings& s = config.settings;
  s.n_queries = a.queries;
  s.query_budget.restarts = a.restarts;
  s.query_budget.iterations = a.iterations;
  s.query_budget.mc_samples = a.mc_samples;
  s.belief_samples = a.belief_samples;
  s.pool_size = a.pool_size;
  s.deterministic_responder = !a.stochastic;
  config.validate();

  const ResultTable table = run_experiment(config);
  write_results(table, a.out);
  std::printf("%-20s %8s %8s %8s\n", "condition", "q=0", "q=10", "final");
  std::vector<std::string> seen;
  for (const ResultRow& row : table.rows) {
    if (std::find(seen.begin(), seen.end(), row.condition) != seen.end()) continue;
    seen.push_back(row.condition);
    auto at = [&](int q) { return table.mean(row.condition, q).value_or(std::nan("")); };
    std::printf("%-20s %8.4f %8.4f %8.4f\n", row.condition.c_str(), at(0), at(std::min(10, a.queries)),
                at(a.queries));
  }
  std::printf("wrote %s and %s\n", a.out.c_str(), aggregate_path(a.out).c_str());
  if (!table.failures.empty()) {
    for (const CellFailure& f : table.failures)
      std::fprintf(stderr, "failed cell %s seed %llu: %s\n", f.condition.c_str(),
                   static_cast<unsigned long long>(f.seed), f.message.c_str());
    return 1;
  }
  return 0;
}

SessionStoreOptions local_store(const std::string& data_dir, const std::string& domain) {
  SessionStoreOptions o;
  o.data_dir = data_dir;
  o.domain = domain;
  o.background = false;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::from_str(env_or("DEMPREF_LOG_LEVEL", "warn")));

  CLI::App app{"Reward learning from demonstrations and ranking queries"};
  app.require_subcommand(1);
  const auto domains = system_names();

  ExperimentArgs exp;
  auto* experiment = app.add_subcommand("experiment", "Run a simulated experiment and write JSON-lines results");
  experiment->add_option("id", exp.id, "Experiment")->required()->check(CLI::IsMember(experiment_names()));
  experiment->add_option("--domain", exp.domain, "Domain")->check(CLI::IsMember(domains));
  experiment->add_option("--reps", exp.reps, "Repetitions (paired seeds)")->check(CLI::PositiveNumber);
  experiment->add_option("--seed", exp.seed, "Master seed; repetition i uses seed + i");
  experiment->add_option("--out", exp.out, "Results file (.jsonl); the aggregate CSV is written next to it")
      ->required();
  experiment->add_option("--threads", exp.threads, "Worker threads (0: automatic, capped by DEMPREF_THREADS)");
  experiment->add_option("--queries", exp.queries, "Queries per run")->check(CLI::NonNegativeNumber);
  experiment->add_option("--restarts", exp.restarts, "Query optimizer restarts")->check(CLI::PositiveNumber);
  experiment->add_option("--iterations", exp.iterations, "Coordinate sweeps per restart")
      ->check(CLI::NonNegativeNumber);
  experiment->add_option("--mc-samples", exp.mc_samples, "Belief samples per objective evaluation")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--belief-samples", exp.belief_samples, "Posterior samples kept per update")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--pool-size", exp.pool_size, "Noisy demonstrations graded for iterated_corr")
      ->check(CLI::Range(2, 100000));
  experiment->add_flag("--stochastic", exp.stochastic, "Plackett-Luce responder instead of the deterministic one");

  std::string summarize_path;
  auto* summarize = app.add_subcommand("summarize", "Print the aggregate CSV of a results file");
  summarize->add_option("results", summarize_path, "Results file (.jsonl)")->required()->check(CLI::ExistingFile);

  std::string demo_domain = "driver", demo_weights;
  double demo_noise = 0.0;
  std::uint64_t demo_seed = 0;
  auto* demo = app.add_subcommand("demo", "Print a simulated (optionally noisy) demonstration as JSON");
  demo->add_option("--domain", demo_domain, "Domain")->check(CLI::IsMember(domains));
  demo->add_option("--noise", demo_noise, "Control noise standard deviation")->check(CLI::NonNegativeNumber);
  demo->add_option("--seed", demo_seed, "Seed");
  demo->add_option("--weights", demo_weights, "Comma-separated reward weights (default: the domain's w_true)");

  std::string data_dir = env_or("DEMPREF_DATA_DIR", "sessions");
  std::string session_domain = "driver";
  auto* session = app.add_subcommand("session", "Drive a session stored under --data-dir");
  session->require_subcommand(1);
  session->add_option("--data-dir", data_dir, "Session directory (env DEMPREF_DATA_DIR)");
  session->add_option("--domain", session_domain, "Domain")->check(CLI::IsMember(domains));

  std::string new_config;
  auto* session_new = session->add_subcommand("new", "Create a session from a JSON config");
  session_new->add_option("--config", new_config, "Config JSON, inline or @file")->default_val("{}");

  std::string session_id;
  auto* session_status = session->add_subcommand("status", "Print the current query or state");
  session_status->add_option("id", session_id, "Session id")->required();

  std::string controls_text, sim_weights;
  double sim_noise = 0.0;
  std::uint64_t sim_seed = 0;
  bool mpc = false;
  auto* session_demo = session->add_subcommand("demo", "Submit a demonstration");
  session_demo->add_option("id", session_id, "Session id")->required();
  auto* controls_opt = session_demo->add_option("--controls", controls_text, "Controls as \"s,a;s,a;...\" or \"s,a s,a ...\"");
  auto* mpc_flag = session_demo->add_flag("--mpc", mpc, "Submit a simulated demonstration instead");
  controls_opt->excludes(mpc_flag);
  session_demo->add_option("--noise", sim_noise, "Noise of the simulated demonstration");
  session_demo->add_option("--seed", sim_seed, "Seed of the simulated demonstration");
  session_demo->add_option("--weights", sim_weights, "Reward weights of the simulated demonstrator");

  std::vector<int> permutation;
  bool simulate = false;
  auto* session_step = session->add_subcommand("step", "Answer the pending query");
  session_step->add_option("id", session_id, "Session id")->required();
  auto* ranking_opt =
      session_step->add_option("--ranking", permutation, "1-based option numbers, best first")->delimiter(',');
  auto* simulate_flag = session_step->add_flag("--simulate", simulate, "Answer as the simulated human");
  ranking_opt->excludes(simulate_flag);
  session_step->add_option("--weights", sim_weights, "Weights of the simulated human");

  std::string host = env_or("DEMPREF_HOST", "127.0.0.1"), static_dir;
  int port = std::atoi(env_or("DEMPREF_PORT", "8080").c_str());
  int workers = 1;
  auto* serve = app.add_subcommand("serve", "Serve the session API over HTTP");
  serve->add_option("--host", host, "Bind address (env DEMPREF_HOST)");
  serve->add_option("--port", port, "Port (env DEMPREF_PORT)")->check(CLI::Range(0, 65535));
  serve->add_option("--data-dir", data_dir, "Session directory (env DEMPREF_DATA_DIR)");
  serve->add_option("--domain", session_domain, "Domain")->check(CLI::IsMember(domains));
  serve->add_option("--static", static_dir, "Directory served under /")->check(CLI::ExistingDirectory);
  serve->add_option("--workers", workers, "Query generation threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*experiment) return run_experiment_command(exp);

    if (*summarize) {
      std::cout << aggregate_csv(aggregate(load_results(summarize_path)));
      return 0;
    }

    if (*demo) {
      auto system = make_system(demo_domain);
      const Vector w = demo_weights.empty() ? default_true_weights(demo_domain)
                                            : parse_weights(demo_weights, system->spec().feature_dim);
      OptBudget budget;
      budget.mc_samples = 1;
      print(json(mpc_demonstration(*system, w, demo_noise, demo_seed, budget)));
      return 0;
    }

    if (*serve) {
      SessionStoreOptions o;
      o.data_dir = data_dir;
      o.domain = session_domain;
      o.workers = workers;
      SessionStore store(o);
      HttpServiceOptions h;
      h.host = host;
      h.port = port;
      h.static_dir = static_dir;
      HttpService service(store, h);
      spdlog::set_level(spdlog::level::info);
      service.serve();
      return 0;
    }

    if (*session) {
      SessionStore store(local_store(data_dir, session_domain));
      if (*session_new) {
        const std::string text = !new_config.empty() && new_config[0] == '@' ? read_file(new_config.substr(1)) : new_config;
        print(store.create_session(json::parse(text)));
      } else if (*session_status) {
        print(store.get_current_query(session_id));
      } else if (*session_demo) {
        json body;
        if (mpc) {
          auto system = make_system(session_domain);
          const Vector w = sim_weights.empty() ? default_true_weights(session_domain)
                                               : parse_weights(sim_weights, system->spec().feature_dim);
          OptBudget budget;
          budget.mc_samples = 1;
          body = json{{"v", 1}, {"controls", json(mpc_demonstration(*system, w, sim_noise, sim_seed, budget))["controls"]}};
        } else if (!controls_text.empty()) {
          body = json{{"v", 1}, {"controls", parse_controls(controls_text)}};
        } else {
          throw CLI::RequiredError("--controls or --mpc");
        }
        print(store.submit_demonstration(session_id, body));
      } else if (*session_step) {
        const json current = store.get_current_query(session_id);
        if (current.at("status") != "awaiting_response")
          throw ServiceError(409, "session is " + current.at("status").get<std::string>() + ", not awaiting a ranking");
        const int iteration = current.at("iteration");
        if (simulate) {
          auto system = make_system(session_domain);
          const Vector w = sim_weights.empty() ? default_true_weights(session_domain)
                                               : parse_weights(sim_weights, system->spec().feature_dim);
          SimulatedHuman human(w, 0.1, 5.0, true);
          const Query q = current.at("query").get<Query>();
          permutation.clear();
          for (int option : human.respond(q, 0).ranking) permutation.push_back(option + 1);
        } else if (permutation.empty()) {
          throw CLI::RequiredError("--ranking or --simulate");
        }
        print(store.submit_ranking(session_id, json{{"v", 1}, {"iteration", iteration}, {"permutation", permutation}}));
      }
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  } catch (const ServiceError& e) {
    std::cerr << "error (" << e.http_status() << "): " << e.what();
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
