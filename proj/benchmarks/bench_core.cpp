// Micro benchmarks for the hot paths of query synthesis and inference.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dempref/belief.hpp"
#include "dempref/dynamics.hpp"
#include "dempref/querygen.hpp"
#include "dempref/random.hpp"

namespace {

using namespace dempref;

std::vector<double> random_controls(const System& system, std::uint64_t seed) {
  const SystemSpec& spec = system.spec();
  Rng rng = make_rng(seed);
  std::vector<double> flat;
  for (int t = 0; t < spec.horizon; ++t)
    for (int i = 0; i < spec.control_dim; ++i)
      flat.push_back(std::uniform_real_distribution<double>(spec.control_lo[i], spec.control_hi[i])(rng));
  return flat;
}

std::vector<Vector> random_phis(int n, int dim, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> phis;
  for (int i = 0; i < n; ++i) {
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = normal(rng) * 10.0;
    phis.push_back(v);
  }
  return phis;
}

Evidence demo_evidence(const System& system) {
  Evidence ev;
  ev.demonstrations.push_back(rollout_feature_sum(system, random_controls(system, 7)));
  Response r;
  r.phis = random_phis(3, system.spec().feature_dim, 11);
  r.ranking = {2, 0, 1};
  ev.responses.push_back(r);
  return ev;
}

void BM_DriverRollout(benchmark::State& state) {
  const auto system = make_system("driver");
  const std::vector<double> flat = random_controls(*system, 1);
  for (auto _ : state) benchmark::DoNotOptimize(rollout_feature_sum(*system, flat));
}
BENCHMARK(BM_DriverRollout);

void BM_RankingObjective(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::vector<Vector> phis = random_phis(n, 4, 3);
  const std::vector<Vector> ball = sample_unit_ball(4, 1000, 5);
  WeightSamples samples(ball.size(), 4);
  for (std::size_t i = 0; i < ball.size(); ++i) samples.row(i) = ball[i].transpose();
  for (auto _ : state) benchmark::DoNotOptimize(ranking_volume_objective(phis, samples, 5.0));
}
BENCHMARK(BM_RankingObjective)->Arg(2)->Arg(3)->Arg(5);

void BM_PickBestObjective(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const std::vector<Vector> phis = random_phis(n, 4, 3);
  const std::vector<Vector> ball = sample_unit_ball(4, 1000, 5);
  WeightSamples samples(ball.size(), 4);
  for (std::size_t i = 0; i < ball.size(); ++i) samples.row(i) = ball[i].transpose();
  for (auto _ : state) benchmark::DoNotOptimize(pick_best_volume_objective(phis, samples, 5.0));
}
BENCHMARK(BM_PickBestObjective)->Arg(3)->Arg(5);

void BM_SamplePosterior(benchmark::State& state) {
  const auto system = make_system("driver");
  const Evidence ev = demo_evidence(*system);
  for (auto _ : state) benchmark::DoNotOptimize(sample_posterior(ev, 4, 1000, 9));
}
BENCHMARK(BM_SamplePosterior)->Unit(benchmark::kMillisecond);

void BM_GenerateQuery(benchmark::State& state) {
  const auto system = make_system("driver");
  const Belief belief = sample_posterior(demo_evidence(*system), 4, 1000, 9);
  OptBudget budget;
  budget.restarts = 1;
  budget.iterations = 2;
  budget.mc_samples = 500;
  budget.seed = 13;
  for (auto _ : state) benchmark::DoNotOptimize(generate_query(belief, *system, 3, nullptr, budget));
}
BENCHMARK(BM_GenerateQuery)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
