#include <benchmark/benchmark.h>

#include "corridor_gym/ddqn.hpp"
#include "corridor_gym/env.hpp"
#include "corridor_gym/policy.hpp"

using namespace cgym;

namespace {

Scenario busy_scenario(int n_aircraft) {
  NetworkParams np;
  FlightParams fp;
  fp.n_aircraft = n_aircraft;
  fp.duration_s = 1500;
  Network net = generate_network(np, 1);
  auto flights = generate_flights(net, fp, 2);
  return make_scenario(std::move(net), std::move(flights), fp.duration_s, 1);
}

}  // namespace

// Full unequipped episode; items are aircraft states.
static void BM_UnequippedEpisode(benchmark::State& state) {
  const Scenario sc = busy_scenario(static_cast<int>(state.range(0)));
  std::size_t states = 0;
  for (auto _ : state) {
    Environment env(sc, {});
    UnequippedPolicy p;
    auto r = env.reset();
    while (!r.done) r = env.step(p.act_all(r));
    states += env.stats().aircraft_states;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(states));
}
BENCHMARK(BM_UnequippedEpisode)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_QNetworkForward(benchmark::State& state) {
  const auto batch = state.range(0);
  Mlp net = make_q_network(339, DdqnConfig{});
  Rng rng(1);
  net.init(rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(339, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_QNetworkForward)->Arg(1)->Arg(32)->Arg(512);

static void BM_TrainStep(benchmark::State& state) {
  DdqnConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  cfg.replay_capacity = 4096;
  DdqnLearner learner(cfg, 339, 1);
  ReplayBuffer buf(4096);
  Rng rng(2);
  for (int i = 0; i < 4096; ++i) {
    Transition t;
    t.obs.resize(339);
    t.next_obs.resize(339);
    for (auto& v : t.obs) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : t.next_obs) v = static_cast<float>(rng.uniform(-1, 1));
    t.action = static_cast<int>(rng.index(3));
    t.reward = -rng.uniform01();
    buf.push(std::move(t));
  }
  for (auto _ : state) benchmark::DoNotOptimize(learner.train_step(buf));
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_EventDetector(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<std::vector<PositionSample>> samples(200);
  for (auto& s : samples) {
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back({static_cast<AircraftId>(i + 1), rng.uniform(0, 20'000), rng.uniform(0, 20'000), 300});
    }
  }
  for (auto _ : state) {
    EventDetector det;
    for (std::size_t t = 0; t < samples.size(); ++t) det.update(static_cast<double>(t), samples[t]);
    benchmark::DoNotOptimize(det.finish());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size() * n));
}
BENCHMARK(BM_EventDetector)->Arg(100)->Arg(1000);
BENCHMARK_MAIN();
