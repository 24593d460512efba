// Acceptance checks 1-10. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "../support/oracles.hpp"
#include "corridor_gym/config.hpp"
#include "corridor_gym/harness.hpp"
#include "corridor_gym/protocol.hpp"

using namespace cgym;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 1. Reward against the hand-written piecewise evaluator.
Outcome reward_oracle() {
  const auto start = Clock::now();
  const UseCaseParams p;
  Rng rng(2024);
  std::vector<double> distances{0.0, 149.999, 150.0, 2999.999, 3000.0, 1e6};
  while (distances.size() < 10'000) distances.push_back(rng.uniform(0.0, 4000.0));
  double worst = 0.0;
  std::size_t n = 0;
  for (double d : distances) {
    for (int a = 0; a < 3; ++a) {
      const double got = reward_from_distance(d, command_from_index(a), p);
      worst = std::max(worst, std::abs(got - oracle::reward(d, a)));
      ++n;
    }
  }
  // The geometric path: closest intruder from actual states.
  for (int i = 0; i < 1000; ++i) {
    AircraftState own, other;
    own.id = 1;
    own.active = true;
    other = own;
    other.id = 2;
    other.x = rng.uniform(-3500, 3500);
    other.y = rng.uniform(-3500, 3500);
    other.z = rng.uniform(-100, 100);
    const std::vector<AircraftState> all{own, other};
    const int a = static_cast<int>(rng.index(3));
    const double d = std::sqrt(other.x * other.x + other.y * other.y + other.z * other.z);
    worst = std::max(worst, std::abs(reward(own, all, command_from_index(a), p) - oracle::reward(d, a)));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-12 && secs < 1.0,
          std::to_string(n) + " samples + 1000 geometric, max |diff| " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// 2. Grid event detector against the all-pairs scan.
Outcome detection_equivalence() {
  const auto start = Clock::now();
  std::size_t mismatches = 0, events = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto log = oracle::random_log(1000 + seed, 5, 500, 1200.0);
    const MetricsParams p;
    const auto expected = oracle::brute_force_events(log, p);
    const auto got = detect_events(oracle::to_records(log), p);
    events += expected.size();
    if (got != expected) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && events > 0 && secs < 10.0,
          "100 logs, " + std::to_string(events) + " events, " + std::to_string(mismatches) + " mismatching logs, " +
              fmt(secs, 3) + " s"};
}

AircraftState random_aircraft(Rng& rng, AircraftId id) {
  AircraftState s;
  s.id = id;
  s.x = rng.uniform(-4000, 4000);
  s.y = rng.uniform(-4000, 4000);
  s.z = rng.uniform(280, 480);
  s.speed = rng.uniform(0, 77);
  s.accel = rng.uniform(-1.5, 1.5);
  s.heading = rng.uniform(0, 360);
  for (int k = 0; k < 4; ++k) s.route.push_back({rng.uniform(-8000, 8000), rng.uniform(-8000, 8000)});
  s.next_wpt_index = 1;
  s.dest_dist = remaining_route_distance(s);
  s.active = true;
  return s;
}

// 3. Observation length, padding, ordering and translation invariance.
Outcome observation_contract() {
  const UseCaseParams p;
  Rng rng(7);
  bool ok = p.observation_dim() == 339;
  double max_shift_diff = 0.0;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const auto n = static_cast<AircraftId>(1 + rng.index(45));
    std::vector<AircraftState> all;
    for (AircraftId id = 1; id <= n; ++id) all.push_back(random_aircraft(rng, id));
    auto shifted = all;
    for (auto& s : shifted) {
      s.x += 1e4;
      s.y += 1e4;
      for (auto& w : s.route) {
        w.x += 1e4;
        w.y += 1e4;
      }
    }
    for (std::size_t i = 0; i < all.size() && ok; ++i) {
      const auto obs = build_observation(all[i], all, p);
      ok = obs.features.size() == 339 && obs.valid_count == std::min<std::size_t>(n - 1, 30);
      double prev = -1.0;
      for (std::size_t k = 0; k < 30 && ok; ++k) {
        const std::size_t base = p.ownship_dim() + k * p.intruder_dim();
        if (k < obs.valid_count) {
          const double d = obs.features[base + 6];
          ok = d >= prev;
          prev = d;
        } else {
          for (std::size_t j = 0; j < p.intruder_dim() && ok; ++j) ok = obs.features[base + j] == 0.0;
        }
      }
      // Nothing nearer than the last kept intruder was dropped: fewer than 30
      // others are strictly closer than it.
      if (ok && obs.valid_count == 30) {
        std::size_t closer = 0;
        for (const auto& o : all) {
          if (o.id != all[i].id && pairwise_distance(o, all[i]) < prev - 1e-9) ++closer;
        }
        ok = closer < 30;
      }
      const auto moved = build_observation(shifted[i], shifted, p);
      for (std::size_t k = 0; k < obs.features.size(); ++k) {
        max_shift_diff = std::max(max_shift_diff, std::abs(obs.features[k] - moved.features[k]));
      }
    }
  }
  ok = ok && max_shift_diff <= 1e-9;
  return {ok, "200 random traffic sets (1-45 aircraft), max translation diff " + fmt(max_shift_diff)};
}

// 4. Backprop against central differences of an independent loss.
Outcome gradient_check_20() {
  const auto start = Clock::now();
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> sizes{3 + rng.index(6)};
    const auto layers = 1 + rng.index(3);
    for (std::uint64_t l = 0; l < layers; ++l) sizes.push_back(2 + rng.index(10));
    sizes.push_back(3);
    Mlp net(sizes, Activation::ReLU);
    net.init(rng);
    for (auto& l : net.layers()) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.1, 0.1);
    }
    GradientCheckBatch b;
    const auto n = static_cast<Eigen::Index>(1 + rng.index(16));
    b.inputs.resize(static_cast<Eigen::Index>(sizes.front()), n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (Eigen::Index r = 0; r < b.inputs.rows(); ++r) b.inputs(r, c) = rng.uniform(-1, 1);
      b.actions.push_back(static_cast<int>(rng.index(3)));
      b.targets.push_back(rng.uniform(-2, 2));
    }
    const auto analytic = td_loss_gradient(net, b.inputs, b.actions, b.targets);
    const auto numeric = oracle::numeric_gradient(net, b);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double a = analytic[i], m = numeric[i];
      if (a == 0.0 && m == 0.0) continue;
      worst = std::max(worst, std::abs(a - m) / std::max(std::abs(a) + std::abs(m), 1e-8));
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 30.0, "20 nets, max relative error " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// 5. Double-DQN target semantics.
Outcome ddqn_semantics() {
  bool ok = true;
  std::string detail;
  auto check = [&](double got, double want, const std::string& what) {
    if (std::abs(got - want) > 1e-12) {
      ok = false;
      detail += what + " got " + fmt(got, 17) + " want " + fmt(want, 17) + "; ";
    }
  };
  const std::array<double, 3> online{1.0, 5.0, 2.0};
  const std::array<double, 3> target{10.0, 0.2, 30.0};
  check(ddqn_target(-0.001, false, 0.99, online, target), 0.197, "decoupled argmax");
  check(ddqn_target(-0.5, true, 0.99, online, target), -0.5, "terminal");
  const std::array<double, 3> e0{1, 0, 0}, e1{0, 1, 0}, e2{0, 0, 1};
  const std::array<double, 3> t{3.0, -2.0, 7.0};
  check(ddqn_target(1.0, false, 0.5, e0, t), 2.5, "unit e0");
  check(ddqn_target(1.0, false, 0.5, e1, t), 0.0, "unit e1");
  check(ddqn_target(1.0, false, 0.5, e2, t), 4.5, "unit e2");
  // Through networks: online and target differ, argmax comes from online.
  Mlp on({2, 3}, Activation::Linear), tg({2, 3}, Activation::Linear);
  on.layers()[0].bias << 0.0, 1.0, 0.0;
  tg.layers()[0].bias << 5.0, -1.0, 9.0;
  Transition tr{{0.f, 0.f}, 0, 0.25, {0.f, 0.f}, false};
  check(ddqn_target(tr, on, tg, 0.9), 0.25 - 0.9, "network pair");
  tr.done = true;
  check(ddqn_target(tr, on, tg, 0.9), 0.25, "network terminal");
  return {ok, ok ? "7 target vectors exact (incl. 0.197 and terminal y = r)" : detail};
}

ExperimentConfig overtake_config(const fs::path& out) {
  ExperimentConfig c;
  c.set("scenario.preset", "overtake");
  c.set("output_dir", out.string());
  return c;
}

// Desk-scale DDQN on the overtake encounter. Reference hyperparameters, with
// replay, exploration and target sync shrunk to fit a single core. A fixed
// iteration count keeps the outcome deterministic; the budget is only a cap.
ExperimentConfig learning_config(const fs::path& out, double budget_s) {
  ExperimentConfig c = overtake_config(out);
  c.set("algorithm.eps_decay_steps", "20000");
  c.set("algorithm.replay_capacity", "50000");
  c.set("algorithm.target_update_freq", "1000");
  c.set("algorithm.optimizer", "adam");
  c.set("algorithm.train_every", "4");
  c.set("use_case.max_episode_s", "600");
  c.set("n_workers", "4");
  c.set("n_iterations", "40");
  c.set("rolling_window", "5");
  c.set("keep_all_checkpoints", "true");
  c.set("time_budget_s", fmt(budget_s, 10));
  c.set("seed", "1");
  return c;
}

// 6. Desk-scale learning beats the unequipped baseline.
Outcome desk_scale_learning(const fs::path& out, double budget_s) {
  const auto start = Clock::now();
  const TrainingResult tr = run_training(learning_config(out / "train", budget_s));
  const double train_s = seconds_since(start);
  if (tr.best_checkpoint.empty()) return {false, "no checkpoint produced"};
  ExperimentConfig ec = learning_config(out / "eval", budget_s);
  ec.set("eval_iterations", "100");
  const EvaluationResult ev = run_evaluation(ec, tr.best_checkpoint.string());
  const auto& r = ev.report;
  if (!r.risk_ratio || !r.lowc_ratio) return {false, "unequipped baseline had no NMAC/LoWC; ratio undefined"};

  // Reference only: the same network before any training.
  ExperimentConfig uc = learning_config(out / "eval_untrained", budget_s);
  uc.set("eval_iterations", "5");
  const auto untrained = run_evaluation(uc, (out / "train" / "checkpoints" / "iter_0000.ckpt").string()).report;
  const auto ratio = [](const std::optional<Summary>& s) { return s ? fmt(s->mean) : std::string("undefined"); };
  const bool ok = r.risk_ratio->mean < 1.0 && r.lowc_ratio->mean < 1.0 && train_s <= budget_s + 120.0;
  return {ok, "risk ratio " + fmt(r.risk_ratio->mean) + " +/- " + fmt(r.risk_ratio->std) + ", LoWC ratio " +
                  fmt(r.lowc_ratio->mean) + " +/- " + fmt(r.lowc_ratio->std) + " over 100 iterations; " +
                  std::to_string(tr.records.size()) + " training iterations, " + std::to_string(tr.env_steps) +
                  " env steps, " + std::to_string(tr.train_steps) + " train steps in " + fmt(train_s, 4) +
                  " s; best iteration " + std::to_string(tr.best_iteration.value_or(0)) + "; untrained network risk ratio " +
                  ratio(untrained.risk_ratio) + ", LoWC ratio " + ratio(untrained.lowc_ratio)};
}

// 7. Ratio identities on a deterministic scenario.
Outcome ratio_identities(const fs::path& out) {
  ExperimentConfig c = overtake_config(out / "unequipped");
  c.set("eval_iterations", "100");
  const auto base = run_evaluation(c, "unequipped");
  const bool unit = base.report.risk_ratio && base.report.risk_ratio->mean == 1.0 &&
                    base.report.risk_ratio->std == 0.0 && base.report.lowc_ratio &&
                    base.report.lowc_ratio->mean == 1.0 && base.report.lowc_ratio->std == 0.0;

  // Any fixed greedy network is a deterministic policy.
  Mlp net = make_q_network(UseCaseParams{}.observation_dim(), c.algorithm());
  Rng rng(17);
  net.init(rng);
  save_policy(net, out / "greedy.ckpt");
  ExperimentConfig g = overtake_config(out / "greedy");
  g.set("eval_iterations", "20");
  const auto greedy = run_evaluation(g, (out / "greedy.ckpt").string());
  const bool zero_std = greedy.report.risk_ratio && greedy.report.risk_ratio->std == 0.0 &&
                        greedy.report.normalized_nmac.std == 0.0;
  return {unit && zero_std,
          "unequipped/unequipped risk ratio " +
              (base.report.risk_ratio ? fmt(base.report.risk_ratio->mean) + " +/- " + fmt(base.report.risk_ratio->std)
                                      : std::string("undefined")) +
              "; greedy policy risk ratio std " +
              (greedy.report.risk_ratio ? fmt(greedy.report.risk_ratio->std) : std::string("undefined")) +
              ", normalized NMAC std " + fmt(greedy.report.normalized_nmac.std)};
}

// 8. Single-worker throughput on the 100-aircraft, 25-minute scenario.
Outcome throughput() {
  ExperimentConfig c;
  c.set("scenario.n_aircraft", "100");
  c.set("scenario.duration_s", "1500");
  const Scenario sc = build_scenario(c, 0);
  Environment env(sc, c.use_case(), c.metrics());
  UnequippedPolicy p;
  const auto out = run_episode(env, p);
  const double rate = static_cast<double>(out.stats.aircraft_states) / out.wall_s;
  return {rate >= 24.0, fmt(rate, 6) + " aircraft states/s (" + std::to_string(out.stats.aircraft_states) +
                            " states in " + fmt(out.wall_s, 4) + " s; bound 24, " + fmt(rate / 24.0, 4) + "x)"};
}

// Learning curve with the wall-clock column blanked; wall_s is a timing
// measurement, not a function of the config.
std::string curve_without_wall(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() == 5) cols[3] = "-";
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
  }
  return out;
}

// 9. Two single-worker runs from the same config snapshot.
Outcome reproducibility(const fs::path& out) {
  ExperimentConfig c;
  c.set("scenario.n_vertiports", "5");
  c.set("scenario.n_aircraft", "8");
  c.set("scenario.duration_s", "120");
  c.set("algorithm.batch_size", "64");
  c.set("algorithm.hidden_nodes", "32");
  c.set("algorithm.replay_capacity", "20000");
  c.set("algorithm.eps_decay_steps", "2000");
  c.set("algorithm.target_update_freq", "100");
  c.set("algorithm.train_every", "4");
  c.set("n_workers", "1");
  c.set("n_iterations", "4");
  c.set("seed", "31");
  c.set("output_dir", (out / "first").string());
  run_training(c);
  ExperimentConfig snap = ExperimentConfig::from_file(out / "first" / "config.json");
  snap.set("output_dir", (out / "second").string());
  run_training(snap);
  const bool curve = curve_without_wall(out / "first" / "learning_curve.csv") ==
                     curve_without_wall(out / "second" / "learning_curve.csv");
  const bool traj = slurp(out / "first" / "trajectory.csv") == slurp(out / "second" / "trajectory.csv");
  const bool ckpt = slurp(out / "first" / "checkpoints" / "final.ckpt") ==
                    slurp(out / "second" / "checkpoints" / "final.ckpt");
  return {curve && traj && ckpt, std::string("learning curve (wall_s excluded) ") + (curve ? "identical" : "DIFFERS") +
                                     ", trajectory " + (traj ? "identical" : "DIFFERS") + ", final checkpoint " +
                                     (ckpt ? "identical" : "DIFFERS")};
}

// 10. Scripted TCP client issuing Hold reproduces the in-process log.
Outcome protocol_fidelity() {
  ExperimentConfig c;
  c.set("scenario.n_aircraft", "20");
  c.set("scenario.duration_s", "300");
  const Scenario sc = build_scenario(c, 4);
  const UseCaseParams uc = c.use_case();
  const MetricsParams mp = c.metrics();

  std::ostringstream local;
  {
    Environment env(sc, uc, mp);
    UnequippedPolicy p;
    EpisodeOptions opt;
    opt.trajectory = &local;
    run_episode(env, p, opt);
  }

  ProtocolServer server([&] { return std::make_unique<Environment>(sc, uc, mp); }, 0);
  server.start();
  std::ostringstream remote;
  std::size_t requests = 0;
  {
    ProtocolClient client("127.0.0.1", server.port());
    TrajectoryWriter w(remote);
    StepResult r = step_result_from_json(client.request({{"type", "reset"}}));
    ++requests;
    w.write(r);
    while (!r.done) {
      nlohmann::json actions = nlohmann::json::object();
      for (const auto& [id, a] : r.agents) {
        if (!a.done) actions[std::to_string(id)] = to_index(SpeedCommand::Hold);
      }
      r = step_result_from_json(client.request({{"type", "step"}, {"actions", actions}}));
      ++requests;
      w.write(r);
    }
    client.request({{"type", "close"}});
  }
  server.stop();
  const bool same = local.str() == remote.str();
  return {same, std::to_string(requests) + " requests, " + std::to_string(local.str().size()) + " log bytes, " +
                    (same ? "bit-identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-10"};
  std::string out = "acceptance_runs";
  std::vector<int> only;
  double budget_s = 900.0;
  app.add_option("--out", out, "Scratch directory for training and evaluation outputs");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--train-budget", budget_s, "Wall-clock training budget for criterion 6, seconds");
  CLI11_PARSE(app, argc, argv);

  const fs::path root(out);
  fs::remove_all(root);
  fs::create_directories(root);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"reward oracle", reward_oracle},
      {"conflict-detection equivalence", detection_equivalence},
      {"observation contract", observation_contract},
      {"gradient check", gradient_check_20},
      {"double-DQN semantics", ddqn_semantics},
      {"desk-scale learning", [&] { return desk_scale_learning(root / "c6", budget_s); }},
      {"ratio identities", [&] { return ratio_identities(root / "c7"); }},
      {"throughput", throughput},
      {"reproducibility", [&] { return reproducibility(root / "c9"); }},
      {"protocol fidelity", protocol_fidelity},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    fs::create_directories(root / ("c" + std::to_string(id)));
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
