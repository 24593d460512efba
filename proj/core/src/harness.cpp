#include "corridor_gym/harness.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "corridor_gym/csv.hpp"
#include "corridor_gym/errors.hpp"

namespace cgym {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

// Runs fn(w) for w in [0, n) on n threads (inline when n == 1) and rethrows
// the first failure by worker index.
template <typename Fn>
void parallel_for_workers(std::size_t n, Fn fn, std::size_t* failed_worker = nullptr) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t w) {
    try {
      fn(w);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (n == 1) {
    guarded(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t w = 0; w < n; ++w) threads.emplace_back(guarded, w);
    for (auto& t : threads) t.join();
  }
  for (std::size_t w = 0; w < n; ++w) {
    if (errors[w]) {
      if (failed_worker) *failed_worker = w;
      std::rethrow_exception(errors[w]);
    }
  }
}

}  // namespace

std::uint64_t worker_seed(std::uint64_t seed, std::uint64_t iteration, std::uint64_t worker) {
  return mix_seed(mix_seed(seed, iteration + 0x1000), worker);
}

EpisodeOutcome run_episode(Environment& env, Policy& policy, const EpisodeOptions& options) {
  const auto t0 = Clock::now();
  EpisodeOutcome out;
  out.n_aircraft = env.scenario().flights.size();
  const UseCaseParams& params = env.params();
  std::optional<TrajectoryWriter> writer;
  if (options.trajectory) writer.emplace(*options.trajectory);

  StepResult current = env.reset();
  if (writer) writer->write(current);
  std::map<AircraftId, std::vector<float>> prev_scaled;
  while (!current.done) {
    if (options.before_step) options.before_step(out.steps);
    const auto actions = policy.act_all(current);
    if (options.collect_transitions) {
      prev_scaled.clear();
      for (const auto& [id, _] : actions) {
        prev_scaled.emplace(id, scale_observation(current.agents.at(id).observation, params));
      }
    }
    StepResult next = env.step(actions);
    ++out.steps;
    for (const auto& [id, agent] : next.agents) {
      if (!agent.reward) continue;
      out.total_reward += *agent.reward;
      if (options.collect_transitions) {
        auto it = prev_scaled.find(id);
        if (it == prev_scaled.end()) continue;
        out.transitions.push_back({std::move(it->second), to_index(*agent.action), *agent.reward,
                                   scale_observation(agent.observation, params), agent.done});
      }
    }
    if (writer) writer->write(next);
    current = std::move(next);
  }
  out.stats = env.stats();
  out.events = env.events();
  out.wall_s = seconds_since(t0);
  return out;
}

std::string format_learning_curve_row(const IterationRecord& r) {
  return std::to_string(r.iteration) + "," + csv::format_double(r.mean_reward) + "," +
         csv::format_double(r.norm_nmac) + "," + csv::format_double(r.wall_s) + "," + std::to_string(r.states);
}

std::vector<IterationRecord> read_learning_curve(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open learning curve " + path.string());
  std::vector<IterationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (lineno == 1) {
      if (line != kLearningCurveHeader) throw InputError(ctx + ": not a learning-curve header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 5) throw InputError(ctx + ": expected 5 fields");
    IterationRecord r;
    r.iteration = static_cast<std::size_t>(csv::parse_int(f[0], ctx));
    r.mean_reward = csv::parse_double(f[1], ctx);
    r.norm_nmac = csv::parse_double(f[2], ctx);
    r.wall_s = csv::parse_double(f[3], ctx);
    r.states = static_cast<std::size_t>(csv::parse_int(f[4], ctx));
    out.push_back(r);
  }
  return out;
}

std::size_t best_rolling_mean_index(std::span<const double> series, std::size_t window) {
  if (series.empty()) throw ContractViolation("rolling mean of an empty series");
  if (window == 0) throw ContractViolation("rolling window must be positive");
  std::size_t best = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= window) sum -= series[i - window];
    const double mean = sum / static_cast<double>(std::min(window, i + 1));
    if (mean > best_mean) {
      best_mean = mean;
      best = i;
    }
  }
  return best;
}

TrainingResult run_training(const ExperimentConfig& config) {
  config.validate();
  const RunSettings run = config.run();
  const UseCaseParams uc = config.use_case();
  const MetricsParams mp = config.metrics();
  const ScenarioSettings ss = config.scenario();
  const DdqnConfig dc = config.algorithm();
  const bool learn = run.algorithm == "ddqn";
  const std::size_t n_workers = run.n_workers;

  TrainingResult result;
  result.output_dir = run.output_dir;
  const fs::path ckpt_dir = run.output_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  config.save(run.output_dir / "config.json");
  fs::remove(run.output_dir / "FAILED");

  // Randomized runs build every worker's scenario themselves, so a failure
  // there surfaces as a worker failure.
  std::optional<Scenario> base;
  if (!ss.randomize_per_worker) base = build_scenario(config, run.seed);
  std::optional<DdqnLearner> learner;
  if (learn) learner.emplace(dc, uc.observation_dim(), mix_seed(run.seed, 3));
  ReplayBuffer buffer(dc.replay_capacity);

  std::ofstream curve(run.output_dir / "learning_curve.csv", std::ios::binary);
  if (!curve) throw InputError("cannot write learning curve in " + run.output_dir.string());
  curve << kLearningCurveHeader << '\n';
  curve.flush();

  const auto run_start = Clock::now();
  std::vector<double> means;
  std::uint64_t train_credit = 0;
  for (std::size_t k = 0; k < run.n_iterations; ++k) {
    if (run.time_budget_s > 0.0 && seconds_since(run_start) >= run.time_budget_s) {
      result.budget_exhausted = true;
      break;
    }
    const auto iter_start = Clock::now();
    const std::shared_ptr<const Mlp> snapshot = learn ? learner->snapshot() : nullptr;
    const std::uint64_t step_base = result.env_steps;
    std::vector<EpisodeOutcome> outcomes(n_workers);
    std::string trajectory_text;

    auto work = [&](std::size_t w) {
      const std::uint64_t wseed = worker_seed(run.seed, k, w);
      Environment env(base ? *base : build_scenario(config, wseed), uc, mp);
      std::unique_ptr<Policy> policy;
      EpisodeOptions opt;
      if (learn) {
        auto q = std::make_unique<QNetworkPolicy>(snapshot, uc, wseed, epsilon_at(step_base, dc));
        QNetworkPolicy* qp = q.get();
        opt.before_step = [qp, step_base, &dc](std::uint64_t t) { qp->set_epsilon(epsilon_at(step_base + t, dc)); };
        opt.collect_transitions = true;
        policy = std::move(q);
      } else {
        policy = std::make_unique<UnequippedPolicy>();
      }
      std::ostringstream traj;
      if (run.log_trajectory && w == 0) {
        opt.trajectory = &traj;
      }
      outcomes[w] = run_episode(env, *policy, opt);
      if (opt.trajectory) trajectory_text = traj.str();
    };

    std::size_t failed = 0;
    try {
      parallel_for_workers(n_workers, work, &failed);
    } catch (const std::exception& e) {
      const std::string msg =
          "worker " + std::to_string(failed) + " failed in iteration " + std::to_string(k) + ": " + e.what();
      write_text_atomic(run.output_dir / "FAILED", msg + "\n");
      throw RunAborted(msg);
    }

    IterationRecord rec;
    rec.iteration = k;
    std::uint64_t steps = 0;
    double nmac_sum = 0.0;
    for (auto& o : outcomes) {
      steps += o.steps;
      rec.worker_returns.push_back(o.episode_return());
      rec.states += o.stats.aircraft_states;
      if (o.n_aircraft) {
        nmac_sum += static_cast<double>(count_events(o.events, EventKind::NMAC)) / static_cast<double>(o.n_aircraft);
      }
      if (learn) buffer.push_all(std::move(o.transitions));
    }
    result.env_steps += steps;

    if (learn) {
      train_credit += steps;
      const std::uint64_t n_train = train_credit / dc.train_every;
      train_credit %= dc.train_every;
      for (std::uint64_t i = 0; i < n_train; ++i) {
        if (!learner->train_step(buffer)) break;
      }
      result.train_steps = learner->train_steps();
    }

    rec.mean_reward = std::accumulate(rec.worker_returns.begin(), rec.worker_returns.end(), 0.0) /
                      static_cast<double>(n_workers);
    rec.norm_nmac = nmac_sum / static_cast<double>(n_workers);
    rec.wall_s = seconds_since(iter_start);
    curve << format_learning_curve_row(rec) << '\n';
    curve.flush();

    if (!trajectory_text.empty()) write_text_atomic(run.output_dir / "trajectory.csv", trajectory_text);

    means.push_back(rec.mean_reward);
    if (learn) {
      // Checkpoints hold the parameters that produced this iteration's returns.
      result.latest_checkpoint = ckpt_dir / "latest.ckpt";
      save_policy(*snapshot, result.latest_checkpoint);
      if (run.keep_all_checkpoints) {
        char name[32];
        std::snprintf(name, sizeof name, "iter_%04zu.ckpt", k);
        save_policy(*snapshot, ckpt_dir / name);
      }
      const std::size_t best = best_rolling_mean_index(means, run.rolling_window);
      if (best == k) {
        result.best_checkpoint = ckpt_dir / "best.ckpt";
        save_policy(*snapshot, result.best_checkpoint);
      }
      result.best_iteration = best;
    }
    result.records.push_back(std::move(rec));
  }
  if (learn) save_policy(learner->online(), ckpt_dir / "final.ckpt");
  return result;
}

EvaluationResult run_evaluation(const ExperimentConfig& config, const std::string& checkpoint) {
  config.validate();
  const RunSettings run = config.run();
  const UseCaseParams uc = config.use_case();
  const MetricsParams mp = config.metrics();
  const ScenarioSettings ss = config.scenario();

  std::shared_ptr<const Mlp> net;
  if (checkpoint != "unequipped") {
    net = std::make_shared<const Mlp>(load_policy(checkpoint, uc.observation_dim()));
  }

  EvaluationResult result;
  result.output_dir = run.output_dir;
  fs::create_directories(run.output_dir);
  config.save(run.output_dir / "config.json");

  std::optional<Scenario> base;
  if (!ss.randomize_per_worker) base = build_scenario(config, run.seed);
  const std::size_t n = run.eval_iterations;
  const std::size_t n_workers = std::min(run.n_workers, n);
  const std::uint64_t eval_stream = mix_seed(run.seed, 0xe7a1);

  auto scenario_for = [&](std::size_t i) {
    return base ? *base : build_scenario(config, mix_seed(eval_stream, i));
  };
  auto unequipped_run = [&](const Scenario& sc) {
    Environment env(sc, uc, mp);
    UnequippedPolicy p;
    return run_episode(env, p);
  };

  // A shared scenario makes every unequipped run identical; run it once.
  std::optional<EpisodeOutcome> shared_baseline;
  if (base) shared_baseline = unequipped_run(*base);

  result.iterations.resize(n);
  std::vector<SafetyEvent> events0;
  std::vector<SafetyEvent> baseline_events0;
  std::string trajectory_text;

  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += n_workers) {
      const Scenario sc = scenario_for(i);
      Environment env(sc, uc, mp);
      std::unique_ptr<Policy> policy;
      if (net) {
        policy = std::make_unique<QNetworkPolicy>(net, uc, mix_seed(eval_stream, i), 0.0);
      } else {
        policy = std::make_unique<UnequippedPolicy>();
      }
      EpisodeOptions opt;
      std::ostringstream traj;
      if (run.log_trajectory && i == 0) {
        opt.trajectory = &traj;
      }
      EpisodeOutcome algo = run_episode(env, *policy, opt);
      EpisodeOutcome baseline = shared_baseline ? *shared_baseline : unequipped_run(sc);

      IterationMetrics& m = result.iterations[i];
      m.nmac = count_events(algo.events, EventKind::NMAC);
      m.lowc = count_events(algo.events, EventKind::LoWC);
      m.unequipped_nmac = count_events(baseline.events, EventKind::NMAC);
      m.unequipped_lowc = count_events(baseline.events, EventKind::LoWC);
      m.n_aircraft = algo.n_aircraft;
      m.decisions = algo.stats.decisions;
      m.alerts = algo.stats.alerts;
      m.holding_time_s = algo.stats.holding_time_s;
      m.aircraft_states = algo.stats.aircraft_states;
      m.wall_s = algo.wall_s;
      if (i == 0) {
        events0 = std::move(algo.events);
        baseline_events0 = std::move(baseline.events);
        trajectory_text = traj.str();
      }
    }
  };
  parallel_for_workers(n_workers, work);

  result.report = aggregate(result.iterations);
  write_report(result.report, run.output_dir / "report.json");
  write_events_csv(events0, run.output_dir / "events.csv");
  write_events_csv(baseline_events0, run.output_dir / "events_unequipped.csv");
  if (run.log_trajectory) write_text_atomic(run.output_dir / "trajectory.csv", trajectory_text);
  return result;
}

}  // namespace cgym
