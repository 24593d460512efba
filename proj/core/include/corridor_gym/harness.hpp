#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corridor_gym/config.hpp"
#include "corridor_gym/ddqn.hpp"
#include "corridor_gym/errors.hpp"
#include "corridor_gym/env.hpp"
#include "corridor_gym/metrics.hpp"
#include "corridor_gym/policy.hpp"
#include "corridor_gym/replay_buffer.hpp"

namespace cgym {

struct EpisodeOptions {
  bool collect_transitions = false;
  std::ostream* trajectory = nullptr;  // receives the header and one row per aircraft per step
  // Called before each decision with the episode-local step index.
  std::function<void(std::uint64_t)> before_step;
};

struct EpisodeOutcome {
  double total_reward = 0.0;  // summed over aircraft and steps
  std::uint64_t steps = 0;
  std::size_t n_aircraft = 0;  // controllable flights in the scenario
  EpisodeStats stats;
  std::vector<SafetyEvent> events;
  std::vector<Transition> transitions;
  double wall_s = 0.0;

  // Episode return: total reward per controllable aircraft.
  double episode_return() const { return n_aircraft ? total_reward / static_cast<double>(n_aircraft) : 0.0; }
};

// Runs one episode from reset to done. Transitions pair each acting
// aircraft's scaled pre-step observation with its post-step one.
EpisodeOutcome run_episode(Environment& env, Policy& policy, const EpisodeOptions& options = {});

inline constexpr const char* kLearningCurveHeader = "iteration,mean_reward,norm_nmac,wall_s,states";

struct IterationRecord {
  std::size_t iteration = 0;
  double mean_reward = 0.0;  // mean of the workers' episode returns
  double norm_nmac = 0.0;    // mean of the workers' NMAC / n_aircraft
  double wall_s = 0.0;
  std::size_t states = 0;
  std::vector<double> worker_returns;
};

std::string format_learning_curve_row(const IterationRecord& r);

// Reads iteration,mean_reward,norm_nmac,wall_s,states rows.
std::vector<IterationRecord> read_learning_curve(const std::filesystem::path& path);

// Index maximizing the trailing mean over min(window, i + 1) values; the
// earliest index wins ties. Throws ContractViolation on an empty series.
std::size_t best_rolling_mean_index(std::span<const double> series, std::size_t window);

struct TrainingResult {
  std::vector<IterationRecord> records;
  std::optional<std::size_t> best_iteration;
  std::filesystem::path output_dir;
  std::filesystem::path best_checkpoint;
  std::filesystem::path latest_checkpoint;
  std::uint64_t env_steps = 0;
  std::uint64_t train_steps = 0;
  bool budget_exhausted = false;
};

// Raised when a rollout worker fails; outputs written so far are kept.
class RunAborted : public Error {
 public:
  using Error::Error;
};

// Output directory layout:
//   config.json          fully-resolved configuration
//   learning_curve.csv   one row per iteration
//   checkpoints/latest.ckpt, checkpoints/best.ckpt (iter_NNNN.ckpt when kept)
//   trajectory.csv       worker 0 of the final iteration, when enabled
TrainingResult run_training(const ExperimentConfig& config);

struct EvaluationResult {
  EvalReport report;
  std::vector<IterationMetrics> iterations;
  std::filesystem::path output_dir;
};

// Greedy evaluation of `checkpoint` ("unequipped" selects the baseline
// policy) against a matching unequipped run per iteration. Writes
// config.json, report.json, events.csv, events_unequipped.csv and, when
// enabled, trajectory.csv for iteration 0.
EvaluationResult run_evaluation(const ExperimentConfig& config, const std::string& checkpoint);

// Scenario for worker `worker` of iteration `iteration`: the shared base
// scenario unless scenario.randomize_per_worker is set.
std::uint64_t worker_seed(std::uint64_t seed, std::uint64_t iteration, std::uint64_t worker);

}  // namespace cgym
