#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "corridor_gym/mlp.hpp"
#include "corridor_gym/random.hpp"
#include "corridor_gym/replay_buffer.hpp"
#include "corridor_gym/sim.hpp"

namespace cgym {

// Double-DQN hyperparameters. Defaults are the full-scale reference values;
// desk-scale runs override them from the experiment config.
struct DdqnConfig {
  std::size_t batch_size = 512;
  std::size_t hidden_nodes = 128;
  std::size_t hidden_layers = 2;
  double gamma = 0.99;
  std::uint64_t eps_decay_steps = 500'000;
  double eps_start = 0.999;
  double eps_end = 0.0001;
  std::size_t replay_capacity = 5'000'000;
  double learning_rate = 0.0001;
  std::uint64_t target_update_freq = 50'000;
  OptimizerKind optimizer = OptimizerKind::SGD;
  // Environment steps (summed over workers) per gradient step.
  std::uint64_t train_every = 1;

  void validate() const;  // throws ConfigError
};

// Linear from eps_start at step 0 to eps_end at eps_decay_steps, then flat.
double epsilon_at(std::uint64_t step, const DdqnConfig& cfg);

// Index of the largest Q-value; ties go to the lowest index.
int argmax_q(std::span<const double> q);

// Uniform random action with probability eps, otherwise the greedy one.
SpeedCommand act_epsilon_greedy(const Mlp& net, std::span<const float> obs, double eps, Rng& rng);

// y = r                                         if done
// y = r + gamma * Q_target(s', argmax_a Q_online(s', a))   otherwise
double ddqn_target(double reward, bool done, double gamma, std::span<const double> q_online_next,
                   std::span<const double> q_target_next);

double ddqn_target(const Transition& t, const Mlp& online, const Mlp& target, double gamma);

// Network shape [input_dim, hidden_nodes x hidden_layers, 3].
Mlp make_q_network(std::size_t input_dim, const DdqnConfig& cfg);

// Online/target network pair with its optimizer. Training steps must be
// serialized by the caller; snapshots are immutable copies safe to hand to
// rollout workers.
class DdqnLearner {
 public:
  DdqnLearner(DdqnConfig cfg, std::size_t input_dim, std::uint64_t seed);

  // One mini-batch gradient step on the mean squared TD error. Returns the
  // pre-update batch loss, or nullopt when the buffer holds fewer than
  // batch_size transitions. Copies online into target every
  // target_update_freq steps.
  std::optional<double> train_step(const ReplayBuffer& buffer);

  std::shared_ptr<const Mlp> snapshot() const { return std::make_shared<const Mlp>(online_); }

  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  void set_online(Mlp net);  // also syncs target
  void sync_target() { target_ = online_; }

  std::uint64_t train_steps() const { return steps_; }
  const DdqnConfig& config() const { return cfg_; }

 private:
  DdqnConfig cfg_;
  Mlp online_;
  Mlp target_;
  Optimizer optimizer_;
  Rng rng_;
  std::uint64_t steps_ = 0;
};

// Checkpoint layout (little-endian):
//   8 bytes  magic "CGYMPOL1"
//   u32      format version (1)
//   u64      architecture hash (FNV-1a of layer sizes and activation)
//   u32      activation (0 relu, 1 linear)
//   u32      number of layer sizes L, then L x u64 sizes
//   per layer: weight (out x in, column-major f64), bias (out f64)
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t architecture_hash(const Mlp& net);

void save_policy(const Mlp& net, const std::filesystem::path& path);

// Throws LoadError on bad magic, version, hash, truncation, or when
// expected_input_dim is given and differs.
Mlp load_policy(const std::filesystem::path& path, std::optional<std::size_t> expected_input_dim = {});

}  // namespace cgym
