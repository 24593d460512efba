#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corridor_gym/ddqn.hpp"
#include "corridor_gym/env.hpp"
#include "corridor_gym/metrics.hpp"
#include "corridor_gym/scenario.hpp"

namespace cgym {

// Environment variable that overrides the configured seed.
inline constexpr const char* kSeedEnvVar = "CORRIDOR_GYM_SEED";

struct ScenarioSettings {
  std::string preset;                // "" or "overtake"; takes precedence over file
  double overtake_delay_s = 60.0;
  std::filesystem::path file;        // when set, loaded instead of generated
  NetworkParams network;
  FlightParams flights;
  std::filesystem::path overlay_log;
  bool randomize_per_worker = false;
};

struct RunSettings {
  std::string use_case = "corridor_separation";
  std::string algorithm = "ddqn";  // ddqn | unequipped
  std::size_t n_iterations = 10;
  std::size_t n_workers = 4;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/latest";
  std::size_t eval_iterations = 100;
  double time_budget_s = 0.0;  // 0 = no wall-clock limit
  bool log_trajectory = true;
  bool keep_all_checkpoints = false;
  std::size_t rolling_window = 25;
};

// Hierarchical experiment configuration. The default tree declares every key
// and its type; files and --set overrides may only touch declared keys.
//
//   use_case.*   environment and reward parameters
//   algorithm.*  DDQN hyperparameters
//   scenario.*   network/demand generation or a scenario file
//   metrics.*    event detection and holding thresholds
//   top level    run settings (n_iterations, n_workers, seed, output_dir, ...)
class ExperimentConfig {
 public:
  ExperimentConfig();

  static const nlohmann::json& defaults();
  static ExperimentConfig from_file(const std::filesystem::path& path);

  // Deep-merges `overlay`; unknown keys and type mismatches throw
  // ValidationError.
  void merge(const nlohmann::json& overlay);

  // Dotted-path override with the value parsed according to the key's
  // declared type ("algorithm.gamma=0.9" -> set("algorithm.gamma", "0.9")).
  void set(const std::string& dotted_key, const std::string& value);
  void set_assignment(const std::string& key_equals_value);

  // Applies CORRIDOR_GYM_SEED when present.
  void apply_environment();

  const nlohmann::json& tree() const { return tree_; }
  std::string dump() const;
  void save(const std::filesystem::path& path) const;

  // Typed views; each validates its section and throws ConfigError or
  // ValidationError.
  UseCaseParams use_case() const;
  DdqnConfig algorithm() const;
  ScenarioSettings scenario() const;
  MetricsParams metrics() const;
  RunSettings run() const;

  void validate() const;

 private:
  nlohmann::json tree_;
};

// All declared dotted keys.
std::vector<std::string> config_keys();

// Up to `limit` declared keys closest to `key` by edit distance.
std::vector<std::string> nearest_keys(const std::string& key, std::size_t limit = 3);

// Loads scenario.file or generates a scenario from the config, then applies
// the overlay log if configured.
Scenario build_scenario(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace cgym
