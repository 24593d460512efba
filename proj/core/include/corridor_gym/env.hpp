#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "corridor_gym/metrics.hpp"
#include "corridor_gym/scenario.hpp"
#include "corridor_gym/sim.hpp"

namespace cgym {

// Corridor separation-assurance use-case parameters. Defaults are the
// reference values: 150 m NMAC, 450 m LoWC, 3000 m reward horizon, 2
// waypoints, 30 intruders, alpha 1, delta 0.0003, psi 0.001, omega 0.001.
struct UseCaseParams {
  double d_nmac = 150.0;
  double d_lowc = 450.0;
  double d_max = 3000.0;
  int n_wpt = 2;
  int n_intruders = 30;
  double alpha = 1.0;
  double delta = 0.0003;
  double psi = 0.001;
  double omega = 0.001;
  double dt = 1.0;

  PerformanceEnvelope envelope;
  double capture_radius = 100.0;
  bool remove_on_nmac = false;
  // Episode time limit; 0 selects scenario duration + 3600 s.
  double max_episode_s = 0.0;

  void validate() const;  // throws ConfigError

  std::size_t ownship_dim() const { return 5 + 2 * static_cast<std::size_t>(n_wpt); }
  std::size_t intruder_dim() const { return 7 + 2 * static_cast<std::size_t>(n_wpt); }
  std::size_t observation_dim() const {
    return ownship_dim() + static_cast<std::size_t>(n_intruders) * intruder_dim();
  }

  MetricsParams metrics(double hold_speed_mps = 2.5, double rearm_margin = 0.0) const;
};

// Fixed-length ownship + padded-intruder feature vector.
//
//   ownship:  heading, altitude, accel, speed, dest_dist,
//             (wpt_x - x, wpt_y - y) for the next n_wpt waypoints
//   intruder: rel_x, rel_y, rel_z, accel, speed, dest_dist, distance,
//             (intruder wpt_x - own x, intruder wpt_y - own y) * n_wpt
//
// Intruders are sorted by distance ascending (ties by id); blocks past
// valid_count are all zero.
struct Observation {
  std::vector<double> features;
  std::size_t valid_count = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation build_observation(const AircraftState& ownship, std::span<const AircraftState> others,
                              const UseCaseParams& params);

// Network input view: positions and distances / d_max, speeds / v_max,
// altitudes / 1000 m, heading / 360, accelerations / accel_mag. Padding stays
// zero.
std::vector<float> scale_observation(const Observation& obs, const UseCaseParams& params);

// 3-D distance from ownship to the nearest other active aircraft; infinity
// when there is none.
double closest_distance(const AircraftState& ownship, std::span<const AircraftState> others);

// R = R(s,h) + R(a) - omega, with
//   R(s,h) = -1 if d < d_nmac; -alpha + delta * d if d_nmac <= d < d_max; else 0
//   R(a)   = 0 for Hold, -psi otherwise.
double reward_from_distance(double closest, SpeedCommand action, const UseCaseParams& params);

double reward(const AircraftState& ownship, std::span<const AircraftState> others, SpeedCommand action,
              const UseCaseParams& params);

// Kinematic slice of an aircraft, as logged and sent over the wire.
struct KinematicState {
  AircraftId id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  bool controllable = true;

  friend bool operator==(const KinematicState&, const KinematicState&) = default;
};

struct AgentStep {
  Observation observation;
  std::optional<double> reward;         // absent for aircraft spawned this step
  std::optional<SpeedCommand> action;   // echo of the applied command
  bool done = false;
};

struct StepResult {
  double time = 0.0;
  std::map<AircraftId, AgentStep> agents;  // every controllable aircraft present
  bool done = false;
  std::vector<SafetyEvent> events;         // intervals that opened this step
  std::vector<KinematicState> snapshot;    // every aircraft present, by id
};

struct EpisodeStats {
  std::size_t decisions = 0;
  std::size_t alerts = 0;
  double holding_time_s = 0.0;
  std::size_t aircraft_states = 0;  // sum over steps of agent observations
  std::size_t spawned = 0;
  std::size_t arrived = 0;
  std::size_t removed = 0;
};

// Multi-agent corridor environment. Single-threaded; independent instances
// share nothing.
class Environment {
 public:
  Environment(Scenario scenario, UseCaseParams params, MetricsParams metrics = {});

  StepResult reset();

  // Missing actions default to Hold. Throws ContractViolation for an action
  // addressed to an id that is not an active controllable aircraft, or when
  // called after the episode finished.
  StepResult step(const std::map<AircraftId, SpeedCommand>& actions);

  double time() const { return time_; }
  bool done() const { return done_; }
  double time_limit() const { return time_limit_; }
  const Scenario& scenario() const { return scenario_; }
  const UseCaseParams& params() const { return params_; }
  const EpisodeStats& stats() const { return stats_; }

  std::size_t pending_count() const { return scenario_.flights.size() - next_flight_; }
  std::size_t active_count() const { return active_.size(); }

  // Active controllable aircraft, ordered by id.
  const std::map<AircraftId, AircraftState>& aircraft() const { return active_; }

  // All events so far; intervals still open are closed at the current time.
  std::vector<SafetyEvent> events() const;

 private:
  void spawn_due();
  void update_background();
  StepResult finish_step(const std::map<AircraftId, SpeedCommand>& applied,
                         std::map<AircraftId, AircraftState> departed);

  Scenario scenario_;
  UseCaseParams params_;
  MetricsParams metrics_;
  double time_limit_ = 0.0;

  double time_ = 0.0;
  std::uint64_t step_index_ = 0;
  bool done_ = false;
  bool started_ = false;
  std::size_t next_flight_ = 0;
  std::vector<std::size_t> flight_order_;
  std::map<AircraftId, AircraftState> active_;
  std::vector<AircraftState> background_;  // currently present tracks
  EventDetector detector_;
  EpisodeStats stats_;
};

// Trajectory log: time_s,ac_id,x_m,y_m,z_m,heading_deg,speed_mps,accel_mps2,action,reward
// One row per snapshot aircraft per step; action and reward are empty where
// the aircraft did not act.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out);
  void write(const StepResult& result);

 private:
  std::ostream& out_;
};

struct TrajectoryRecord {
  double time = 0.0;
  KinematicState state;  // controllable is inferred from a non-empty action
  std::optional<int> action;
  std::optional<double> reward;
};

// Throws InputError on malformed or time-reversed rows.
std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path);

std::vector<PositionRecord> to_position_records(std::span<const TrajectoryRecord> records);

}  // namespace cgym
