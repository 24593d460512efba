#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corridor_gym/sim.hpp"

namespace cgym {

using VertiportId = std::int32_t;
using RouteId = std::int32_t;

inline constexpr const char* kScenarioFormat = "corridor-gym-scenario";
inline constexpr int kScenarioVersion = 1;

// Background (overlay) tracks get ids offset by this base so they never collide
// with flight-plan ids.
inline constexpr AircraftId kBackgroundIdBase = 1'000'000;

inline constexpr double kMinCruiseSpeed = knots_to_mps(87.0);   // 44.76 m/s
inline constexpr double kMaxCruiseSpeed = knots_to_mps(150.0);  // 77.17 m/s
inline constexpr double kAltitudeNoise = feet_to_m(100.0);      // 30.48 m

struct Vertiport {
  VertiportId id = 0;
  std::string name;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vertiport&, const Vertiport&) = default;
};

struct Route {
  RouteId id = 0;
  VertiportId origin = 0;
  VertiportId destination = 0;
  std::vector<Point2> waypoints;       // origin first, destination last
  std::vector<double> lane_altitudes;  // strictly increasing, m

  double length() const;

  friend bool operator==(const Route&, const Route&) = default;
};

struct FlightPlan {
  AircraftId id = 0;
  RouteId route = 0;
  double departure_time = 0.0;  // s from scenario start
  double cruise_speed = 0.0;    // m/s
  std::int32_t lane_index = 0;  // into route.lane_altitudes
  double lane_altitude = 0.0;   // base lane plus noise, m

  friend bool operator==(const FlightPlan&, const FlightPlan&) = default;
};

struct TrackSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const TrackSample&, const TrackSample&) = default;
};

// Non-controllable scripted traffic, linearly interpolated between samples and
// present only within [first sample time, last sample time].
struct BackgroundTrack {
  AircraftId id = 0;
  std::vector<TrackSample> samples;

  friend bool operator==(const BackgroundTrack&, const BackgroundTrack&) = default;
};

// Reference point for the equirectangular projection of geographic inputs.
struct GeoOrigin {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  friend bool operator==(const GeoOrigin&, const GeoOrigin&) = default;
};

Point2 project(const GeoOrigin& origin, double lat_deg, double lon_deg);

struct Network {
  std::vector<Vertiport> vertiports;
  std::vector<Route> routes;

  friend bool operator==(const Network&, const Network&) = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  double duration = 0.0;  // departure window, s
  GeoOrigin origin;
  std::vector<Vertiport> vertiports;
  std::vector<Route> routes;
  std::vector<FlightPlan> flights;
  std::vector<BackgroundTrack> background;

  const Route& route(RouteId id) const;      // throws ValidationError
  const Vertiport& vertiport(VertiportId id) const;

  // Cross-reference and invariant checks; throws ValidationError naming the
  // offending id.
  void validate() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

enum class Layout { Ring, Grid, File };

Layout parse_layout(const std::string& name);  // throws ConfigError

struct NetworkParams {
  int n_vertiports = 29;
  Layout layout = Layout::Ring;
  std::filesystem::path file;      // Layout::File only
  double spacing_m = 4000.0;       // distance between adjacent vertiports
  int n_lanes = 4;
  double base_altitude_m = feet_to_m(1000.0);
  double lane_spacing_m = feet_to_m(500.0);
  double waypoint_spacing_m = 1000.0;
  int extra_od_pairs = 0;          // seeded random chords (ring/grid)
};

// Corridor network. Each corridor (unordered vertiport pair) yields a forward
// and a reverse route sharing one set of stacked lanes.
Network generate_network(const NetworkParams& params, std::uint64_t seed);

enum class DemandModel { Poisson, Schedule };

DemandModel parse_demand(const std::string& name);

struct FlightParams {
  int n_aircraft = 100;
  double duration_s = 1500.0;
  DemandModel demand = DemandModel::Poisson;
  std::filesystem::path schedule_file;  // DemandModel::Schedule only
  double min_speed = kMinCruiseSpeed;
  double max_speed = kMaxCruiseSpeed;
  double altitude_noise_m = kAltitudeNoise;
};

// Flight plans sorted by departure time with ids 1..n. Lanes are assigned as
// the lowest lane of the corridor whose occupancy windows do not overlap the
// new flight's [departure, departure + length / cruise_speed) window. Throws
// LaneExhaustionError when every lane is busy.
std::vector<FlightPlan> generate_flights(const Network& network, const FlightParams& params,
                                         std::uint64_t seed);

Scenario make_scenario(Network network, std::vector<FlightPlan> flights, double duration,
                       std::uint64_t seed);

// Two flights on one straight 12 km route and lane: a leader at the minimum
// cruise speed departing at t = 0 and a follower at the maximum cruise speed
// departing `follower_delay_s` later. Flown unequipped, the follower runs
// through the leader.
Scenario make_overtake_scenario(double follower_delay_s = 60.0, double route_length_m = 12'000.0);

void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

std::string scenario_to_string(const Scenario& scenario);
Scenario scenario_from_string(const std::string& text);

// Network-only file (vertiports and routes), used by Layout::File.
Network load_network(const std::filesystem::path& path);

// Reads a time-sorted traffic log (columns time_s,track_id,x_m,y_m,z_m or
// time_s,track_id,lat,lon,alt_m) into background tracks.
std::vector<BackgroundTrack> load_traffic_log(const std::filesystem::path& path,
                                              const GeoOrigin& origin);

Scenario overlay_traffic(const Scenario& scenario, const std::filesystem::path& traffic_log);

}  // namespace cgym
