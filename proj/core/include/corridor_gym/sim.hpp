#pragma once

#include <cstdint>
#include <vector>

namespace cgym {

inline constexpr double kMetersPerSecondPerKnot = 1852.0 / 3600.0;
inline constexpr double kMetersPerFoot = 0.3048;

constexpr double knots_to_mps(double kt) { return kt * kMetersPerSecondPerKnot; }
constexpr double feet_to_m(double ft) { return ft * kMetersPerFoot; }

using AircraftId = std::uint32_t;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Speed advisory issued to one aircraft for one timestep. The numeric values
// are the wire encoding and the Q-network output index.
enum class SpeedCommand : int { Decelerate = 0, Hold = 1, Accelerate = 2 };

inline constexpr int kNumSpeedCommands = 3;

constexpr int to_index(SpeedCommand c) { return static_cast<int>(c); }
SpeedCommand command_from_index(int index);  // throws ContractViolation
const char* to_string(SpeedCommand c);

struct PerformanceEnvelope {
  double v_min = 0.0;                  // hover capable
  double v_max = knots_to_mps(150.0);  // 77.17 m/s
  double accel_mag = 1.5;              // m/s^2, both directions

  void validate() const;  // throws ConfigError
};

struct AircraftState {
  AircraftId id = 0;
  double x = 0.0;  // east, m
  double y = 0.0;  // north, m
  double z = 0.0;  // altitude, m
  double heading = 0.0;  // deg clockwise from north, [0, 360)
  double speed = 0.0;    // m/s
  double accel = 0.0;    // m/s^2, last applied
  std::vector<Point2> route;
  std::size_t next_wpt_index = 0;
  double dest_dist = 0.0;  // remaining along-route distance, m
  bool active = false;
  bool arrived = false;

  friend bool operator==(const AircraftState&, const AircraftState&) = default;
};

// Heading in [0, 360) from (x0,y0) toward (x1,y1); 0 is north.
double bearing_deg(double x0, double y0, double x1, double y1);

// Distance still to fly: to the current waypoint then along the remaining
// route legs. Zero once the route is exhausted.
double remaining_route_distance(const AircraftState& s);

// Advances one timestep: speed toward the command target (bounded by
// accel_mag * dt, never overshooting), then position along the heading to the
// current waypoint. Altitude is held. Throws ContractViolation for an
// inactive aircraft and ConfigError for dt <= 0.
AircraftState step_aircraft(const AircraftState& state, SpeedCommand cmd,
                            const PerformanceEnvelope& env, double dt);

// Captures the current waypoint if it lies within capture_radius
// (horizontal). Capturing the last waypoint deactivates the aircraft and marks
// it arrived.
AircraftState advance_waypoint(const AircraftState& state, double capture_radius);

double pairwise_distance(const AircraftState& a, const AircraftState& b);

}  // namespace cgym
