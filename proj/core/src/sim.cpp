#include "corridor_gym/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "corridor_gym/errors.hpp"

namespace cgym {

SpeedCommand command_from_index(int index) {
  if (index < 0 || index >= kNumSpeedCommands) {
    throw ContractViolation("speed command index out of range: " + std::to_string(index));
  }
  return static_cast<SpeedCommand>(index);
}

const char* to_string(SpeedCommand c) {
  switch (c) {
    case SpeedCommand::Decelerate: return "decelerate";
    case SpeedCommand::Hold: return "hold";
    case SpeedCommand::Accelerate: return "accelerate";
  }
  return "?";
}

void PerformanceEnvelope::validate() const {
  if (!(v_min >= 0.0) || !(v_min <= v_max)) {
    throw ConfigError("performance envelope requires 0 <= v_min <= v_max");
  }
  if (!(accel_mag > 0.0)) throw ConfigError("performance envelope requires accel_mag > 0");
}

double bearing_deg(double x0, double y0, double x1, double y1) {
  double deg = std::atan2(x1 - x0, y1 - y0) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double remaining_route_distance(const AircraftState& s) {
  if (s.next_wpt_index >= s.route.size()) return 0.0;
  const Point2& w = s.route[s.next_wpt_index];
  double d = std::hypot(w.x - s.x, w.y - s.y);
  for (std::size_t i = s.next_wpt_index + 1; i < s.route.size(); ++i) {
    d += std::hypot(s.route[i].x - s.route[i - 1].x, s.route[i].y - s.route[i - 1].y);
  }
  return d;
}

AircraftState step_aircraft(const AircraftState& state, SpeedCommand cmd,
                            const PerformanceEnvelope& env, double dt) {
  if (!state.active) {
    throw ContractViolation("step_aircraft on inactive aircraft " + std::to_string(state.id));
  }
  if (!(dt > 0.0)) throw ConfigError("timestep must be positive");

  AircraftState next = state;

  double target = state.speed;
  if (cmd == SpeedCommand::Decelerate) target = env.v_min;
  if (cmd == SpeedCommand::Accelerate) target = env.v_max;
  const double max_dv = env.accel_mag * dt;
  double v = state.speed;
  if (target > v) {
    v = std::min(target, v + max_dv);
  } else if (target < v) {
    v = std::max(target, v - max_dv);
  }
  v = std::clamp(v, env.v_min, env.v_max);
  next.accel = (v - state.speed) / dt;
  next.speed = v;

  if (state.next_wpt_index < state.route.size()) {
    const Point2& w = state.route[state.next_wpt_index];
    const double dx = w.x - state.x;
    const double dy = w.y - state.y;
    const double gap = std::hypot(dx, dy);
    if (gap > 0.0) {
      next.heading = bearing_deg(state.x, state.y, w.x, w.y);
      const double travel = v * dt;
      if (travel >= gap) {
        next.x = w.x;
        next.y = w.y;
      } else {
        next.x = state.x + dx / gap * travel;
        next.y = state.y + dy / gap * travel;
      }
    }
  }
  next.dest_dist = remaining_route_distance(next);
  return next;
}

AircraftState advance_waypoint(const AircraftState& state, double capture_radius) {
  if (!state.active || state.next_wpt_index >= state.route.size()) return state;
  const Point2& w = state.route[state.next_wpt_index];
  if (std::hypot(w.x - state.x, w.y - state.y) >= capture_radius) return state;

  AircraftState next = state;
  ++next.next_wpt_index;
  if (next.next_wpt_index >= next.route.size()) {
    next.active = false;
    next.arrived = true;
    next.dest_dist = 0.0;
  } else {
    next.dest_dist = remaining_route_distance(next);
    const Point2& nw = next.route[next.next_wpt_index];
    if (nw.x != next.x || nw.y != next.y) {
      next.heading = bearing_deg(next.x, next.y, nw.x, nw.y);
    }
  }
  return next;
}

double pairwise_distance(const AircraftState& a, const AircraftState& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace cgym
