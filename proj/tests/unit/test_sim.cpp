#include <gtest/gtest.h>

#include <cmath>

#include "corridor_gym/errors.hpp"
#include "corridor_gym/random.hpp"
#include "corridor_gym/sim.hpp"

using namespace cgym;

namespace {

AircraftState straight_east(double speed, double length = 10'000.0) {
  AircraftState s;
  s.id = 1;
  s.route = {{0, 0}, {length / 2, 0}, {length, 0}};
  s.next_wpt_index = 1;
  s.speed = speed;
  s.z = 300;
  s.heading = 90;
  s.active = true;
  s.dest_dist = remaining_route_distance(s);
  return s;
}

}  // namespace

TEST(Units, KnotAndFootConversionsAreExact) {
  EXPECT_NEAR(knots_to_mps(150.0), 77.16666666666667, 1e-12);
  EXPECT_NEAR(knots_to_mps(87.0), 44.75666666666667, 1e-12);
  EXPECT_DOUBLE_EQ(feet_to_m(1000.0), 304.8);
}

TEST(SpeedCommand, IndexRoundTripAndRange) {
  for (int i = 0; i < kNumSpeedCommands; ++i) EXPECT_EQ(to_index(command_from_index(i)), i);
  EXPECT_THROW(command_from_index(3), ContractViolation);
  EXPECT_THROW(command_from_index(-1), ContractViolation);
  EXPECT_STREQ(to_string(SpeedCommand::Hold), "hold");
}

TEST(Bearing, CardinalDirections) {
  EXPECT_DOUBLE_EQ(bearing_deg(0, 0, 0, 10), 0.0);
  EXPECT_DOUBLE_EQ(bearing_deg(0, 0, 10, 0), 90.0);
  EXPECT_DOUBLE_EQ(bearing_deg(0, 0, 0, -10), 180.0);
  EXPECT_DOUBLE_EQ(bearing_deg(0, 0, -10, 0), 270.0);
}

TEST(StepAircraft, HoldKeepsSpeedAndAdvancesBySpeedTimesDt) {
  const PerformanceEnvelope env;
  const auto s0 = straight_east(50.0);
  const auto s1 = step_aircraft(s0, SpeedCommand::Hold, env, 1.0);
  EXPECT_DOUBLE_EQ(s1.speed, 50.0);
  EXPECT_DOUBLE_EQ(s1.accel, 0.0);
  EXPECT_DOUBLE_EQ(s1.x, 50.0);
  EXPECT_DOUBLE_EQ(s1.y, 0.0);
  EXPECT_DOUBLE_EQ(s1.z, 300.0);
  EXPECT_DOUBLE_EQ(s1.heading, 90.0);
  EXPECT_NEAR(s1.dest_dist, 10'000.0 - 50.0, 1e-9);
}

TEST(StepAircraft, AccelerationIsRateLimitedAndDoesNotOvershoot) {
  const PerformanceEnvelope env;
  auto s = straight_east(76.0);
  s = step_aircraft(s, SpeedCommand::Accelerate, env, 1.0);
  EXPECT_DOUBLE_EQ(s.speed, env.v_max);
  EXPECT_NEAR(s.accel, env.v_max - 76.0, 1e-12);
  s = step_aircraft(s, SpeedCommand::Accelerate, env, 1.0);
  EXPECT_DOUBLE_EQ(s.speed, env.v_max);
  EXPECT_DOUBLE_EQ(s.accel, 0.0);

  auto d = straight_east(50.0);
  d = step_aircraft(d, SpeedCommand::Decelerate, env, 2.0);
  EXPECT_DOUBLE_EQ(d.speed, 47.0);
  EXPECT_DOUBLE_EQ(d.accel, -1.5);
}

TEST(StepAircraft, DecelerateReachesHoverAndStops) {
  const PerformanceEnvelope env;
  auto s = straight_east(3.0);
  s = step_aircraft(s, SpeedCommand::Decelerate, env, 1.0);
  s = step_aircraft(s, SpeedCommand::Decelerate, env, 1.0);
  EXPECT_DOUBLE_EQ(s.speed, 0.0);
  const double x = s.x;
  s = step_aircraft(s, SpeedCommand::Decelerate, env, 1.0);
  EXPECT_DOUBLE_EQ(s.x, x);
}

TEST(StepAircraft, RejectsInactiveAircraftAndBadDt) {
  const PerformanceEnvelope env;
  auto s = straight_east(50.0);
  EXPECT_THROW(step_aircraft(s, SpeedCommand::Hold, env, 0.0), ConfigError);
  s.active = false;
  EXPECT_THROW(step_aircraft(s, SpeedCommand::Hold, env, 1.0), ContractViolation);
}

TEST(Waypoints, CaptureAdvancesAndLastCaptureArrives) {
  const PerformanceEnvelope env;
  auto s = straight_east(77.0, 1000.0);
  int steps = 0;
  while (s.active && steps < 100) {
    s = advance_waypoint(step_aircraft(s, SpeedCommand::Hold, env, 1.0), 100.0);
    ++steps;
  }
  EXPECT_FALSE(s.active);
  EXPECT_TRUE(s.arrived);
  EXPECT_DOUBLE_EQ(s.dest_dist, 0.0);
  // 1000 m at 77 m/s with a 100 m capture radius: 900 / 77 -> 12 steps.
  EXPECT_EQ(steps, 12);
}

TEST(Waypoints, MovementClampsAtTheWaypoint) {
  const PerformanceEnvelope env;
  AircraftState s = straight_east(77.0, 100.0);
  s.route = {{0, 0}, {30, 0}};
  s.dest_dist = remaining_route_distance(s);
  s = step_aircraft(s, SpeedCommand::Hold, env, 1.0);
  EXPECT_DOUBLE_EQ(s.x, 30.0);
}

TEST(Distance, ThreeDimensional) {
  AircraftState a, b;
  a.x = 0, a.y = 0, a.z = 0;
  b.x = 3, b.y = 4, b.z = 12;
  EXPECT_DOUBLE_EQ(pairwise_distance(a, b), 13.0);
}

TEST(Envelope, Validation) {
  PerformanceEnvelope e;
  EXPECT_NO_THROW(e.validate());
  e.v_min = 80.0;
  EXPECT_THROW(e.validate(), ConfigError);
  e = {};
  e.accel_mag = 0.0;
  EXPECT_THROW(e.validate(), ConfigError);
}

// Property: under arbitrary command sequences speed stays inside the envelope
// and changes by at most accel_mag * dt per step.
TEST(StepAircraftProperty, SpeedStaysInEnvelope) {
  const PerformanceEnvelope env;
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = straight_east(rng.uniform(env.v_min, env.v_max), 1e7);
    const double dt = rng.uniform(0.1, 2.0);
    for (int k = 0; k < 200; ++k) {
      const auto cmd = command_from_index(static_cast<int>(rng.index(3)));
      const auto next = step_aircraft(s, cmd, env, dt);
      ASSERT_GE(next.speed, env.v_min);
      ASSERT_LE(next.speed, env.v_max);
      ASSERT_LE(std::abs(next.speed - s.speed), env.accel_mag * dt + 1e-12);
      ASSERT_NEAR(next.x - s.x, next.speed * dt, 1e-6);
      s = next;
    }
  }
}

TEST(Rng, SeededStreamsAreReproducibleAndIndexIsInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng r(1);
  for (int i = 0; i < 10'000; ++i) {
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.index(7), 7u);
  }
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}
