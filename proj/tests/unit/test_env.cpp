#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "../support/oracles.hpp"
#include "../support/temp_dir.hpp"
#include "corridor_gym/env.hpp"
#include "corridor_gym/errors.hpp"

using namespace cgym;

namespace {

AircraftState aircraft(AircraftId id, double x, double y, double z = 300.0) {
  AircraftState s;
  s.id = id;
  s.x = x;
  s.y = y;
  s.z = z;
  s.speed = 60.0;
  s.heading = 90.0;
  s.route = {{x, y}, {x + 1000, y}, {x + 2000, y + 500}};
  s.next_wpt_index = 1;
  s.dest_dist = remaining_route_distance(s);
  s.active = true;
  return s;
}

// Two vertiports `length` apart on the x axis with one route each way.
Scenario line_scenario(double length, std::vector<FlightPlan> flights, double duration = 100.0) {
  Network net;
  net.vertiports = {{0, "A", 0.0, 0.0}, {1, "B", length, 0.0}};
  net.routes = {{0, 0, 1, {{0, 0}, {length, 0}}, {300.0, 450.0}}, {1, 1, 0, {{length, 0}, {0, 0}}, {300.0, 450.0}}};
  return make_scenario(std::move(net), std::move(flights), duration, 0);
}

}  // namespace

TEST(Observation, LengthIs339WithReferenceParameters) {
  const UseCaseParams p;
  EXPECT_EQ(p.observation_dim(), 339u);
  const auto obs = build_observation(aircraft(1, 0, 0), {}, p);
  EXPECT_EQ(obs.features.size(), 339u);
  EXPECT_EQ(obs.valid_count, 0u);
  for (std::size_t i = p.ownship_dim(); i < obs.features.size(); ++i) ASSERT_EQ(obs.features[i], 0.0);
  EXPECT_DOUBLE_EQ(obs.features[0], 90.0);
  EXPECT_DOUBLE_EQ(obs.features[1], 300.0);
  EXPECT_DOUBLE_EQ(obs.features[3], 60.0);
  EXPECT_DOUBLE_EQ(obs.features[5], 1000.0);
  EXPECT_DOUBLE_EQ(obs.features[6], 0.0);
  EXPECT_DOUBLE_EQ(obs.features[7], 2000.0);
  EXPECT_DOUBLE_EQ(obs.features[8], 500.0);
}

TEST(Observation, IntruderBlockContents) {
  const UseCaseParams p;
  const auto own = aircraft(1, 100, 200, 300);
  auto other = aircraft(2, 400, 600, 330);
  other.accel = -1.5;
  other.speed = 44.0;
  const std::vector<AircraftState> all{own, other};
  const auto obs = build_observation(own, all, p);
  ASSERT_EQ(obs.valid_count, 1u);
  const std::size_t b = p.ownship_dim();
  EXPECT_DOUBLE_EQ(obs.features[b + 0], 300.0);
  EXPECT_DOUBLE_EQ(obs.features[b + 1], 400.0);
  EXPECT_DOUBLE_EQ(obs.features[b + 2], 30.0);
  EXPECT_DOUBLE_EQ(obs.features[b + 3], -1.5);
  EXPECT_DOUBLE_EQ(obs.features[b + 4], 44.0);
  EXPECT_DOUBLE_EQ(obs.features[b + 5], other.dest_dist);
  EXPECT_DOUBLE_EQ(obs.features[b + 6], std::sqrt(300.0 * 300 + 400 * 400 + 30 * 30));
  // Intruder waypoints relative to the ownship.
  EXPECT_DOUBLE_EQ(obs.features[b + 7], 1400.0 - 100.0);
  EXPECT_DOUBLE_EQ(obs.features[b + 8], 600.0 - 200.0);
}

TEST(Observation, NearestThirtyKeptInAscendingOrder) {
  const UseCaseParams p;
  const auto own = aircraft(1, 0, 0);
  std::vector<AircraftState> all{own};
  // 31 intruders on a ring at distinct radii, inserted in scrambled order.
  for (int k = 0; k < 31; ++k) {
    const int r = (k * 17) % 31;
    const double ang = 2.0 * std::numbers::pi * k / 31.0;
    all.push_back(aircraft(static_cast<AircraftId>(100 + r), 500.0 * (r + 1) * std::cos(ang),
                           500.0 * (r + 1) * std::sin(ang)));
  }
  const auto obs = build_observation(own, all, p);
  ASSERT_EQ(obs.valid_count, 30u);
  double prev = -1.0;
  for (std::size_t i = 0; i < 30; ++i) {
    const double d = obs.features[p.ownship_dim() + i * p.intruder_dim() + 6];
    ASSERT_GT(d, prev);
    prev = d;
  }
  // The farthest (radius 31 * 500 m) is the one excluded.
  EXPECT_NEAR(prev, 500.0 * 30, 1e-6);
}

TEST(Observation, EqualDistanceTiesBreakById) {
  UseCaseParams p;
  p.n_intruders = 2;
  const auto own = aircraft(1, 0, 0);
  const std::vector<AircraftState> all{own, aircraft(9, 100, 0), aircraft(4, -100, 0)};
  const auto obs = build_observation(own, all, p);
  EXPECT_DOUBLE_EQ(obs.features[p.ownship_dim()], -100.0);
  EXPECT_DOUBLE_EQ(obs.features[p.ownship_dim() + p.intruder_dim()], 100.0);
}

TEST(Observation, HorizontalTranslationInvariance) {
  const UseCaseParams p;
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AircraftState> all;
    for (AircraftId id = 1; id <= 12; ++id) {
      all.push_back(aircraft(id, rng.uniform(-5000, 5000), rng.uniform(-5000, 5000), rng.uniform(250, 400)));
    }
    auto moved = all;
    for (auto& s : moved) {
      s.x += 10'000;
      s.y += 10'000;
      for (auto& w : s.route) {
        w.x += 10'000;
        w.y += 10'000;
      }
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto a = build_observation(all[i], all, p);
      const auto b = build_observation(moved[i], moved, p);
      ASSERT_EQ(a.valid_count, b.valid_count);
      for (std::size_t k = 0; k < a.features.size(); ++k) ASSERT_NEAR(a.features[k], b.features[k], 1e-9);
    }
  }
}

TEST(Observation, ScaledViewKeepsPaddingZero) {
  const UseCaseParams p;
  const auto own = aircraft(1, 0, 0);
  const std::vector<AircraftState> all{own, aircraft(2, 300, 0)};
  const auto obs = build_observation(own, all, p);
  const auto scaled = scale_observation(obs, p);
  ASSERT_EQ(scaled.size(), 339u);
  EXPECT_FLOAT_EQ(scaled[0], 0.25f);
  EXPECT_FLOAT_EQ(scaled[1], 0.3f);
  EXPECT_FLOAT_EQ(scaled[3], static_cast<float>(60.0 / p.envelope.v_max));
  EXPECT_FLOAT_EQ(scaled[p.ownship_dim()], 0.1f);
  for (std::size_t i = p.ownship_dim() + p.intruder_dim(); i < scaled.size(); ++i) ASSERT_EQ(scaled[i], 0.0f);
}

TEST(Reward, ReferenceExamples) {
  const UseCaseParams p;
  EXPECT_NEAR(reward_from_distance(1000, SpeedCommand::Hold, p), -0.701, 1e-12);
  EXPECT_NEAR(reward_from_distance(5000, SpeedCommand::Hold, p), -0.001, 1e-12);
  EXPECT_NEAR(reward_from_distance(100, SpeedCommand::Accelerate, p), -1.002, 1e-12);
  EXPECT_NEAR(reward(aircraft(1, 0, 0), {}, SpeedCommand::Decelerate, p), -0.002, 1e-12);
}

TEST(Reward, DiscontinuitiesAreKeptAsDefined) {
  const UseCaseParams p;
  EXPECT_DOUBLE_EQ(reward_from_distance(std::nextafter(150.0, 0.0), SpeedCommand::Hold, p), -1.001);
  EXPECT_NEAR(reward_from_distance(150.0, SpeedCommand::Hold, p), -0.955 - 0.001, 1e-12);
  EXPECT_NEAR(reward_from_distance(std::nextafter(3000.0, 0.0), SpeedCommand::Hold, p), -0.1 - 0.001, 1e-12);
  EXPECT_DOUBLE_EQ(reward_from_distance(3000.0, SpeedCommand::Hold, p), -0.001);
}

// Properties: bounded, non-decreasing on [150, 3000), matches the oracle.
TEST(Reward, BoundsMonotonicityAndOracle) {
  const UseCaseParams p;
  Rng rng(11);
  double prev = -2.0;
  for (int i = 0; i < 5000; ++i) {
    const double d = rng.uniform(0, 6000);
    const int a = static_cast<int>(rng.index(3));
    const double r = reward_from_distance(d, command_from_index(a), p);
    ASSERT_GE(r, -1.002);
    ASSERT_LE(r, -0.001);
    ASSERT_NEAR(r, oracle::reward(d, a), 1e-12);
  }
  for (double d = 150.0; d < 3000.0; d += 7.3) {
    const double r = reward_from_distance(d, SpeedCommand::Hold, p);
    ASSERT_GE(r, prev);
    prev = r;
  }
}

TEST(Reward, ClosestDistanceIgnoresSelfAndInactive) {
  const auto own = aircraft(1, 0, 0);
  auto gone = aircraft(3, 10, 0);
  gone.active = false;
  const std::vector<AircraftState> all{own, gone, aircraft(2, 0, 400)};
  EXPECT_DOUBLE_EQ(closest_distance(own, all), 400.0);
}

TEST(UseCase, Validation) {
  UseCaseParams p;
  EXPECT_NO_THROW(p.validate());
  p.d_lowc = 100;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.n_wpt = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.psi = -1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Environment, ResetWithoutDeparturesAtZero) {
  Environment env(line_scenario(5000, {{1, 0, 10.0, 60.0, 0, 300.0}}), {});
  const auto r = env.reset();
  EXPECT_TRUE(r.agents.empty());
  EXPECT_FALSE(r.done);
  EXPECT_EQ(env.pending_count(), 1u);
}

TEST(Environment, TwoDeparturesSeeEachOther) {
  Environment env(line_scenario(5000, {{1, 0, 0.0, 60.0, 0, 300.0}, {2, 1, 0.0, 60.0, 0, 300.0}}), {});
  const auto r = env.reset();
  ASSERT_EQ(r.agents.size(), 2u);
  const UseCaseParams p;
  for (const auto& [id, a] : r.agents) {
    EXPECT_EQ(a.observation.valid_count, 1u);
    EXPECT_FALSE(a.reward.has_value());
    EXPECT_DOUBLE_EQ(a.observation.features[p.ownship_dim() + 6], 5000.0);
    EXPECT_DOUBLE_EQ(a.observation.features[p.ownship_dim()], id == 1 ? 5000.0 : -5000.0);
  }
  Environment again(env.scenario(), {});
  EXPECT_EQ(again.reset().agents.at(1).observation, r.agents.at(1).observation);
}

// Head-on at the maximum speed from 400 m: the pair closes 2 * 77.1667 m per
// second, so one step leaves 245.67 m (still >= 150 m) and the second step
// drops inside the NMAC radius.
TEST(Environment, HeadOnClosure) {
  const double v = knots_to_mps(150.0);
  Environment env(line_scenario(400, {{1, 0, 0.0, v, 0, 300.0}, {2, 1, 0.0, v, 0, 300.0}}), {});
  env.reset();
  const UseCaseParams p;
  auto r = env.step({});
  const double d1 = 400.0 - 2.0 * v;
  for (const auto& [_, a] : r.agents) {
    ASSERT_TRUE(a.reward);
    EXPECT_NEAR(*a.reward, -1.0 + 0.0003 * d1 - 0.001, 1e-12);
    EXPECT_NEAR(a.observation.features[p.ownship_dim() + 6], d1, 1e-9);
  }
  r = env.step({{1, SpeedCommand::Hold}, {2, SpeedCommand::Hold}});
  for (const auto& [_, a] : r.agents) EXPECT_DOUBLE_EQ(*a.reward, -1.001);
  // LoWC opened at reset (400 m < 450 m); only the NMAC opens now.
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, EventKind::NMAC);
  EXPECT_EQ(r.events[0].id_a, 1u);
  EXPECT_EQ(r.events[0].id_b, 2u);
}

TEST(Environment, SingleAircraftHoldAdvances) {
  Environment env(line_scenario(5000, {{1, 0, 0.0, 60.0, 0, 300.0}}), {});
  env.reset();
  const auto r = env.step({{1, SpeedCommand::Hold}});
  EXPECT_DOUBLE_EQ(*r.agents.at(1).reward, -0.001);
  EXPECT_EQ(*r.agents.at(1).action, SpeedCommand::Hold);
  ASSERT_EQ(r.snapshot.size(), 1u);
  EXPECT_DOUBLE_EQ(r.snapshot[0].x, 60.0);
  EXPECT_DOUBLE_EQ(r.time, 1.0);
}

TEST(Environment, LastArrivalEndsTheEpisode) {
  Environment env(line_scenario(500, {{1, 0, 0.0, 60.0, 0, 300.0}}), {});
  auto r = env.reset();
  int steps = 0;
  while (!r.done) {
    r = env.step({});
    ++steps;
  }
  // 400 m to the capture radius at 60 m/s.
  EXPECT_EQ(steps, 7);
  ASSERT_EQ(r.agents.size(), 1u);
  EXPECT_TRUE(r.agents.at(1).done);
  EXPECT_TRUE(r.agents.at(1).reward.has_value());
  EXPECT_EQ(env.stats().arrived, 1u);
  EXPECT_THROW(env.step({}), ContractViolation);
}

TEST(Environment, ActionsForUnknownIdsAreRejectedWithoutSideEffects) {
  Environment env(line_scenario(5000, {{1, 0, 0.0, 60.0, 0, 300.0}}), {});
  env.reset();
  try {
    env.step({{42, SpeedCommand::Hold}});
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("42"), std::string::npos);
  }
  EXPECT_DOUBLE_EQ(env.time(), 0.0);
  EXPECT_NO_THROW(env.step({{1, SpeedCommand::Accelerate}}));
  EXPECT_EQ(env.stats().alerts, 1u);
}

TEST(Environment, StepBeforeResetIsAContractViolation) {
  Environment env(line_scenario(5000, {{1, 0, 0.0, 60.0, 0, 300.0}}), {});
  EXPECT_THROW(env.step({}), ContractViolation);
}

TEST(Environment, TimeLimitStopsHoveringAircraft) {
  UseCaseParams p;
  p.max_episode_s = 30;
  Environment env(line_scenario(5000, {{1, 0, 0.0, kMinCruiseSpeed, 0, 300.0}}), p);
  auto r = env.reset();
  int steps = 0;
  while (!r.done) {
    r = env.step({{1, SpeedCommand::Decelerate}});
    ++steps;
  }
  EXPECT_EQ(steps, 30);
  EXPECT_EQ(env.active_count(), 1u);
  // 44.76 - 1.5 k drops below 2.5 m/s from step 29 on.
  EXPECT_DOUBLE_EQ(env.stats().holding_time_s, 2.0);
}

TEST(Environment, BackgroundTrafficIsInterpolatedAndObserved) {
  Scenario s = line_scenario(5000, {{1, 0, 0.0, 60.0, 0, 300.0}});
  s.background.push_back({kBackgroundIdBase + 1, {{0, 1000, 0, 300}, {10, 1000, 1000, 300}}});
  Environment env(s, {});
  auto r = env.reset();
  ASSERT_EQ(r.snapshot.size(), 2u);
  EXPECT_FALSE(r.snapshot[1].controllable);
  EXPECT_EQ(r.agents.size(), 1u);
  r = env.step({});
  EXPECT_DOUBLE_EQ(r.snapshot[1].y, 100.0);
  EXPECT_NEAR(r.snapshot[1].speed, 100.0, 1e-12);
  EXPECT_EQ(r.agents.at(1).observation.valid_count, 1u);
  EXPECT_THROW(env.step({{kBackgroundIdBase + 1, SpeedCommand::Hold}}), ContractViolation);
}

// Property: spawned + pending = total and arrived + active + pending = total
// at every step of a busy scenario.
TEST(Environment, AircraftAreConserved) {
  NetworkParams np;
  np.n_vertiports = 5;
  np.n_lanes = 8;
  FlightParams fp;
  fp.n_aircraft = 25;
  fp.duration_s = 300;
  Network net = generate_network(np, 2);
  auto flights = generate_flights(net, fp, 3);
  Environment env(make_scenario(std::move(net), std::move(flights), 300, 2), {});
  auto r = env.reset();
  Rng rng(5);
  std::size_t states = r.agents.size();
  while (!r.done) {
    std::map<AircraftId, SpeedCommand> a;
    for (const auto& [id, ag] : r.agents) {
      if (!ag.done) a[id] = command_from_index(static_cast<int>(rng.index(3)));
    }
    r = env.step(a);
    states += r.agents.size();
    const auto& st = env.stats();
    ASSERT_EQ(st.arrived + env.active_count() + env.pending_count(), 25u);
    ASSERT_EQ(env.aircraft().size(), env.active_count());
    for (const auto& [id, ag] : r.agents) ASSERT_EQ(ag.observation.features.size(), 339u);
  }
  EXPECT_EQ(env.stats().aircraft_states, states);
}

TEST(Trajectory, WriteReadRoundTrip) {
  const double v = knots_to_mps(150.0);
  Environment env(line_scenario(400, {{1, 0, 0.0, v, 0, 300.0}, {2, 1, 0.0, v, 0, 300.0}}), {});
  std::ostringstream out;
  TrajectoryWriter w(out);
  auto r = env.reset();
  w.write(r);
  while (!r.done) {
    r = env.step({{1, SpeedCommand::Decelerate}});
    w.write(r);
  }
  testing_support::TempDir dir;
  testing_support::write_file(dir / "t.csv", out.str());
  const auto rows = read_trajectory(dir / "t.csv");
  ASSERT_GE(rows.size(), 4u);
  EXPECT_FALSE(rows[0].action.has_value());
  EXPECT_EQ(rows[2].action, 0);
  EXPECT_EQ(rows[3].action, 1);
  // Logged positions reproduce the environment's events.
  const auto events = detect_events(to_position_records(rows));
  EXPECT_EQ(events, env.events());
}
