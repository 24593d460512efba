#include "corridor_gym/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>

#include "corridor_gym/csv.hpp"
#include "corridor_gym/errors.hpp"

namespace cgym {

void UseCaseParams::validate() const {
  if (!(d_nmac > 0.0 && d_nmac < d_lowc && d_lowc < d_max)) {
    throw ConfigError("use case requires 0 < d_nmac < d_lowc < d_max");
  }
  if (!(alpha >= 0.0 && delta >= 0.0 && psi >= 0.0 && omega >= 0.0)) {
    throw ConfigError("reward coefficients must be >= 0");
  }
  if (n_wpt < 1) throw ConfigError("n_wpt must be >= 1");
  if (n_intruders < 0) throw ConfigError("n_intruders must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(capture_radius > 0.0)) throw ConfigError("capture radius must be positive");
  if (!(max_episode_s >= 0.0)) throw ConfigError("max_episode_s must be >= 0");
  envelope.validate();
}

MetricsParams UseCaseParams::metrics(double hold_speed_mps, double rearm_margin) const {
  MetricsParams m;
  m.d_nmac = d_nmac;
  m.d_lowc = d_lowc;
  m.hold_speed_mps = hold_speed_mps;
  m.rearm_margin = rearm_margin;
  return m;
}

namespace {

Point2 upcoming_waypoint(const AircraftState& s, std::size_t j) {
  if (s.route.empty()) return {s.x, s.y};
  const std::size_t idx = std::min(s.next_wpt_index + j, s.route.size() - 1);
  return s.route[idx];
}

}  // namespace

Observation build_observation(const AircraftState& own, std::span<const AircraftState> others,
                              const UseCaseParams& params) {
  Observation obs;
  obs.features.assign(params.observation_dim(), 0.0);
  auto& f = obs.features;
  const auto n_wpt = static_cast<std::size_t>(params.n_wpt);

  f[0] = own.heading;
  f[1] = own.z;
  f[2] = own.accel;
  f[3] = own.speed;
  f[4] = own.dest_dist;
  for (std::size_t j = 0; j < n_wpt; ++j) {
    const Point2 w = upcoming_waypoint(own, j);
    f[5 + 2 * j] = w.x - own.x;
    f[6 + 2 * j] = w.y - own.y;
  }

  struct Candidate {
    double dist;
    AircraftId id;
    const AircraftState* state;
  };
  std::vector<Candidate> cands;
  cands.reserve(others.size());
  for (const auto& o : others) {
    if (!o.active || o.id == own.id) continue;
    cands.push_back({pairwise_distance(own, o), o.id, &o});
  }
  const auto keep = std::min(cands.size(), static_cast<std::size_t>(params.n_intruders));
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
                    });

  obs.valid_count = keep;
  for (std::size_t i = 0; i < keep; ++i) {
    const AircraftState& o = *cands[i].state;
    const std::size_t base = params.ownship_dim() + i * params.intruder_dim();
    f[base + 0] = o.x - own.x;
    f[base + 1] = o.y - own.y;
    f[base + 2] = o.z - own.z;
    f[base + 3] = o.accel;
    f[base + 4] = o.speed;
    f[base + 5] = o.dest_dist;
    f[base + 6] = cands[i].dist;
    for (std::size_t j = 0; j < n_wpt; ++j) {
      const Point2 w = upcoming_waypoint(o, j);
      f[base + 7 + 2 * j] = w.x - own.x;
      f[base + 8 + 2 * j] = w.y - own.y;
    }
  }
  return obs;
}

std::vector<float> scale_observation(const Observation& obs, const UseCaseParams& params) {
  const double pos = 1.0 / params.d_max;
  const double spd = 1.0 / params.envelope.v_max;
  const double alt = 1.0 / 1000.0;
  const double acc = 1.0 / params.envelope.accel_mag;
  std::vector<double> scale(params.observation_dim(), pos);
  scale[0] = 1.0 / 360.0;
  scale[1] = alt;
  scale[2] = acc;
  scale[3] = spd;
  for (std::size_t i = 0; i < static_cast<std::size_t>(params.n_intruders); ++i) {
    const std::size_t base = params.ownship_dim() + i * params.intruder_dim();
    scale[base + 2] = alt;
    scale[base + 3] = acc;
    scale[base + 4] = spd;
  }

  std::vector<float> out(obs.features.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(obs.features[i] * scale[i]);
  return out;
}

double closest_distance(const AircraftState& own, std::span<const AircraftState> others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : others) {
    if (!o.active || o.id == own.id) continue;
    best = std::min(best, pairwise_distance(own, o));
  }
  return best;
}

double reward_from_distance(double closest, SpeedCommand action, const UseCaseParams& p) {
  double r_sep = 0.0;
  if (closest < p.d_nmac) {
    r_sep = -1.0;
  } else if (closest < p.d_max) {
    r_sep = -p.alpha + p.delta * closest;
  }
  const double r_act = action == SpeedCommand::Hold ? 0.0 : -p.psi;
  return r_sep + r_act - p.omega;
}

double reward(const AircraftState& own, std::span<const AircraftState> others, SpeedCommand action,
              const UseCaseParams& params) {
  return reward_from_distance(closest_distance(own, others), action, params);
}

// ---------------------------------------------------------------------------

Environment::Environment(Scenario scenario, UseCaseParams params, MetricsParams metrics)
    : scenario_(std::move(scenario)), params_(params), metrics_(metrics), detector_(metrics) {
  params_.validate();
  metrics_.validate();
  scenario_.validate();
  time_limit_ = params_.max_episode_s > 0.0 ? params_.max_episode_s : scenario_.duration + 3600.0;

  flight_order_.resize(scenario_.flights.size());
  for (std::size_t i = 0; i < flight_order_.size(); ++i) flight_order_[i] = i;
  std::stable_sort(flight_order_.begin(), flight_order_.end(), [this](std::size_t a, std::size_t b) {
    const auto& fa = scenario_.flights[a];
    const auto& fb = scenario_.flights[b];
    return fa.departure_time < fb.departure_time || (fa.departure_time == fb.departure_time && fa.id < fb.id);
  });
}

StepResult Environment::reset() {
  time_ = 0.0;
  step_index_ = 0;
  done_ = false;
  started_ = true;
  next_flight_ = 0;
  active_.clear();
  background_.clear();
  detector_ = EventDetector(metrics_);
  stats_ = {};
  update_background();
  spawn_due();
  return finish_step({}, {});
}

void Environment::spawn_due() {
  while (next_flight_ < flight_order_.size()) {
    const FlightPlan& fp = scenario_.flights[flight_order_[next_flight_]];
    if (fp.departure_time > time_) break;
    const Route& r = scenario_.route(fp.route);
    AircraftState s;
    s.id = fp.id;
    s.route = r.waypoints;
    s.x = r.waypoints.front().x;
    s.y = r.waypoints.front().y;
    s.z = fp.lane_altitude;
    s.speed = std::clamp(fp.cruise_speed, params_.envelope.v_min, params_.envelope.v_max);
    s.accel = 0.0;
    s.next_wpt_index = 1;
    s.heading = bearing_deg(s.x, s.y, r.waypoints[1].x, r.waypoints[1].y);
    s.dest_dist = remaining_route_distance(s);
    s.active = true;
    active_[s.id] = std::move(s);
    ++stats_.spawned;
    ++next_flight_;
  }
}

void Environment::update_background() {
  background_.clear();
  const auto n_wpt = static_cast<std::size_t>(params_.n_wpt);
  for (const auto& track : scenario_.background) {
    const auto& smp = track.samples;
    if (time_ < smp.front().t || time_ > smp.back().t) continue;
    // First sample strictly after now (or the last one).
    auto after = std::upper_bound(smp.begin(), smp.end(), time_,
                                  [](double t, const TrackSample& s) { return t < s.t; });
    AircraftState s;
    s.id = track.id;
    s.active = true;
    if (after == smp.end()) {
      const TrackSample& last = smp.back();
      s.x = last.x;
      s.y = last.y;
      s.z = last.z;
      if (smp.size() >= 2) {
        const TrackSample& prev = smp[smp.size() - 2];
        const double span = last.t - prev.t;
        if (span > 0.0) {
          s.speed = std::hypot(last.x - prev.x, last.y - prev.y) / span;
          if (s.speed > 0.0) s.heading = bearing_deg(prev.x, prev.y, last.x, last.y);
        }
      }
    } else {
      const TrackSample& b = *after;
      const TrackSample& a = *(after - 1);
      const double span = b.t - a.t;
      const double w = span > 0.0 ? (time_ - a.t) / span : 0.0;
      s.x = a.x + (b.x - a.x) * w;
      s.y = a.y + (b.y - a.y) * w;
      s.z = a.z + (b.z - a.z) * w;
      if (span > 0.0) {
        s.speed = std::hypot(b.x - a.x, b.y - a.y) / span;
        if (s.speed > 0.0) s.heading = bearing_deg(a.x, a.y, b.x, b.y);
      }
      for (auto it = after; it != smp.end() && s.route.size() < n_wpt; ++it) s.route.push_back({it->x, it->y});
    }
    background_.push_back(std::move(s));
  }
}

StepResult Environment::step(const std::map<AircraftId, SpeedCommand>& actions) {
  if (!started_) throw ContractViolation("step called before reset");
  if (done_) throw ContractViolation("step called on a finished episode; call reset");
  for (const auto& [id, _] : actions) {
    if (!active_.count(id)) {
      throw ContractViolation("action for unknown or inactive aircraft id " + std::to_string(id));
    }
  }

  std::map<AircraftId, SpeedCommand> applied;
  std::map<AircraftId, AircraftState> departed;
  for (auto it = active_.begin(); it != active_.end();) {
    auto a = actions.find(it->first);
    const SpeedCommand cmd = a == actions.end() ? SpeedCommand::Hold : a->second;
    AircraftState next = step_aircraft(it->second, cmd, params_.envelope, params_.dt);
    next = advance_waypoint(next, params_.capture_radius);
    applied[it->first] = cmd;
    ++stats_.decisions;
    if (cmd != SpeedCommand::Hold) ++stats_.alerts;
    if (!next.active) {
      ++stats_.arrived;
      departed.emplace(it->first, std::move(next));
      it = active_.erase(it);
    } else {
      it->second = std::move(next);
      ++it;
    }
  }

  ++step_index_;
  time_ = static_cast<double>(step_index_) * params_.dt;
  update_background();
  spawn_due();
  return finish_step(applied, departed);
}

StepResult Environment::finish_step(const std::map<AircraftId, SpeedCommand>& applied,
                                    std::map<AircraftId, AircraftState> departed) {
  StepResult result;
  result.time = time_;

  // Everything present at this instant, including this step's arrivals.
  std::vector<const AircraftState*> present;
  present.reserve(active_.size() + departed.size() + background_.size());
  for (const auto& [_, s] : active_) present.push_back(&s);
  for (const auto& [_, s] : departed) present.push_back(&s);
  for (const auto& s : background_) present.push_back(&s);
  std::sort(present.begin(), present.end(),
            [](const AircraftState* a, const AircraftState* b) { return a->id < b->id; });

  std::vector<PositionSample> positions;
  positions.reserve(present.size());
  for (const auto* s : present) positions.push_back({s->id, s->x, s->y, s->z});
  result.events = detector_.update(time_, positions);

  result.snapshot.reserve(present.size());
  for (const auto* s : present) {
    const bool controllable = s->id < kBackgroundIdBase;
    result.snapshot.push_back({s->id, s->x, s->y, s->z, s->heading, s->speed, s->accel, controllable});
  }

  if (params_.remove_on_nmac) {
    for (const auto& ev : result.events) {
      if (ev.kind != EventKind::NMAC) continue;
      for (AircraftId id : {ev.id_a, ev.id_b}) {
        auto it = active_.find(id);
        if (it == active_.end()) continue;
        it->second.active = false;
        departed.emplace(id, std::move(it->second));
        active_.erase(it);
        ++stats_.removed;
      }
    }
  }

  // Intruder candidates: active controllable aircraft plus background traffic.
  std::vector<AircraftState> traffic;
  traffic.reserve(active_.size() + background_.size());
  for (const auto& [_, s] : active_) traffic.push_back(s);
  for (const auto& s : background_) traffic.push_back(s);

  auto emit = [&](const AircraftState& s, bool done) {
    AgentStep step;
    step.observation = build_observation(s, traffic, params_);
    step.done = done;
    if (auto a = applied.find(s.id); a != applied.end()) {
      step.action = a->second;
      step.reward = reward(s, traffic, a->second, params_);
    }
    result.agents.emplace(s.id, std::move(step));
  };
  for (const auto& [_, s] : active_) {
    emit(s, false);
    if (s.speed < metrics_.hold_speed_mps) stats_.holding_time_s += params_.dt;
  }
  for (const auto& [_, s] : departed) emit(s, true);

  double background_end = 0.0;
  for (const auto& t : scenario_.background) background_end = std::max(background_end, t.samples.back().t);
  const bool flights_complete = next_flight_ == flight_order_.size() && active_.empty();
  const bool timed_out = time_ >= time_limit_;
  done_ = (flights_complete && time_ >= background_end) || timed_out;
  result.done = done_;
  if (done_) {
    for (auto& [_, a] : result.agents) a.done = true;
  }
  stats_.aircraft_states += result.agents.size();
  return result;
}

std::vector<SafetyEvent> Environment::events() const {
  EventDetector copy = detector_;
  return copy.finish();
}

// ---------------------------------------------------------------------------

TrajectoryWriter::TrajectoryWriter(std::ostream& out) : out_(out) {
  out_ << "time_s,ac_id,x_m,y_m,z_m,heading_deg,speed_mps,accel_mps2,action,reward\n";
}

void TrajectoryWriter::write(const StepResult& result) {
  const std::string t = csv::format_double(result.time);
  for (const auto& s : result.snapshot) {
    out_ << t << ',' << s.id << ',' << csv::format_double(s.x) << ',' << csv::format_double(s.y) << ','
         << csv::format_double(s.z) << ',' << csv::format_double(s.heading) << ','
         << csv::format_double(s.speed) << ',' << csv::format_double(s.accel) << ',';
    if (auto it = result.agents.find(s.id); it != result.agents.end() && it->second.action) {
      out_ << to_index(*it->second.action) << ',' << csv::format_double(*it->second.reward);
    } else {
      out_ << ',';
    }
    out_ << '\n';
  }
}

std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trajectory log " + path.string());
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  double last_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (lineno == 1) {
      if (line.rfind("time_s,ac_id,x_m,y_m,z_m", 0) != 0) throw InputError(ctx + ": not a trajectory log header");
      continue;
    }
    if (line.empty()) continue;
    auto c = csv::split(line);
    if (c.size() != 10) throw InputError(ctx + ": expected 10 columns, got " + std::to_string(c.size()));
    TrajectoryRecord r;
    r.time = csv::parse_double(c[0], ctx + " time_s");
    if (r.time < last_t) throw InputError(ctx + ": rows are not time-ordered");
    last_t = r.time;
    r.state.id = static_cast<AircraftId>(csv::parse_int(c[1], ctx + " ac_id"));
    r.state.x = csv::parse_double(c[2], ctx + " x_m");
    r.state.y = csv::parse_double(c[3], ctx + " y_m");
    r.state.z = csv::parse_double(c[4], ctx + " z_m");
    r.state.heading = csv::parse_double(c[5], ctx + " heading_deg");
    r.state.speed = csv::parse_double(c[6], ctx + " speed_mps");
    r.state.accel = csv::parse_double(c[7], ctx + " accel_mps2");
    if (!c[8].empty()) r.action = static_cast<int>(csv::parse_int(c[8], ctx + " action"));
    if (!c[9].empty()) r.reward = csv::parse_double(c[9], ctx + " reward");
    r.state.controllable = r.action.has_value();
    out.push_back(r);
  }
  return out;
}

std::vector<PositionRecord> to_position_records(std::span<const TrajectoryRecord> records) {
  std::vector<PositionRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.time, {r.state.id, r.state.x, r.state.y, r.state.z}});
  return out;
}

}  // namespace cgym
