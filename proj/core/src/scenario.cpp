#include "corridor_gym/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "corridor_gym/csv.hpp"
#include "corridor_gym/errors.hpp"
#include "corridor_gym/random.hpp"
#include "json_fields.hpp"

namespace cgym {

using detail::array_field;
using detail::field;
using detail::get_as;
using detail::json;

namespace {

constexpr double kEarthRadiusM = 6'371'000.0;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double polyline_length(const std::vector<Point2>& pts) {
  double d = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    d += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  }
  return d;
}

std::vector<Point2> straight_waypoints(const Vertiport& a, const Vertiport& b, double spacing) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int legs = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(legs) + 1);
  for (int i = 0; i <= legs; ++i) {
    const double f = static_cast<double>(i) / legs;
    pts.push_back({a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f});
  }
  pts.front() = {a.x, a.y};
  pts.back() = {b.x, b.y};
  return pts;
}

std::pair<VertiportId, VertiportId> corridor_key(const Route& r) {
  return {std::min(r.origin, r.destination), std::max(r.origin, r.destination)};
}

}  // namespace

Point2 project(const GeoOrigin& origin, double lat_deg, double lon_deg) {
  constexpr double rad = std::numbers::pi / 180.0;
  return {kEarthRadiusM * (lon_deg - origin.lon_deg) * rad * std::cos(origin.lat_deg * rad),
          kEarthRadiusM * (lat_deg - origin.lat_deg) * rad};
}

double Route::length() const { return polyline_length(waypoints); }

const Route& Scenario::route(RouteId id) const {
  for (const auto& r : routes) {
    if (r.id == id) return r;
  }
  throw ValidationError("unknown route id " + std::to_string(id));
}

const Vertiport& Scenario::vertiport(VertiportId id) const {
  for (const auto& v : vertiports) {
    if (v.id == id) return v;
  }
  throw ValidationError("unknown vertiport id " + std::to_string(id));
}

void Scenario::validate() const {
  if (!(duration >= 0.0)) throw ValidationError("scenario duration must be >= 0");
  std::set<VertiportId> vids;
  for (const auto& v : vertiports) {
    if (!vids.insert(v.id).second) {
      throw ValidationError("duplicate vertiport id " + std::to_string(v.id));
    }
  }
  std::set<RouteId> rids;
  for (const auto& r : routes) {
    const std::string where = "route " + std::to_string(r.id);
    if (!rids.insert(r.id).second) throw ValidationError("duplicate route id " + std::to_string(r.id));
    if (!vids.count(r.origin)) {
      throw ValidationError(where + " references missing vertiport id " + std::to_string(r.origin));
    }
    if (!vids.count(r.destination)) {
      throw ValidationError(where + " references missing vertiport id " +
                            std::to_string(r.destination));
    }
    if (r.waypoints.size() < 2) throw ValidationError(where + " needs at least 2 waypoints");
    const Vertiport& o = vertiport(r.origin);
    const Vertiport& d = vertiport(r.destination);
    constexpr double tol = 1e-6;
    if (std::hypot(r.waypoints.front().x - o.x, r.waypoints.front().y - o.y) > tol) {
      throw ValidationError(where + " does not start at its origin vertiport");
    }
    if (std::hypot(r.waypoints.back().x - d.x, r.waypoints.back().y - d.y) > tol) {
      throw ValidationError(where + " does not end at its destination vertiport");
    }
    if (r.lane_altitudes.empty()) throw ValidationError(where + " has no lanes");
    for (std::size_t i = 1; i < r.lane_altitudes.size(); ++i) {
      if (!(r.lane_altitudes[i] > r.lane_altitudes[i - 1])) {
        throw ValidationError(where + " lane altitudes must be strictly increasing");
      }
    }
  }
  std::set<AircraftId> aids;
  for (const auto& f : flights) {
    const std::string where = "flight " + std::to_string(f.id);
    if (!aids.insert(f.id).second) throw ValidationError("duplicate aircraft id " + std::to_string(f.id));
    if (f.id >= kBackgroundIdBase) throw ValidationError(where + " id collides with background id range");
    if (!rids.count(f.route)) {
      throw ValidationError(where + " references missing route id " + std::to_string(f.route));
    }
    const Route& r = route(f.route);
    if (f.lane_index < 0 || static_cast<std::size_t>(f.lane_index) >= r.lane_altitudes.size()) {
      throw ValidationError(where + " lane index out of range");
    }
    if (std::abs(f.lane_altitude - r.lane_altitudes[f.lane_index]) > kAltitudeNoise + 1e-9) {
      throw ValidationError(where + " lane altitude deviates more than 30.48 m from its lane");
    }
    if (f.cruise_speed < kMinCruiseSpeed - 1e-9 || f.cruise_speed > kMaxCruiseSpeed + 1e-9) {
      throw ValidationError(where + " cruise speed outside [44.76, 77.17] m/s");
    }
    if (!(f.departure_time >= 0.0) || (duration > 0.0 && !(f.departure_time < duration))) {
      throw ValidationError(where + " departure time outside [0, duration)");
    }
  }
  for (const auto& b : background) {
    const std::string where = "background track " + std::to_string(b.id);
    if (!aids.insert(b.id).second) throw ValidationError("duplicate aircraft id " + std::to_string(b.id));
    if (b.samples.empty()) throw ValidationError(where + " has no samples");
    for (std::size_t i = 1; i < b.samples.size(); ++i) {
      if (b.samples[i].t < b.samples[i - 1].t) throw ValidationError(where + " samples not time-ordered");
    }
  }
}

Layout parse_layout(const std::string& name) {
  if (name == "ring") return Layout::Ring;
  if (name == "grid") return Layout::Grid;
  if (name == "file") return Layout::File;
  throw ConfigError("unknown network layout '" + name + "' (expected ring|grid|file)");
}

DemandModel parse_demand(const std::string& name) {
  if (name == "poisson") return DemandModel::Poisson;
  if (name == "schedule") return DemandModel::Schedule;
  throw ConfigError("unknown demand model '" + name + "' (expected poisson|schedule)");
}

Network generate_network(const NetworkParams& params, std::uint64_t seed) {
  if (params.layout == Layout::File) return load_network(params.file);
  if (params.n_vertiports < 2) throw ConfigError("network needs at least 2 vertiports");
  if (params.n_lanes < 1) throw ConfigError("network needs at least 1 lane per corridor");
  if (!(params.spacing_m > 0.0) || !(params.waypoint_spacing_m > 0.0) || !(params.lane_spacing_m > 0.0)) {
    throw ConfigError("network spacings must be positive");
  }

  Network net;
  const int n = params.n_vertiports;
  std::set<std::pair<VertiportId, VertiportId>> corridors;

  if (params.layout == Layout::Ring) {
    const double radius = params.spacing_m / (2.0 * std::sin(std::numbers::pi / n));
    for (int i = 0; i < n; ++i) {
      const double ang = 2.0 * std::numbers::pi * i / n;
      net.vertiports.push_back({i, "VP" + std::to_string(i), radius * std::sin(ang), radius * std::cos(ang)});
    }
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      if (i != j) corridors.insert({std::min(i, j), std::max(i, j)});
    }
  } else {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    for (int i = 0; i < n; ++i) {
      net.vertiports.push_back({i, "VP" + std::to_string(i), (i % cols) * params.spacing_m,
                                (i / cols) * params.spacing_m});
    }
    for (int i = 0; i < n; ++i) {
      if ((i % cols) + 1 < cols && i + 1 < n) corridors.insert({i, i + 1});
      if (i + cols < n) corridors.insert({i, i + cols});
    }
  }

  // Seeded chords on top of the adjacency backbone.
  Rng rng(seed);
  const std::size_t max_pairs = static_cast<std::size_t>(n) * (n - 1) / 2;
  int wanted = params.extra_od_pairs;
  while (wanted > 0 && corridors.size() < max_pairs) {
    const int a = static_cast<int>(rng.index(n));
    const int b = static_cast<int>(rng.index(n));
    if (a == b) continue;
    if (corridors.insert({std::min(a, b), std::max(a, b)}).second) --wanted;
  }

  std::vector<double> lanes;
  for (int k = 0; k < params.n_lanes; ++k) lanes.push_back(params.base_altitude_m + k * params.lane_spacing_m);

  RouteId next_id = 0;
  for (const auto& [a, b] : corridors) {
    const Vertiport& va = net.vertiports[a];
    const Vertiport& vb = net.vertiports[b];
    net.routes.push_back({next_id++, a, b, straight_waypoints(va, vb, params.waypoint_spacing_m), lanes});
    net.routes.push_back({next_id++, b, a, straight_waypoints(vb, va, params.waypoint_spacing_m), lanes});
  }
  return net;
}

namespace {

struct Departure {
  double time = 0.0;
  const Route* route = nullptr;
  std::optional<double> speed;
};

std::vector<Departure> read_schedule(const Network& network, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schedule file " + path.string());
  std::vector<Departure> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = csv::split(line);
    if (!header_seen) {
      header_seen = true;
      if (cols.size() < 3 || cols[0] != "departure_s" || cols[1] != "origin" || cols[2] != "destination") {
        throw InputError(path.string() + ":" + std::to_string(lineno) +
                         ": expected header departure_s,origin,destination[,cruise_speed_mps]");
      }
      continue;
    }
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (cols.size() < 3) throw InputError(ctx + ": expected at least 3 columns");
    Departure d;
    d.time = csv::parse_double(cols[0], ctx + " departure_s");
    const auto o = csv::parse_int(cols[1], ctx + " origin");
    const auto dst = csv::parse_int(cols[2], ctx + " destination");
    if (cols.size() > 3 && !cols[3].empty()) d.speed = csv::parse_double(cols[3], ctx + " cruise_speed_mps");
    for (const auto& r : network.routes) {
      if (r.origin == o && r.destination == dst) {
        d.route = &r;
        break;
      }
    }
    if (!d.route) {
      throw ValidationError(ctx + ": no route from vertiport " + std::to_string(o) + " to " +
                            std::to_string(dst));
    }
    out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<FlightPlan> generate_flights(const Network& network, const FlightParams& params,
                                         std::uint64_t seed) {
  if (network.routes.empty()) throw ConfigError("network has no routes");
  if (!(params.duration_s > 0.0)) throw ConfigError("scenario duration must be positive");
  if (!(params.min_speed > 0.0) || params.min_speed > params.max_speed) {
    throw ConfigError("cruise speed bounds must satisfy 0 < min <= max");
  }
  Rng rng(seed);

  std::vector<Departure> departures;
  if (params.demand == DemandModel::Poisson) {
    if (params.n_aircraft < 1) throw ConfigError("n_aircraft must be >= 1");
    // A homogeneous Poisson process conditioned on n arrivals in [0, T) is n
    // sorted uniform draws.
    for (int i = 0; i < params.n_aircraft; ++i) {
      Departure d;
      d.time = rng.uniform(0.0, params.duration_s);
      d.route = &network.routes[rng.index(network.routes.size())];
      departures.push_back(d);
    }
  } else {
    departures = read_schedule(network, params.schedule_file);
    for (const auto& d : departures) {
      if (!(d.time >= 0.0 && d.time < params.duration_s)) {
        throw ValidationError("scheduled departure " + csv::format_double(d.time) + " outside [0, duration)");
      }
    }
  }
  std::stable_sort(departures.begin(), departures.end(),
                   [](const Departure& a, const Departure& b) { return a.time < b.time; });

  struct Window {
    int lane;
    double start;
    double end;
  };
  std::map<std::pair<VertiportId, VertiportId>, std::vector<Window>> occupancy;

  std::vector<FlightPlan> flights;
  flights.reserve(departures.size());
  for (std::size_t i = 0; i < departures.size(); ++i) {
    const Departure& d = departures[i];
    const Route& r = *d.route;
    FlightPlan fp;
    fp.id = static_cast<AircraftId>(i + 1);
    fp.route = r.id;
    fp.departure_time = d.time;
    fp.cruise_speed = d.speed ? *d.speed : rng.uniform(params.min_speed, params.max_speed);
    const double end = d.time + r.length() / fp.cruise_speed;

    auto& windows = occupancy[corridor_key(r)];
    int lane = -1;
    for (int k = 0; k < static_cast<int>(r.lane_altitudes.size()) && lane < 0; ++k) {
      const bool busy = std::any_of(windows.begin(), windows.end(), [&](const Window& w) {
        return w.lane == k && w.start < end && d.time < w.end;
      });
      if (!busy) lane = k;
    }
    if (lane < 0) {
      throw LaneExhaustionError("all " + std::to_string(r.lane_altitudes.size()) +
                                " lanes between vertiports " + std::to_string(r.origin) + " and " +
                                std::to_string(r.destination) + " are occupied at t=" +
                                csv::format_double(d.time) + " s (flight " + std::to_string(fp.id) + ")");
    }
    windows.push_back({lane, d.time, end});
    fp.lane_index = lane;
    fp.lane_altitude = r.lane_altitudes[lane] + rng.uniform(-params.altitude_noise_m, params.altitude_noise_m);
    flights.push_back(fp);
  }
  return flights;
}

Scenario make_scenario(Network network, std::vector<FlightPlan> flights, double duration,
                       std::uint64_t seed) {
  Scenario s;
  s.seed = seed;
  s.duration = duration;
  s.vertiports = std::move(network.vertiports);
  s.routes = std::move(network.routes);
  s.flights = std::move(flights);
  s.validate();
  return s;
}

Scenario make_overtake_scenario(double follower_delay_s, double route_length_m) {
  if (!(follower_delay_s >= 0.0) || !(route_length_m > 0.0)) {
    throw ConfigError("overtake scenario needs a non-negative delay and a positive length");
  }
  const double base = feet_to_m(1000.0);
  const double lane_gap = feet_to_m(500.0);
  Network net;
  net.vertiports = {{0, "A", 0.0, 0.0}, {1, "B", route_length_m, 0.0}};
  Route fwd{0, 0, 1, straight_waypoints(net.vertiports[0], net.vertiports[1], 1000.0), {base, base + lane_gap}};
  Route rev{1, 1, 0, straight_waypoints(net.vertiports[1], net.vertiports[0], 1000.0), {base, base + lane_gap}};
  net.routes = {fwd, rev};
  std::vector<FlightPlan> flights{{1, 0, 0.0, kMinCruiseSpeed, 0, base},
                                  {2, 0, follower_delay_s, kMaxCruiseSpeed, 0, base}};
  return make_scenario(std::move(net), std::move(flights), follower_delay_s + 1.0, 0);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json point_json(const Point2& p) { return json::array({p.x, p.y}); }

json network_json(const std::vector<Vertiport>& vps, const std::vector<Route>& routes) {
  json j;
  j["vertiports"] = json::array();
  for (const auto& v : vps) {
    j["vertiports"].push_back({{"id", v.id}, {"name", v.name}, {"x_m", v.x}, {"y_m", v.y}});
  }
  j["routes"] = json::array();
  for (const auto& r : routes) {
    json wps = json::array();
    for (const auto& p : r.waypoints) wps.push_back(point_json(p));
    j["routes"].push_back({{"id", r.id},
                           {"origin", r.origin},
                           {"destination", r.destination},
                           {"waypoints_m", wps},
                           {"lane_altitudes_m", r.lane_altitudes}});
  }
  return j;
}

Network network_from_json(const json& doc, const std::string& path) {
  Network net;
  const json& vps = array_field(doc, "vertiports", path);
  for (std::size_t i = 0; i < vps.size(); ++i) {
    const std::string p = path + ".vertiports[" + std::to_string(i) + "]";
    Vertiport v;
    v.id = field<VertiportId>(vps[i], "id", p);
    v.name = field<std::string>(vps[i], "name", p);
    v.x = field<double>(vps[i], "x_m", p);
    v.y = field<double>(vps[i], "y_m", p);
    net.vertiports.push_back(std::move(v));
  }
  const json& routes = array_field(doc, "routes", path);
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const std::string p = path + ".routes[" + std::to_string(i) + "]";
    Route r;
    r.id = field<RouteId>(routes[i], "id", p);
    r.origin = field<VertiportId>(routes[i], "origin", p);
    r.destination = field<VertiportId>(routes[i], "destination", p);
    const json& wps = array_field(routes[i], "waypoints_m", p);
    for (std::size_t k = 0; k < wps.size(); ++k) {
      const std::string wp = p + ".waypoints_m[" + std::to_string(k) + "]";
      if (!wps[k].is_array() || wps[k].size() != 2) throw ParseError(wp + ": expected [x, y]");
      r.waypoints.push_back({get_as<double>(wps[k][0], wp), get_as<double>(wps[k][1], wp)});
    }
    const json& lanes = array_field(routes[i], "lane_altitudes_m", p);
    for (std::size_t k = 0; k < lanes.size(); ++k) {
      r.lane_altitudes.push_back(get_as<double>(lanes[k], p + ".lane_altitudes_m[" + std::to_string(k) + "]"));
    }
    net.routes.push_back(std::move(r));
  }
  return net;
}

}  // namespace

std::string scenario_to_string(const Scenario& s) {
  json j = network_json(s.vertiports, s.routes);
  j["format"] = kScenarioFormat;
  j["version"] = std::to_string(kScenarioVersion);
  j["seed"] = s.seed;
  j["duration_s"] = s.duration;
  j["origin"] = {{"lat_deg", s.origin.lat_deg}, {"lon_deg", s.origin.lon_deg}};
  j["flights"] = json::array();
  for (const auto& f : s.flights) {
    j["flights"].push_back({{"id", f.id},
                            {"route", f.route},
                            {"departure_s", f.departure_time},
                            {"cruise_speed_mps", f.cruise_speed},
                            {"lane_index", f.lane_index},
                            {"lane_altitude_m", f.lane_altitude}});
  }
  j["background"] = json::array();
  for (const auto& b : s.background) {
    json samples = json::array();
    for (const auto& t : b.samples) samples.push_back(json::array({t.t, t.x, t.y, t.z}));
    j["background"].push_back({{"id", b.id}, {"samples", samples}});
  }
  return j.dump(1) + "\n";
}

Scenario scenario_from_string(const std::string& text) {
  const json doc = detail::parse_document(text, "scenario");
  const std::string root = "scenario";
  if (field<std::string>(doc, "format", root) != kScenarioFormat) {
    throw ParseError("scenario.format: expected '" + std::string(kScenarioFormat) + "'");
  }
  const auto version = field<std::string>(doc, "version", root);
  if (version != std::to_string(kScenarioVersion)) {
    throw ParseError("scenario.version: unsupported version '" + version + "'");
  }
  Scenario s;
  Network net = network_from_json(doc, root);
  s.vertiports = std::move(net.vertiports);
  s.routes = std::move(net.routes);
  s.seed = field<std::uint64_t>(doc, "seed", root);
  s.duration = field<double>(doc, "duration_s", root);
  if (doc.contains("origin")) {
    s.origin.lat_deg = field<double>(doc["origin"], "lat_deg", root + ".origin");
    s.origin.lon_deg = field<double>(doc["origin"], "lon_deg", root + ".origin");
  }
  const json& flights = array_field(doc, "flights", root);
  for (std::size_t i = 0; i < flights.size(); ++i) {
    const std::string p = root + ".flights[" + std::to_string(i) + "]";
    FlightPlan f;
    f.id = field<AircraftId>(flights[i], "id", p);
    f.route = field<RouteId>(flights[i], "route", p);
    f.departure_time = field<double>(flights[i], "departure_s", p);
    f.cruise_speed = field<double>(flights[i], "cruise_speed_mps", p);
    f.lane_index = field<std::int32_t>(flights[i], "lane_index", p);
    f.lane_altitude = field<double>(flights[i], "lane_altitude_m", p);
    s.flights.push_back(f);
  }
  if (doc.contains("background")) {
    const json& bg = array_field(doc, "background", root);
    for (std::size_t i = 0; i < bg.size(); ++i) {
      const std::string p = root + ".background[" + std::to_string(i) + "]";
      BackgroundTrack b;
      b.id = field<AircraftId>(bg[i], "id", p);
      const json& samples = array_field(bg[i], "samples", p);
      for (std::size_t k = 0; k < samples.size(); ++k) {
        const std::string sp = p + ".samples[" + std::to_string(k) + "]";
        if (!samples[k].is_array() || samples[k].size() != 4) throw ParseError(sp + ": expected [t, x, y, z]");
        b.samples.push_back({get_as<double>(samples[k][0], sp), get_as<double>(samples[k][1], sp),
                             get_as<double>(samples[k][2], sp), get_as<double>(samples[k][3], sp)});
      }
      s.background.push_back(std::move(b));
    }
  }
  s.validate();
  return s;
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << scenario_to_string(scenario);
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_string(read_file(path));
}

Network load_network(const std::filesystem::path& path) {
  const json doc = detail::parse_document(read_file(path), path.string());
  Network net = network_from_json(doc, "network");
  Scenario probe;
  probe.vertiports = net.vertiports;
  probe.routes = net.routes;
  probe.validate();
  if (net.vertiports.size() < 2) throw ConfigError("network file needs at least 2 vertiports");
  if (net.routes.empty()) throw ValidationError("network file has no routes");
  return net;
}

// ---------------------------------------------------------------------------
// Traffic overlay

std::vector<BackgroundTrack> load_traffic_log(const std::filesystem::path& path, const GeoOrigin& origin) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open traffic log " + path.string());
  std::string line;
  std::size_t lineno = 0;
  bool geographic = false;
  bool header_seen = false;
  double last_t = -std::numeric_limits<double>::infinity();
  std::map<std::int64_t, BackgroundTrack> tracks;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cols = csv::split(line);
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (!header_seen) {
      header_seen = true;
      if (cols.size() == 5 && cols[0] == "time_s" && cols[1] == "track_id" && cols[2] == "x_m" &&
          cols[3] == "y_m" && cols[4] == "z_m") {
        geographic = false;
      } else if (cols.size() == 5 && cols[0] == "time_s" && cols[1] == "track_id" && cols[2] == "lat" &&
                 cols[3] == "lon" && cols[4] == "alt_m") {
        geographic = true;
      } else {
        throw InputError(ctx + ": expected header time_s,track_id,x_m,y_m,z_m or time_s,track_id,lat,lon,alt_m");
      }
      continue;
    }
    if (cols.size() != 5) throw InputError(ctx + ": expected 5 columns, got " + std::to_string(cols.size()));
    const double t = csv::parse_double(cols[0], ctx + " time_s");
    if (t < last_t) throw InputError(ctx + ": rows are not sorted by time");
    last_t = t;
    const auto track = csv::parse_int(cols[1], ctx + " track_id");
    if (track < 0 || track >= static_cast<std::int64_t>(UINT32_MAX - kBackgroundIdBase)) {
      throw InputError(ctx + ": track_id out of range");
    }
    const double a = csv::parse_double(cols[2], ctx);
    const double b = csv::parse_double(cols[3], ctx);
    const double z = csv::parse_double(cols[4], ctx);
    TrackSample s{t, a, b, z};
    if (geographic) {
      const Point2 p = project(origin, a, b);
      s.x = p.x;
      s.y = p.y;
    }
    auto& tr = tracks[track];
    tr.id = kBackgroundIdBase + static_cast<AircraftId>(track);
    tr.samples.push_back(s);
  }
  std::vector<BackgroundTrack> out;
  for (auto& [_, tr] : tracks) out.push_back(std::move(tr));
  return out;
}

Scenario overlay_traffic(const Scenario& scenario, const std::filesystem::path& traffic_log) {
  Scenario out = scenario;
  for (auto& tr : load_traffic_log(traffic_log, scenario.origin)) out.background.push_back(std::move(tr));
  out.validate();
  return out;
}

}  // namespace cgym
