#include "corridor_gym/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "corridor_gym/csv.hpp"
#include "corridor_gym/errors.hpp"

namespace cgym {

const char* to_string(EventKind k) { return k == EventKind::NMAC ? "NMAC" : "LoWC"; }

EventKind parse_event_kind(const std::string& s) {
  if (s == "NMAC") return EventKind::NMAC;
  if (s == "LoWC") return EventKind::LoWC;
  throw InputError("unknown event kind '" + s + "'");
}

bool event_less(const SafetyEvent& a, const SafetyEvent& b) {
  return std::tuple(a.onset_time, static_cast<int>(a.kind), a.id_a, a.id_b) <
         std::tuple(b.onset_time, static_cast<int>(b.kind), b.id_a, b.id_b);
}

void MetricsParams::validate() const {
  if (!(d_nmac > 0.0) || !(d_nmac < d_lowc)) throw ConfigError("metrics require 0 < d_nmac < d_lowc");
  if (!(rearm_margin >= 0.0)) throw ConfigError("rearm margin must be >= 0");
  if (!(hold_speed_mps >= 0.0)) throw ConfigError("hold speed threshold must be >= 0");
}

EventDetector::EventDetector(MetricsParams params) : params_(params) { params_.validate(); }

namespace {

struct CellHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& c) const noexcept {
    return std::hash<std::int64_t>()(c.first * 73856093LL ^ c.second * 19349663LL);
  }
};

}  // namespace

std::vector<SafetyEvent> EventDetector::update(double time, std::span<const PositionSample> positions) {
  if (last_time_ && !(time > *last_time_)) {
    throw InputError("event detector samples must be strictly time-ordered");
  }
  last_time_ = time;

  {
    std::vector<AircraftId> ids;
    ids.reserve(positions.size());
    for (const auto& p : positions) ids.push_back(p.id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) throw InputError("duplicate aircraft id " + std::to_string(*dup) + " in one sample");
  }

  const double reach = params_.d_lowc + params_.rearm_margin;
  const double thresholds[2] = {params_.d_nmac, params_.d_lowc};

  // Pairs within reach this sample, keyed (id_a, id_b) with id_a < id_b.
  std::map<std::pair<AircraftId, AircraftId>, double> near;
  {
    std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>, CellHash> grid;
    grid.reserve(positions.size());
    auto cell_of = [reach](const PositionSample& p) {
      return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x / reach)),
                                                   static_cast<std::int64_t>(std::floor(p.y / reach))};
    };
    for (std::size_t i = 0; i < positions.size(); ++i) grid[cell_of(positions[i])].push_back(i);

    for (std::size_t i = 0; i < positions.size(); ++i) {
      const PositionSample& p = positions[i];
      const auto [cx, cy] = cell_of(p);
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          auto it = grid.find({cx + dx, cy + dy});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            const PositionSample& q = positions[j];
            if (q.id <= p.id) continue;
            const double ddx = p.x - q.x;
            const double ddy = p.y - q.y;
            const double ddz = p.z - q.z;
            const double d = std::sqrt(ddx * ddx + ddy * ddy + ddz * ddz);
            if (d < reach) near.emplace(std::pair{p.id, q.id}, d);
          }
        }
      }
    }
  }

  // Close intervals whose pair left the band (or left the sample).
  for (auto it = open_.begin(); it != open_.end();) {
    const auto& [kind, a, b] = it->first;
    auto n = near.find({a, b});
    const double limit = thresholds[kind] + params_.rearm_margin;
    if (n != near.end() && n->second < limit) {
      it->second.end_time = time;
      it->second.min_distance = std::min(it->second.min_distance, n->second);
      ++it;
    } else {
      closed_.push_back(it->second);
      it = open_.erase(it);
    }
  }

  std::vector<SafetyEvent> opened;
  for (const auto& [pair, d] : near) {
    for (int kind = 0; kind < 2; ++kind) {
      if (!(d < thresholds[kind])) continue;
      const Key key{kind, pair.first, pair.second};
      if (open_.count(key)) continue;
      SafetyEvent ev{static_cast<EventKind>(kind), pair.first, pair.second, time, time, d};
      open_.emplace(key, ev);
      opened.push_back(ev);
    }
  }
  std::sort(opened.begin(), opened.end(), event_less);
  return opened;
}

std::vector<SafetyEvent> EventDetector::finish() {
  for (auto& [_, ev] : open_) closed_.push_back(ev);
  open_.clear();
  std::vector<SafetyEvent> out = closed_;
  std::sort(out.begin(), out.end(), event_less);
  return out;
}

std::vector<SafetyEvent> detect_events(std::span<const PositionRecord> records, const MetricsParams& params) {
  EventDetector det(params);
  std::vector<PositionSample> sample;
  std::size_t i = 0;
  while (i < records.size()) {
    const double t = records[i].time;
    sample.clear();
    while (i < records.size() && records[i].time == t) sample.push_back(records[i++].pos);
    if (i < records.size() && records[i].time < t) {
      throw InputError("trajectory records are not time-ordered at t=" + csv::format_double(records[i].time));
    }
    det.update(t, sample);
  }
  return det.finish();
}

std::size_t count_events(std::span<const SafetyEvent> events, EventKind kind) {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [kind](const SafetyEvent& e) { return e.kind == kind; }));
}

namespace {
double ratio_of(std::span<const SafetyEvent> algo, std::span<const SafetyEvent> base, EventKind kind) {
  const std::size_t den = count_events(base, kind);
  if (den == 0) {
    throw UndefinedRatioError(std::string("unequipped run has zero ") + to_string(kind) +
                              " events; ratio is undefined");
  }
  return static_cast<double>(count_events(algo, kind)) / static_cast<double>(den);
}
}  // namespace

double risk_ratio(std::span<const SafetyEvent> algo, std::span<const SafetyEvent> unequipped) {
  return ratio_of(algo, unequipped, EventKind::NMAC);
}

double lowc_ratio(std::span<const SafetyEvent> algo, std::span<const SafetyEvent> unequipped) {
  return ratio_of(algo, unequipped, EventKind::LoWC);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("summarize needs at least one value");
  Summary s;
  s.n = values.size();
  // Identical samples summarize exactly, without summation rounding.
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    s.mean = values.front();
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

EvalReport aggregate(std::span<const IterationMetrics> iterations) {
  if (iterations.empty()) throw ContractViolation("aggregate needs at least one iteration");
  EvalReport r;
  r.n_iterations = iterations.size();
  std::vector<double> risk, lowc, norm;
  std::size_t decisions = 0, alerts = 0;
  double wall = 0.0;
  for (const auto& it : iterations) {
    r.nmac_counts.push_back(it.nmac);
    r.lowc_counts.push_back(it.lowc);
    r.unequipped_nmac_counts.push_back(it.unequipped_nmac);
    r.unequipped_lowc_counts.push_back(it.unequipped_lowc);
    if (it.unequipped_nmac > 0) {
      risk.push_back(static_cast<double>(it.nmac) / static_cast<double>(it.unequipped_nmac));
    } else {
      ++r.risk_ratio_undefined;
    }
    if (it.unequipped_lowc > 0) {
      lowc.push_back(static_cast<double>(it.lowc) / static_cast<double>(it.unequipped_lowc));
    } else {
      ++r.lowc_ratio_undefined;
    }
    norm.push_back(it.n_aircraft ? static_cast<double>(it.nmac) / static_cast<double>(it.n_aircraft) : 0.0);
    decisions += it.decisions;
    alerts += it.alerts;
    r.airborne_holding_time_s += it.holding_time_s;
    r.aircraft_states += it.aircraft_states;
    wall += it.wall_s;
  }
  if (!risk.empty()) r.risk_ratio = summarize(risk);
  if (!lowc.empty()) r.lowc_ratio = summarize(lowc);
  r.normalized_nmac = summarize(norm);
  r.alert_rate = decisions ? static_cast<double>(alerts) / static_cast<double>(decisions) : 0.0;
  r.throughput = wall > 0.0 ? static_cast<double>(r.aircraft_states) / wall : 0.0;
  return r;
}

namespace {
nlohmann::json summary_json(const std::optional<Summary>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"std", s->std}, {"n", s->n}};
}
}  // namespace

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_iterations"] = r.n_iterations;
  j["nmac_counts"] = r.nmac_counts;
  j["lowc_counts"] = r.lowc_counts;
  j["unequipped_nmac_counts"] = r.unequipped_nmac_counts;
  j["unequipped_lowc_counts"] = r.unequipped_lowc_counts;
  j["risk_ratio"] = summary_json(r.risk_ratio);
  j["risk_ratio_undefined_iterations"] = r.risk_ratio_undefined;
  j["lowc_ratio"] = summary_json(r.lowc_ratio);
  j["lowc_ratio_undefined_iterations"] = r.lowc_ratio_undefined;
  j["normalized_nmac"] = summary_json(r.normalized_nmac);
  j["alert_rate"] = r.alert_rate;
  j["airborne_holding_time_s"] = r.airborne_holding_time_s;
  j["aircraft_states"] = r.aircraft_states;
  j["throughput_states_per_s"] = r.throughput;
  return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << report_to_json(report);
}

void write_events_csv(std::span<const SafetyEvent> events, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "kind,id_a,id_b,onset_s,end_s,min_dist_m\n";
  for (const auto& e : events) {
    out << to_string(e.kind) << ',' << e.id_a << ',' << e.id_b << ',' << csv::format_double(e.onset_time) << ','
        << csv::format_double(e.end_time) << ',' << csv::format_double(e.min_distance) << '\n';
  }
}

std::vector<SafetyEvent> read_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<SafetyEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    auto c = csv::split(line);
    if (c.size() != 6) throw InputError(ctx + ": expected 6 columns");
    SafetyEvent e;
    e.kind = parse_event_kind(std::string(c[0]));
    e.id_a = static_cast<AircraftId>(csv::parse_int(c[1], ctx));
    e.id_b = static_cast<AircraftId>(csv::parse_int(c[2], ctx));
    e.onset_time = csv::parse_double(c[3], ctx);
    e.end_time = csv::parse_double(c[4], ctx);
    e.min_distance = csv::parse_double(c[5], ctx);
    out.push_back(e);
  }
  return out;
}

}  // namespace cgym
