#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "corridor_gym/sim.hpp"

namespace cgym {

enum class EventKind { NMAC, LoWC };

const char* to_string(EventKind k);
EventKind parse_event_kind(const std::string& s);  // throws InputError

// One continuous interval during which a pair stayed below a separation
// threshold. id_a < id_b always.
struct SafetyEvent {
  EventKind kind = EventKind::LoWC;
  AircraftId id_a = 0;
  AircraftId id_b = 0;
  double onset_time = 0.0;
  double end_time = 0.0;      // last sample time still inside the interval
  double min_distance = 0.0;  // m

  friend bool operator==(const SafetyEvent&, const SafetyEvent&) = default;
};

// Canonical ordering: (onset, kind, id_a, id_b).
bool event_less(const SafetyEvent& a, const SafetyEvent& b);

struct MetricsParams {
  double d_nmac = 150.0;
  double d_lowc = 450.0;
  // An open interval closes once the distance reaches threshold + margin.
  // Zero re-arms at the threshold itself.
  double rearm_margin = 0.0;
  // Active aircraft slower than this count as airborne holding (~5 kt).
  double hold_speed_mps = 2.5;

  void validate() const;
};

struct PositionSample {
  AircraftId id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Streaming NMAC/LoWC interval tracker. Candidate pairs come from a uniform
// horizontal grid with cell size d_lowc + margin, so each update costs
// O(n + violating pairs) rather than O(n^2).
class EventDetector {
 public:
  explicit EventDetector(MetricsParams params = {});

  // Feeds the positions of every aircraft present at `time`. Returns the
  // events whose interval opened at this sample (end_time == onset_time).
  // Throws InputError if time does not increase or an id repeats.
  std::vector<SafetyEvent> update(double time, std::span<const PositionSample> positions);

  // Closes every open interval and returns all events in canonical order.
  // The detector may keep being used afterwards; closed intervals are kept.
  std::vector<SafetyEvent> finish();

  std::size_t open_count() const { return open_.size(); }
  const MetricsParams& params() const { return params_; }

 private:
  using Key = std::tuple<int, AircraftId, AircraftId>;

  MetricsParams params_;
  std::optional<double> last_time_;
  std::map<Key, SafetyEvent> open_;
  std::vector<SafetyEvent> closed_;
};

// One row of a trajectory log reduced to what conflict detection needs.
struct PositionRecord {
  double time = 0.0;
  PositionSample pos;
};

// Groups time-ordered records into samples and runs an EventDetector over
// them. Throws InputError when records go back in time.
std::vector<SafetyEvent> detect_events(std::span<const PositionRecord> records,
                                       const MetricsParams& params = {});

std::size_t count_events(std::span<const SafetyEvent> events, EventKind kind);

// count_NMAC(algo) / count_NMAC(unequipped). Throws UndefinedRatioError when
// the unequipped run has no NMAC.
double risk_ratio(std::span<const SafetyEvent> algo, std::span<const SafetyEvent> unequipped);
double lowc_ratio(std::span<const SafetyEvent> algo, std::span<const SafetyEvent> unequipped);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (N - 1); 0 when N == 1
  std::size_t n = 0;
};

// Requires at least one value.
Summary summarize(std::span<const double> values);

// Per-evaluation-iteration measurements for one algorithm run and its matching
// unequipped run.
struct IterationMetrics {
  std::size_t nmac = 0;
  std::size_t lowc = 0;
  std::size_t unequipped_nmac = 0;
  std::size_t unequipped_lowc = 0;
  std::size_t n_aircraft = 0;
  std::size_t decisions = 0;
  std::size_t alerts = 0;  // decisions other than Hold
  double holding_time_s = 0.0;
  std::size_t aircraft_states = 0;
  double wall_s = 0.0;
};

struct EvalReport {
  std::size_t n_iterations = 0;
  std::vector<std::size_t> nmac_counts;
  std::vector<std::size_t> lowc_counts;
  std::vector<std::size_t> unequipped_nmac_counts;
  std::vector<std::size_t> unequipped_lowc_counts;
  // Summaries over the iterations whose denominator was non-zero; absent when
  // no iteration had one.
  std::optional<Summary> risk_ratio;
  std::optional<Summary> lowc_ratio;
  std::size_t risk_ratio_undefined = 0;
  std::size_t lowc_ratio_undefined = 0;
  Summary normalized_nmac;  // NMAC per aircraft
  double alert_rate = 0.0;
  double airborne_holding_time_s = 0.0;
  std::size_t aircraft_states = 0;
  double throughput = 0.0;  // aircraft states per wall-clock second
};

// Throws ContractViolation on an empty input.
EvalReport aggregate(std::span<const IterationMetrics> iterations);

std::string report_to_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);

// kind,id_a,id_b,onset_s,end_s,min_dist_m
void write_events_csv(std::span<const SafetyEvent> events, const std::filesystem::path& path);
std::vector<SafetyEvent> read_events_csv(const std::filesystem::path& path);

}  // namespace cgym
