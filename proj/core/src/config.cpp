#include "corridor_gym/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "corridor_gym/csv.hpp"
#include "corridor_gym/errors.hpp"
#include "json_fields.hpp"

namespace cgym {

using detail::json;

namespace {

json make_defaults() {
  const UseCaseParams u;
  const DdqnConfig d;
  const NetworkParams n;
  const FlightParams f;
  const MetricsParams m;
  json t;
  t["use_case"] = {
      {"name", "corridor_separation"},
      {"d_nmac", u.d_nmac},
      {"d_lowc", u.d_lowc},
      {"d_max", u.d_max},
      {"n_wpt", u.n_wpt},
      {"n_intruders", u.n_intruders},
      {"alpha", u.alpha},
      {"delta", u.delta},
      {"psi", u.psi},
      {"omega", u.omega},
      {"dt", u.dt},
      {"v_min", u.envelope.v_min},
      {"v_max", u.envelope.v_max},
      {"accel_mag", u.envelope.accel_mag},
      {"capture_radius_m", u.capture_radius},
      {"remove_on_nmac", u.remove_on_nmac},
      {"max_episode_s", u.max_episode_s},
  };
  t["algorithm"] = {
      {"name", "ddqn"},
      {"batch_size", d.batch_size},
      {"hidden_nodes", d.hidden_nodes},
      {"hidden_layers", d.hidden_layers},
      {"gamma", d.gamma},
      {"eps_decay_steps", d.eps_decay_steps},
      {"eps_start", d.eps_start},
      {"eps_end", d.eps_end},
      {"replay_capacity", d.replay_capacity},
      {"learning_rate", d.learning_rate},
      {"target_update_freq", d.target_update_freq},
      {"optimizer", "sgd"},
      {"train_every", d.train_every},
  };
  t["scenario"] = {
      {"preset", ""},
      {"file", ""},
      {"layout", "ring"},
      {"network_file", ""},
      {"n_vertiports", n.n_vertiports},
      {"spacing_m", n.spacing_m},
      {"n_lanes", n.n_lanes},
      {"base_altitude_m", n.base_altitude_m},
      {"lane_spacing_m", n.lane_spacing_m},
      {"waypoint_spacing_m", n.waypoint_spacing_m},
      {"extra_od_pairs", n.extra_od_pairs},
      {"n_aircraft", 10},
      {"duration_s", f.duration_s},
      {"demand", "poisson"},
      {"schedule_file", ""},
      {"overlay_log", ""},
      {"overtake_delay_s", 60.0},
      {"randomize_per_worker", false},
  };
  t["metrics"] = {
      {"hold_speed_mps", m.hold_speed_mps},
      {"rearm_margin_m", m.rearm_margin},
  };
  t["n_iterations"] = 10;
  t["n_workers"] = 4;
  t["seed"] = std::uint64_t{0};
  t["output_dir"] = "runs/latest";
  t["eval_iterations"] = 100;
  t["time_budget_s"] = 0.0;
  t["log_trajectory"] = true;
  t["keep_all_checkpoints"] = false;
  t["rolling_window"] = 25;
  return t;
}

void collect_keys(const json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      collect_keys(*it, key, out);
    } else {
      out.push_back(key);
    }
  }
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

[[noreturn]] void unknown_key(const std::string& key) {
  std::string msg = "unknown config key '" + key + "'";
  const auto near = nearest_keys(key);
  if (!near.empty()) {
    msg += "; did you mean ";
    for (std::size_t i = 0; i < near.size(); ++i) msg += (i ? ", " : "") + near[i];
    msg += "?";
  }
  throw ValidationError(msg);
}

const char* type_name(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  return "object";
}

bool compatible(const json& declared, const json& value) {
  if (declared.is_boolean()) return value.is_boolean();
  if (declared.is_number_integer()) return value.is_number_integer();
  if (declared.is_number()) return value.is_number();
  if (declared.is_string()) return value.is_string();
  return declared.is_object() && value.is_object();
}

void merge_into(json& target, const json& declared, const json& overlay, const std::string& prefix) {
  if (!overlay.is_object()) throw ValidationError("config section '" + prefix + "' must be an object");
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    auto d = declared.find(it.key());
    if (d == declared.end()) unknown_key(key);
    if (!compatible(*d, *it)) {
      throw ValidationError("config key '" + key + "' expects " + type_name(*d) + ", got " + type_name(*it));
    }
    if (d->is_object()) {
      merge_into(target[it.key()], *d, *it, key);
    } else if (d->is_number_float()) {
      target[it.key()] = it->get<double>();
    } else {
      target[it.key()] = *it;
    }
  }
}

json::json_pointer pointer_of(const std::string& dotted) {
  std::string p;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("malformed config key '" + dotted + "'");
    p += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

template <typename T>
T get(const json& tree, const char* section, const char* key) {
  const std::string path = std::string(section) + "." + key;
  return detail::get_as<T>(tree.at(section).at(key), path);
}

template <typename T>
T get_top(const json& tree, const char* key) {
  return detail::get_as<T>(tree.at(key), key);
}

std::size_t non_negative(std::int64_t v, const std::string& key) {
  if (v < 0) throw ConfigError(key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

std::size_t positive(std::int64_t v, const std::string& key) {
  if (v <= 0) throw ConfigError(key + " must be positive");
  return static_cast<std::size_t>(v);
}

}  // namespace

const json& ExperimentConfig::defaults() {
  static const json d = make_defaults();
  return d;
}

ExperimentConfig::ExperimentConfig() : tree_(defaults()) {}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  cfg.merge(detail::parse_document(ss.str(), path.string()));
  return cfg;
}

void ExperimentConfig::merge(const json& overlay) { merge_into(tree_, defaults(), overlay, ""); }

void ExperimentConfig::set(const std::string& dotted_key, const std::string& value) {
  const auto ptr = pointer_of(dotted_key);
  if (!defaults().contains(ptr)) unknown_key(dotted_key);
  const json& declared = defaults().at(ptr);
  if (declared.is_object()) throw ValidationError("config key '" + dotted_key + "' is a section, not a value");
  const std::string ctx = "--set " + dotted_key;
  json parsed;
  if (declared.is_boolean()) {
    if (value == "true" || value == "1") {
      parsed = true;
    } else if (value == "false" || value == "0") {
      parsed = false;
    } else {
      throw ValidationError(ctx + ": expected true or false, got '" + value + "'");
    }
  } else if (declared.is_number_unsigned()) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) {
      throw ValidationError(ctx + ": expected a non-negative integer, got '" + value + "'");
    }
    parsed = v;
  } else if (declared.is_number_integer()) {
    try {
      parsed = csv::parse_int(value, ctx);
    } catch (const InputError& e) {
      throw ValidationError(e.what());
    }
  } else if (declared.is_number()) {
    try {
      parsed = csv::parse_double(value, ctx);
    } catch (const InputError& e) {
      throw ValidationError(e.what());
    }
  } else {
    parsed = value;
  }
  tree_[ptr] = parsed;
}

void ExperimentConfig::set_assignment(const std::string& key_equals_value) {
  const auto eq = key_equals_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("expected key=value, got '" + key_equals_value + "'");
  }
  set(key_equals_value.substr(0, eq), key_equals_value.substr(eq + 1));
}

void ExperimentConfig::apply_environment() {
  if (const char* s = std::getenv(kSeedEnvVar); s && *s) {
    try {
      set("seed", s);
    } catch (const ValidationError&) {
      throw ValidationError(std::string(kSeedEnvVar) + " must be a non-negative integer, got '" + s + "'");
    }
  }
}

std::string ExperimentConfig::dump() const { return tree_.dump(2) + "\n"; }

void ExperimentConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << dump();
}

UseCaseParams ExperimentConfig::use_case() const {
  const auto name = get<std::string>(tree_, "use_case", "name");
  if (name != "corridor_separation") {
    throw ConfigError("unknown use case '" + name + "' (available: corridor_separation)");
  }
  UseCaseParams u;
  u.d_nmac = get<double>(tree_, "use_case", "d_nmac");
  u.d_lowc = get<double>(tree_, "use_case", "d_lowc");
  u.d_max = get<double>(tree_, "use_case", "d_max");
  u.n_wpt = get<int>(tree_, "use_case", "n_wpt");
  u.n_intruders = get<int>(tree_, "use_case", "n_intruders");
  u.alpha = get<double>(tree_, "use_case", "alpha");
  u.delta = get<double>(tree_, "use_case", "delta");
  u.psi = get<double>(tree_, "use_case", "psi");
  u.omega = get<double>(tree_, "use_case", "omega");
  u.dt = get<double>(tree_, "use_case", "dt");
  u.envelope.v_min = get<double>(tree_, "use_case", "v_min");
  u.envelope.v_max = get<double>(tree_, "use_case", "v_max");
  u.envelope.accel_mag = get<double>(tree_, "use_case", "accel_mag");
  u.capture_radius = get<double>(tree_, "use_case", "capture_radius_m");
  u.remove_on_nmac = get<bool>(tree_, "use_case", "remove_on_nmac");
  u.max_episode_s = get<double>(tree_, "use_case", "max_episode_s");
  u.validate();
  return u;
}

DdqnConfig ExperimentConfig::algorithm() const {
  DdqnConfig d;
  d.batch_size = positive(get<std::int64_t>(tree_, "algorithm", "batch_size"), "algorithm.batch_size");
  d.hidden_nodes = positive(get<std::int64_t>(tree_, "algorithm", "hidden_nodes"), "algorithm.hidden_nodes");
  d.hidden_layers = positive(get<std::int64_t>(tree_, "algorithm", "hidden_layers"), "algorithm.hidden_layers");
  d.gamma = get<double>(tree_, "algorithm", "gamma");
  d.eps_decay_steps =
      positive(get<std::int64_t>(tree_, "algorithm", "eps_decay_steps"), "algorithm.eps_decay_steps");
  d.eps_start = get<double>(tree_, "algorithm", "eps_start");
  d.eps_end = get<double>(tree_, "algorithm", "eps_end");
  d.replay_capacity =
      positive(get<std::int64_t>(tree_, "algorithm", "replay_capacity"), "algorithm.replay_capacity");
  d.learning_rate = get<double>(tree_, "algorithm", "learning_rate");
  d.target_update_freq =
      positive(get<std::int64_t>(tree_, "algorithm", "target_update_freq"), "algorithm.target_update_freq");
  d.optimizer = parse_optimizer(get<std::string>(tree_, "algorithm", "optimizer"));
  d.train_every = positive(get<std::int64_t>(tree_, "algorithm", "train_every"), "algorithm.train_every");
  d.validate();
  return d;
}

ScenarioSettings ExperimentConfig::scenario() const {
  ScenarioSettings s;
  s.preset = get<std::string>(tree_, "scenario", "preset");
  if (!s.preset.empty() && s.preset != "overtake") {
    throw ConfigError("unknown scenario preset '" + s.preset + "' (available: overtake)");
  }
  s.overtake_delay_s = get<double>(tree_, "scenario", "overtake_delay_s");
  s.file = get<std::string>(tree_, "scenario", "file");
  s.network.layout = parse_layout(get<std::string>(tree_, "scenario", "layout"));
  s.network.file = get<std::string>(tree_, "scenario", "network_file");
  s.network.n_vertiports = get<int>(tree_, "scenario", "n_vertiports");
  s.network.spacing_m = get<double>(tree_, "scenario", "spacing_m");
  s.network.n_lanes = get<int>(tree_, "scenario", "n_lanes");
  s.network.base_altitude_m = get<double>(tree_, "scenario", "base_altitude_m");
  s.network.lane_spacing_m = get<double>(tree_, "scenario", "lane_spacing_m");
  s.network.waypoint_spacing_m = get<double>(tree_, "scenario", "waypoint_spacing_m");
  s.network.extra_od_pairs = get<int>(tree_, "scenario", "extra_od_pairs");
  s.flights.n_aircraft = get<int>(tree_, "scenario", "n_aircraft");
  s.flights.duration_s = get<double>(tree_, "scenario", "duration_s");
  s.flights.demand = parse_demand(get<std::string>(tree_, "scenario", "demand"));
  s.flights.schedule_file = get<std::string>(tree_, "scenario", "schedule_file");
  s.overlay_log = get<std::string>(tree_, "scenario", "overlay_log");
  s.randomize_per_worker = get<bool>(tree_, "scenario", "randomize_per_worker");
  if (s.flights.n_aircraft < 0) throw ConfigError("scenario.n_aircraft must be >= 0");
  if (!(s.flights.duration_s > 0.0)) throw ConfigError("scenario.duration_s must be positive");
  if (s.network.layout == Layout::File && s.network.file.empty()) {
    throw ConfigError("scenario.layout=file requires scenario.network_file");
  }
  if (s.flights.demand == DemandModel::Schedule && s.flights.schedule_file.empty()) {
    throw ConfigError("scenario.demand=schedule requires scenario.schedule_file");
  }
  return s;
}

MetricsParams ExperimentConfig::metrics() const {
  const UseCaseParams u = use_case();
  MetricsParams m = u.metrics(get<double>(tree_, "metrics", "hold_speed_mps"),
                              get<double>(tree_, "metrics", "rearm_margin_m"));
  m.validate();
  return m;
}

RunSettings ExperimentConfig::run() const {
  RunSettings r;
  r.algorithm = get<std::string>(tree_, "algorithm", "name");
  if (r.algorithm != "ddqn" && r.algorithm != "unequipped") {
    throw ConfigError("unknown algorithm '" + r.algorithm + "' (available: ddqn, unequipped)");
  }
  r.use_case = get<std::string>(tree_, "use_case", "name");
  r.n_iterations = non_negative(get_top<std::int64_t>(tree_, "n_iterations"), "n_iterations");
  r.n_workers = positive(get_top<std::int64_t>(tree_, "n_workers"), "n_workers");
  if (!tree_.at("seed").is_number_unsigned() && tree_.at("seed").get<std::int64_t>() < 0) {
    throw ConfigError("seed must be >= 0");
  }
  r.seed = get_top<std::uint64_t>(tree_, "seed");
  r.output_dir = get_top<std::string>(tree_, "output_dir");
  r.eval_iterations = positive(get_top<std::int64_t>(tree_, "eval_iterations"), "eval_iterations");
  r.time_budget_s = get_top<double>(tree_, "time_budget_s");
  if (!(r.time_budget_s >= 0.0)) throw ConfigError("time_budget_s must be >= 0");
  r.log_trajectory = get_top<bool>(tree_, "log_trajectory");
  r.keep_all_checkpoints = get_top<bool>(tree_, "keep_all_checkpoints");
  r.rolling_window = positive(get_top<std::int64_t>(tree_, "rolling_window"), "rolling_window");
  return r;
}

void ExperimentConfig::validate() const {
  (void)use_case();
  (void)algorithm();
  (void)scenario();
  (void)metrics();
  (void)run();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  collect_keys(ExperimentConfig::defaults(), "", keys);
  return keys;
}

std::vector<std::string> nearest_keys(const std::string& key, std::size_t limit) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (auto& k : config_keys()) {
    // Also compare against the last path component so "gama" finds
    // "algorithm.gamma".
    const auto dot = k.rfind('.');
    const std::string leaf = dot == std::string::npos ? k : k.substr(dot + 1);
    const auto kdot = key.rfind('.');
    const std::string kleaf = kdot == std::string::npos ? key : key.substr(kdot + 1);
    scored.emplace_back(std::min(edit_distance(key, k), edit_distance(kleaf, leaf)), std::move(k));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < limit; ++i) out.push_back(scored[i].second);
  return out;
}

Scenario build_scenario(const ExperimentConfig& config, std::uint64_t seed) {
  const ScenarioSettings s = config.scenario();
  Scenario scenario;
  if (s.preset == "overtake") {
    scenario = make_overtake_scenario(s.overtake_delay_s);
  } else if (!s.file.empty()) {
    scenario = load_scenario(s.file);
  } else {
    Network net = generate_network(s.network, mix_seed(seed, 1));
    auto flights = generate_flights(net, s.flights, mix_seed(seed, 2));
    scenario = make_scenario(std::move(net), std::move(flights), s.flights.duration_s, seed);
  }
  if (!s.overlay_log.empty()) scenario = overlay_traffic(scenario, s.overlay_log);
  return scenario;
}

}  // namespace cgym
