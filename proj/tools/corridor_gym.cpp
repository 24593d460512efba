// corridor_gym: scenario generation, training, evaluation, log reports and
// the external-agent protocol server.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>

#include "corridor_gym/config.hpp"
#include "corridor_gym/errors.hpp"
#include "corridor_gym/harness.hpp"
#include "corridor_gym/metrics.hpp"
#include "corridor_gym/protocol.hpp"
#include "corridor_gym/scenario.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Dotted-path override key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Seed; overrides config and CORRIDOR_GYM_SEED");
  cmd->add_option("--out", o.out, "Output location");
}

// File, then --set, then the environment variable, then --seed.
cgym::ExperimentConfig resolve(const CommonOptions& o) {
  cgym::ExperimentConfig cfg =
      o.config_path.empty() ? cgym::ExperimentConfig{} : cgym::ExperimentConfig::from_file(o.config_path);
  for (const auto& kv : o.overrides) cfg.set_assignment(kv);
  cfg.apply_environment();
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  return cfg;
}

void set_output_dir(cgym::ExperimentConfig& cfg, const std::string& out) {
  if (!out.empty()) cfg.set("output_dir", out);
}

int cmd_generate(const CommonOptions& o) {
  cgym::ExperimentConfig cfg = resolve(o);
  cfg.validate();
  const auto run = cfg.run();
  const cgym::Scenario s = cgym::build_scenario(cfg, run.seed);
  const fs::path path = o.out.empty() ? run.output_dir / "scenario.json" : fs::path(o.out);
  cgym::save_scenario(s, path);
  std::cout << "wrote " << path.string() << " (" << s.flights.size() << " flights, " << s.routes.size()
            << " routes, " << s.vertiports.size() << " vertiports)\n";
  return 0;
}

int cmd_train(const CommonOptions& o) {
  cgym::ExperimentConfig cfg = resolve(o);
  set_output_dir(cfg, o.out);
  const cgym::TrainingResult r = cgym::run_training(cfg);
  std::cout << "iterations: " << r.records.size() << "\nenv steps: " << r.env_steps
            << "\ntrain steps: " << r.train_steps << "\n";
  if (r.best_iteration) {
    std::cout << "best iteration: " << *r.best_iteration << " (" << r.best_checkpoint.string() << ")\n";
  }
  if (r.budget_exhausted) std::cout << "stopped by time budget\n";
  std::cout << "learning curve: " << (r.output_dir / "learning_curve.csv").string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& checkpoint, std::optional<std::size_t> iterations) {
  cgym::ExperimentConfig cfg = resolve(o);
  set_output_dir(cfg, o.out);
  if (iterations) cfg.set("eval_iterations", std::to_string(*iterations));
  const cgym::EvaluationResult r = cgym::run_evaluation(cfg, checkpoint);
  std::cout << cgym::report_to_json(r.report);
  std::cout << "report: " << (r.output_dir / "report.json").string() << "\n";
  return 0;
}

cgym::IterationMetrics metrics_from_log(const std::vector<cgym::TrajectoryRecord>& rows,
                                        const std::vector<cgym::SafetyEvent>& events, double hold_speed,
                                        double dt) {
  cgym::IterationMetrics m;
  std::set<cgym::AircraftId> ids;
  for (const auto& r : rows) {
    if (r.state.id >= cgym::kBackgroundIdBase) continue;
    ids.insert(r.state.id);
    ++m.aircraft_states;
    if (r.action) {
      ++m.decisions;
      if (*r.action != cgym::to_index(cgym::SpeedCommand::Hold)) ++m.alerts;
      if (r.state.speed < hold_speed) m.holding_time_s += dt;
    }
  }
  m.n_aircraft = ids.size();
  m.nmac = cgym::count_events(events, cgym::EventKind::NMAC);
  m.lowc = cgym::count_events(events, cgym::EventKind::LoWC);
  return m;
}

int cmd_report(const CommonOptions& o, const std::string& log, const std::string& baseline) {
  cgym::ExperimentConfig cfg = resolve(o);
  const cgym::MetricsParams mp = cfg.metrics();
  const double dt = cfg.use_case().dt;
  const fs::path out_dir = o.out.empty() ? fs::path(log).parent_path() : fs::path(o.out);
  if (!out_dir.empty()) fs::create_directories(out_dir);

  const auto rows = cgym::read_trajectory(log);
  const auto events = cgym::detect_events(cgym::to_position_records(rows), mp);
  cgym::IterationMetrics m = metrics_from_log(rows, events, mp.hold_speed_mps, dt);
  if (!baseline.empty()) {
    const auto base_rows = cgym::read_trajectory(baseline);
    const auto base_events = cgym::detect_events(cgym::to_position_records(base_rows), mp);
    m.unequipped_nmac = cgym::count_events(base_events, cgym::EventKind::NMAC);
    m.unequipped_lowc = cgym::count_events(base_events, cgym::EventKind::LoWC);
  }
  const std::vector<cgym::IterationMetrics> its{m};
  const cgym::EvalReport report = cgym::aggregate(its);
  cgym::write_events_csv(events, out_dir / "events.csv");
  cgym::write_report(report, out_dir / "report.json");
  std::cout << "NMAC: " << m.nmac << "\nLoWC: " << m.lowc << "\naircraft: " << m.n_aircraft
            << "\nevents: " << (out_dir / "events.csv").string() << "\nreport: " << (out_dir / "report.json").string()
            << "\n";
  return 0;
}

int cmd_serve(const CommonOptions& o, std::uint16_t port) {
  cgym::ExperimentConfig cfg = resolve(o);
  cfg.validate();
  const auto run = cfg.run();
  const cgym::Scenario scenario = cgym::build_scenario(cfg, run.seed);
  const cgym::UseCaseParams uc = cfg.use_case();
  const cgym::MetricsParams mp = cfg.metrics();
  cgym::ProtocolServer server(
      [=] { return std::make_unique<cgym::Environment>(scenario, uc, mp); }, port);
  std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;
  server.serve_forever();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent corridor separation-assurance simulator and DDQN harness"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, eval_opts, report_opts, serve_opts;
  auto* gen = app.add_subcommand("generate", "Generate a scenario file");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "Train a DDQN policy");
  add_common(train, train_opts);

  std::string checkpoint;
  std::optional<std::size_t> eval_iterations;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint against the unequipped baseline");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path, or 'unequipped'")->required();
  eval->add_option("--iterations", eval_iterations, "Evaluation iterations (default eval_iterations)");

  std::string log, baseline;
  auto* report = app.add_subcommand("report", "Detect events and compute metrics from a trajectory log");
  add_common(report, report_opts);
  report->add_option("--log", log, "Trajectory log")->required()->check(CLI::ExistingFile);
  report->add_option("--baseline", baseline, "Unequipped trajectory log for ratios")->check(CLI::ExistingFile);

  std::uint16_t port = 5555;
  auto* serve = app.add_subcommand("serve", "Serve the environment over the line protocol");
  add_common(serve, serve_opts);
  serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 = ephemeral)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_opts);
    if (*train) return cmd_train(train_opts);
    if (*eval) return cmd_evaluate(eval_opts, checkpoint, eval_iterations);
    if (*report) return cmd_report(report_opts, log, baseline);
    if (*serve) return cmd_serve(serve_opts, port);
  } catch (const cgym::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cgym::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
