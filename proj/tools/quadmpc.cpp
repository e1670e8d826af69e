#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "quadmpc/config.hpp"
#include "quadmpc/csv_log.hpp"
#include "quadmpc/scenario.hpp"

using namespace quadmpc;

namespace {

int exit_code(Outcome o) {
  switch (o) {
    case Outcome::Completed: return 0;
    case Outcome::Toppled: return 2;
    case Outcome::SolverFailed: return 3;
  }
  return 1;
}

void print_summary(const ScenarioResult& r) {
  const Metrics& m = r.metrics;
  std::printf("scenario=%s outcome=%s ticks=%zu\n", r.scenario.c_str(), to_string(r.outcome), r.log.size());
  std::printf("max_tilt_deg=%.4f distance=%.4f height_rms=%.5f mean_fz=%.3f drift=%.5f\n", m.max_tilt * 180.0 / kPi,
              m.distance_traveled, m.height_rms_error, m.mean_total_fz, m.max_com_drift);
  for (size_t i = 0; i < m.recovery_times.size(); ++i) std::printf("recovery[%zu]=%.3f\n", i, m.recovery_times[i]);
  if (m.stall_time >= 0.0)
    std::printf("stall=%.3f transition_start=%.3f trot_start=%.3f\n", m.stall_time, m.transition_start,
                m.transition_time);
  if (!r.diagnostics.empty()) std::printf("diagnostics: %s\n", r.diagnostics.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadruped force MPC simulator"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run one closed-loop scenario and write its CSV log");

  ScenarioOptions opt;
  std::string config_path, out_path;
  double duration = -1.0, incline = -1.0, rate = -1.0;
  int horizon = -1;
  std::string ref_model;

  run->add_option("--scenario", opt.scenario, "Scenario name")->required()->check(CLI::IsMember(scenario_names()));
  run->add_option("--duration", duration, "Simulated time, s")->check(CLI::NonNegativeNumber);
  run->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "CSV log path")->required();
  run->add_option("--force", opt.force, "Disturbance magnitude, N");
  run->add_option("--drop-height", opt.drop_height, "Drop height, m")->check(CLI::NonNegativeNumber);
  run->add_option("--incline-deg", incline, "Incline angle, deg")->check(CLI::Range(0.0, 60.0));
  run->add_option("--ref-model", ref_model, "Reference model")->check(CLI::IsMember({"constant", "sine", "ramp"}));
  run->add_option("--mpc-rate", rate, "MPC update rate, Hz")->check(CLI::Range(0.0, 30.0));
  run->add_option("--horizon", horizon, "MPC horizon steps")->check(CLI::PositiveNumber);
  run->add_option("--seed", opt.seed, "Seed for the initial pose jitter");
  run->add_flag("--timing", opt.timing, "Log wall-clock solve time (logs stop being reproducible)");
  run->add_flag("--quiet", "Suppress the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (duration >= 0.0) opt.duration = duration;
  if (incline >= 0.0) opt.incline_deg = incline;
  if (rate > 0.0) opt.mpc_rate = rate;
  if (horizon > 0) opt.horizon = horizon;
  if (!ref_model.empty()) {
    static const std::map<std::string, ReferenceMode> modes = {
        {"constant", ReferenceMode::Constant}, {"sine", ReferenceMode::Sine}, {"ramp", ReferenceMode::Ramp}};
    opt.ref_model = modes.at(ref_model);
  }

  try {
    const SimConfig cfg = config_path.empty() ? SimConfig{} : load_config(config_path);
    const ScenarioResult result = run_scenario(opt, cfg);
    write_log(result, out_path);
    if (run->count("--quiet") == 0) print_summary(result);
    return exit_code(result.outcome);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
