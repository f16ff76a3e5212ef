// vsltk: variable speed limit control toolkit.
//
// Subcommands: simulate, train, serve, replay, analyze. Every run is
// deterministic given its inputs and --seed; errors go to stderr and set a
// nonzero exit code.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "vsl/analytics.hpp"
#include "vsl/config.hpp"
#include "vsl/policy.hpp"
#include "vsl/replay.hpp"
#include "vsl/runner.hpp"
#include "vsl/service.hpp"
#include "vsl/training.hpp"

namespace fs = std::filesystem;
using namespace vsl;

namespace {

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }

struct CommonArgs {
  std::string config_path;
  std::string builtin = "training";
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;  // flag overrides the config value

  std::uint64_t effective_seed(const ConfigBundle& cfg) const {
    return seed.value_or(cfg.scenario_options.seed);
  }
};

ConfigBundle resolve_config(const CommonArgs& args, std::string& cfg_hash) {
  ConfigBundle cfg;
  if (!args.config_path.empty()) {
    cfg = load_config(args.config_path);
    cfg_hash = config_hash(args.config_path);
  } else {
    cfg.scenario_builtin = args.builtin;
    cfg_hash = "builtin-" + args.builtin;
  }
  if (args.seed) cfg.scenario_options.seed = *args.seed;
  return cfg;
}

int cmd_simulate(const CommonArgs& args, const std::string& checkpoint, const std::string& mode,
                 int fixed_limit, double horizon, double compliance) {
  std::string cfg_hash;
  ConfigBundle cfg = resolve_config(args, cfg_hash);
  if (horizon >= 0.0) cfg.scenario_options.horizon_s = horizon;
  if (compliance >= 0.0) cfg.scenario_options.compliance = compliance;
  Scenario scen = cfg.build_scenario();

  SimulateOptions opt;
  opt.guards = cfg.guards;
  opt.out_dir = args.out_dir;
  if (mode == "policy") {
    opt.mode = ControlMode::Policy;
    if (checkpoint.empty()) throw std::runtime_error("--mode policy requires --checkpoint");
    opt.checkpoint = checkpoint;
  } else if (mode == "fixed") {
    opt.mode = ControlMode::FixedLimit;
    opt.fixed_limit = fixed_limit;
  } else if (mode == "none") {
    opt.mode = ControlMode::NoControl;
  } else {
    throw std::runtime_error("unknown mode: " + mode + " (expected none|fixed|policy)");
  }

  const auto summary = run_closed_loop(scen, opt);
  write_summary_json(summary, fs::path(args.out_dir) / "summary.json");
  std::vector<std::string> files{"measurements.csv", "summary.json"};
  if (opt.mode == ControlMode::Policy) files.push_back("decisions/");
  write_manifest(args.out_dir, "simulate", cfg_hash, cfg.scenario_options.seed, files);
  std::printf("simulate: %d ticks, VHT %.2f, VMT %.2f, mean speed %.2f mph\n", summary.ticks,
              summary.vht, summary.vmt, summary.mean_speed);
  return 0;
}

int cmd_train(const CommonArgs& args, int iterations, double compliance) {
  std::string cfg_hash;
  ConfigBundle cfg = resolve_config(args, cfg_hash);
  if (compliance >= 0.0) cfg.scenario_options.compliance = compliance;

  marl::Hyperparams hp;
  hp.seed = cfg.scenario_options.seed;
  if (iterations >= 0) hp.iterations = iterations;

  fs::create_directories(args.out_dir);
  const auto factory = [&cfg](std::uint64_t episode_seed) {
    ScenarioOptions so = cfg.scenario_options;
    so.seed = episode_seed;
    if (so.demand_jitter == 0.0) so.demand_jitter = 0.05;
    return cfg.scenario_builtin == "testing" ? build_testing_scenario(so)
                                             : build_training_scenario(so);
  };

  std::ofstream curve(fs::path(args.out_dir) / "curve.csv");
  curve << "iteration,mean_reward,actor_loss,critic_loss,approx_kl,clip_fraction\n";
  marl::train(factory, hp, marl::RewardWeights{}, fs::path(args.out_dir),
              [&curve](const marl::IterationStats& s) {
                                    char buf[160];
                                    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                                                  s.iteration, s.mean_episode_reward, s.actor_loss,
                                                  s.critic_loss, s.approx_kl, s.clip_fraction);
                                    curve << buf;
                                    std::printf("iter %3d  reward %8.4f  kl %.5f\n", s.iteration,
                                                s.mean_episode_reward, s.approx_kl);
                                  });
  curve.close();
  write_manifest(args.out_dir, "train", cfg_hash, hp.seed, {"checkpoint.json", "curve.csv"});
  std::printf("train: wrote %s\n", (fs::path(args.out_dir) / "checkpoint.json").c_str());
  return 0;
}

int cmd_serve(const CommonArgs& args, const std::string& checkpoint, int port, double tick_seconds,
              bool data_clock, long max_ticks) {
  std::string cfg_hash;
  ConfigBundle cfg = resolve_config(args, cfg_hash);
  Corridor corridor = cfg.build_corridor();
  corridor.assign_critical_sensors();

  PolicyFn policy;
  if (!checkpoint.empty()) {
    policy = marl::make_greedy_policy(marl::PolicyParams::load(checkpoint));
  } else {
    policy = marl::make_greedy_policy(marl::make_biased_actor(70));
    std::fprintf(stderr, "serve: no checkpoint given, using the free-flow stub policy\n");
  }

  dss::ServiceConfig svc = cfg.service;
  if (port >= 0) svc.port = port;
  if (tick_seconds > 0.0) svc.tick_seconds = tick_seconds;
  svc.data_clock = data_clock;
  if (svc.log_dir.empty()) svc.log_dir = (fs::path(args.out_dir) / "decisions").string();

  dss::DssService service(std::move(corridor), cfg.guards, std::move(policy), svc);
  service.start();
  std::printf("serve: listening on %s:%d (tick %.1fs, %s clock)\n", svc.host.c_str(),
              service.port(), svc.tick_seconds, svc.data_clock ? "data" : "wall");
  std::fflush(stdout);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (max_ticks > 0 && service.health().tick_count >= max_ticks) break;
  }
  service.stop();
  const auto h = service.health();
  std::printf("serve: stopped after %d ticks (%d errors)\n", h.tick_count, h.error_count);
  return 0;
}

int cmd_replay(const CommonArgs& args, const std::string& input, const std::string& checkpoint,
               double tick_seconds) {
  std::string cfg_hash;
  ConfigBundle cfg = resolve_config(args, cfg_hash);
  Corridor corridor = cfg.build_corridor();
  corridor.assign_critical_sensors();

  PolicyFn policy = checkpoint.empty()
                        ? marl::make_greedy_policy(marl::make_biased_actor(70))
                        : marl::make_greedy_policy(marl::PolicyParams::load(checkpoint));
  const double tick = tick_seconds > 0.0 ? tick_seconds : cfg.service.tick_seconds;
  const auto stats = dss::replay(input, corridor, cfg.guards, policy, tick,
                                 fs::path(args.out_dir) / "decisions");
  write_manifest(args.out_dir, "replay", cfg_hash, cfg.scenario_options.seed, {"decisions/"});
  std::printf("replay: %d ticks, %d records (%d interpolated)\n", stats.ticks, stats.records,
              stats.interpolated_records);
  return 0;
}

std::vector<dss::DecisionLogRecord> load_logs(const std::vector<std::string>& paths) {
  std::vector<dss::DecisionLogRecord> records;
  for (const auto& p : paths) {
    auto part = dss::read_decision_log(p);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw std::runtime_error("no decision records found");
  return records;
}

int cmd_analyze_attribution(const CommonArgs& args, const std::vector<std::string>& logs,
                            const std::string& peak, bool exclude_custom) {
  analytics::AttributionFilters filters;
  if (!peak.empty()) {
    const auto dash = peak.find('-');
    if (dash == std::string::npos) throw std::runtime_error("--peak expects H-H, e.g. 6-9");
    filters.peak_hours = {std::stoi(peak.substr(0, dash)), std::stoi(peak.substr(dash + 1))};
  }
  if (exclude_custom) {
    std::string cfg_hash;
    ConfigBundle cfg = resolve_config(args, cfg_hash);
    const Corridor corridor = cfg.build_corridor();
    for (const int gi : corridor.custom_max_gantries()) {
      filters.exclude_gantries.insert(corridor.gantries()[static_cast<std::size_t>(gi)].id);
    }
  }
  const auto summary = analytics::attribution_summary(load_logs(logs), filters);
  const auto table = analytics::attribution_table_csv(summary);
  fs::create_directories(args.out_dir);
  std::ofstream(fs::path(args.out_dir) / "attribution.csv") << table;
  std::fputs(table.c_str(), stdout);
  if (summary.empty) std::printf("(no decisions matched the filters)\n");
  return 0;
}

int cmd_analyze_mismatch(const CommonArgs& args, const std::string& checkpoint, int runs,
                         std::size_t samples, double horizon) {
  MismatchStudyOptions opt;
  opt.seed = args.seed.value_or(1);
  opt.runs_per_block = runs;
  opt.samples = samples;
  opt.horizon_s = horizon;
  const PolicyFn policy = checkpoint.empty()
                              ? marl::make_greedy_policy(marl::make_biased_actor(70))
                              : marl::make_greedy_policy(marl::PolicyParams::load(checkpoint));
  const auto result = run_mismatch_study(opt, policy);
  fs::create_directories(args.out_dir);
  analytics::write_matrix_csv(result.matrix, result.labels,
                              fs::path(args.out_dir) / "mismatch_matrix.csv");
  std::printf("mismatch: mean within-block %.4f, mean cross-block %.4f\n", result.mean_within,
              result.mean_cross);
  return 0;
}

int cmd_analyze_timespace(const CommonArgs& args, const std::string& measurements,
                          const std::vector<std::string>& logs) {
  fs::create_directories(args.out_dir);
  std::string cfg_hash;
  ConfigBundle cfg = resolve_config(args, cfg_hash);
  const Corridor corridor = cfg.build_corridor();
  if (!measurements.empty()) {
    std::map<std::string, double> sensor_mp;
    for (const auto& s : corridor.sensors()) sensor_mp[s.id] = s.milepost;
    const auto field = analytics::build_speed_field(read_sensor_csv(measurements), sensor_mp,
                                                    corridor.direction());
    analytics::write_speed_grid_csv(field, fs::path(args.out_dir) / "speed_grid.csv");
  }
  if (!logs.empty()) {
    const auto grid = analytics::build_limit_grid(load_logs(logs));
    analytics::write_limit_grid_csv(grid, fs::path(args.out_dir) / "limits_grid.csv", false);
    analytics::write_limit_grid_csv(grid, fs::path(args.out_dir) / "limits_policy_only.csv", true);
  }
  std::printf("timespace: grids written to %s\n", args.out_dir.c_str());
  return 0;
}

int cmd_analyze_vehicle(const CommonArgs& args, const std::string& measurements,
                        const std::vector<std::string>& logs, double start_time,
                        double start_milepost) {
  std::string cfg_hash;
  ConfigBundle cfg = resolve_config(args, cfg_hash);
  const Corridor corridor = cfg.build_corridor();
  std::map<std::string, double> sensor_mp;
  for (const auto& s : corridor.sensors()) sensor_mp[s.id] = s.milepost;
  const auto field = analytics::build_speed_field(read_sensor_csv(measurements), sensor_mp,
                                                  corridor.direction());
  const auto traj = analytics::virtual_vehicle(field, start_time, start_milepost);

  fs::create_directories(args.out_dir);
  std::ofstream out(fs::path(args.out_dir) / "vehicle.csv");
  out << "time,milepost,travel_speed,posted_limit\n";
  char buf[128];
  if (!logs.empty()) {
    std::map<std::string, double> gantry_mp;
    for (const auto& g : corridor.gantries()) gantry_mp[g.id] = g.milepost;
    const auto series =
        analytics::vsl_encounter_series(traj, load_logs(logs), gantry_mp, corridor.direction());
    for (const auto& e : series) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.4f,%.4f,", e.t, e.milepost, e.travel_speed);
      out << buf;
      if (e.posted_limit) out << *e.posted_limit;
      out << "\n";
    }
  } else {
    for (const auto& s : traj) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.4f,%.4f,\n", s.t, s.milepost, s.speed);
      out << buf;
    }
  }
  std::printf("vehicle: %zu trajectory samples written\n", traj.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MARL-based variable speed limit control toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string checkpoint, mode = "none", input, peak, measurements;
  std::vector<std::string> logs;
  int fixed_limit = 70, iterations = -1, port = -1, runs = 5;
  long max_ticks = 0;
  double horizon = -1.0, compliance = -1.0, tick_seconds = -1.0;
  double start_time = 0.0, start_milepost = 0.0;
  std::size_t samples = 500;
  bool data_clock = false, exclude_custom = false;

  const auto add_common = [&common](CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--config", common.config_path, "configuration file (JSON)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--builtin", common.builtin, "builtin scenario: training|testing");
    if (with_out) cmd->add_option("--out", common.out_dir, "output directory");
    cmd->add_option("--seed", common.seed, "root random seed");
  };

  auto* simulate = app.add_subcommand("simulate", "closed-loop scenario simulation");
  add_common(simulate);
  simulate->add_option("--checkpoint", checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  simulate->add_option("--mode", mode, "none|fixed|policy");
  simulate->add_option("--fixed-limit", fixed_limit, "limit for --mode fixed");
  simulate->add_option("--horizon", horizon, "simulation horizon in seconds");
  simulate->add_option("--compliance", compliance, "driver compliance rate");

  auto* train = app.add_subcommand("train", "train the MAPPO policy");
  add_common(train);
  train->add_option("--iterations", iterations, "training iterations");
  train->add_option("--compliance", compliance, "driver compliance rate");

  auto* serve = app.add_subcommand("serve", "run the decision-support service");
  add_common(serve);
  serve->add_option("--checkpoint", checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port (0 = ephemeral)")->envname("VSLTK_PORT");
  serve->add_option("--tick-seconds", tick_seconds, "decision interval")->envname("VSLTK_TICK_SECONDS");
  serve->add_flag("--data-clock", data_clock, "tick on data timestamps instead of wall clock");
  serve->add_option("--max-ticks", max_ticks, "stop after this many ticks (0 = run until signal)");

  auto* replay = app.add_subcommand("replay", "open-loop replay of a sensor CSV");
  add_common(replay);
  replay->add_option("--input", input, "recorded sensor CSV")->required()->check(CLI::ExistingFile);
  replay->add_option("--checkpoint", checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  replay->add_option("--tick-seconds", tick_seconds, "decision interval");

  auto* analyze = app.add_subcommand("analyze", "post-hoc analyses");
  analyze->require_subcommand(1);

  auto* attribution = analyze->add_subcommand("attribution", "stage attribution summary");
  add_common(attribution);
  attribution->add_option("--log", logs, "decision log file(s) or directory")->required();
  attribution->add_option("--peak", peak, "peak-hour window, e.g. 6-9");
  attribution->add_flag("--exclude-custom-max", exclude_custom,
                        "exclude gantries with a custom max limit");

  auto* mismatch = analyze->add_subcommand("mismatch", "domain-mismatch Wasserstein matrix");
  add_common(mismatch);
  mismatch->add_option("--checkpoint", checkpoint, "policy checkpoint")->check(CLI::ExistingFile);
  mismatch->add_option("--runs", runs, "runs per block");
  mismatch->add_option("--samples", samples, "observation samples per dataset");
  double mismatch_horizon = 1800.0;
  mismatch->add_option("--horizon", mismatch_horizon, "seconds simulated per run");

  auto* timespace = analyze->add_subcommand("timespace", "time-space diagram grids");
  add_common(timespace);
  timespace->add_option("--measurements", measurements, "sensor CSV")->check(CLI::ExistingFile);
  timespace->add_option("--log", logs, "decision log file(s) or directory");

  auto* vehicle = analyze->add_subcommand("vehicle", "virtual vehicle trajectory");
  add_common(vehicle);
  vehicle->add_option("--measurements", measurements, "sensor CSV")
      ->required()
      ->check(CLI::ExistingFile);
  vehicle->add_option("--log", logs, "decision log file(s) or directory");
  vehicle->add_option("--start-time", start_time, "start timestamp (s)")->required();
  vehicle->add_option("--start-milepost", start_milepost, "start milepost")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      if (!checkpoint.empty() && mode == "none") mode = "policy";
      return cmd_simulate(common, checkpoint, mode, fixed_limit, horizon, compliance);
    }
    if (train->parsed()) return cmd_train(common, iterations, compliance);
    if (serve->parsed()) {
      return cmd_serve(common, checkpoint, port, tick_seconds, data_clock, max_ticks);
    }
    if (replay->parsed()) return cmd_replay(common, input, checkpoint, tick_seconds);
    if (analyze->parsed()) {
      if (attribution->parsed()) {
        return cmd_analyze_attribution(common, logs, peak, exclude_custom);
      }
      if (mismatch->parsed()) {
        return cmd_analyze_mismatch(common, checkpoint, runs, samples, mismatch_horizon);
      }
      if (timespace->parsed()) return cmd_analyze_timespace(common, measurements, logs);
      if (vehicle->parsed()) {
        return cmd_analyze_vehicle(common, measurements, logs, start_time, start_milepost);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
