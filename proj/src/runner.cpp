#include "vsl/runner.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace vsl {

SimulateSummary run_closed_loop(Scenario& scen, const SimulateOptions& opt) {
  SimulateSummary summary;
  const int ticks = static_cast<int>(std::floor(scen.cfg.horizon_s / scen.cfg.sensor_interval_s + 1e-9));

  std::optional<SensorCsvWriter> csv;
  std::unique_ptr<dss::DecisionLogWriter> log;
  std::unique_ptr<dss::TickEngine> engine;
  marl::PolicyParams params;

  if (opt.write_outputs) {
    std::filesystem::create_directories(opt.out_dir);
    csv.emplace(opt.out_dir / "measurements.csv");
  }
  if (opt.mode == ControlMode::Policy) {
    if (!opt.checkpoint) throw std::invalid_argument("policy mode requires a checkpoint");
    params = marl::PolicyParams::load(*opt.checkpoint);
    if (opt.write_outputs) {
      log = std::make_unique<dss::DecisionLogWriter>(opt.out_dir / "decisions");
    }
    engine = std::make_unique<dss::TickEngine>(&scen.corridor, opt.guards,
                                               marl::make_greedy_policy(params),
                                               scen.cfg.sensor_interval_s, log.get());
  }

  std::vector<int> fixed;
  if (opt.mode == ControlMode::FixedLimit) {
    for (const auto& g : scen.corridor.gantries()) {
      fixed.push_back(max_speed_clip(snap_down_to_grid(opt.fixed_limit), g.max_limit));
    }
    scen.apply_speed_limits(fixed);
  }

  for (int k = 1; k <= ticks; ++k) {
    const double t = scen.cfg.start_time_s + k * scen.cfg.sensor_interval_s;
    scen.sim->run_until(t);
    const auto ms = scen.readout_all(t);
    if (csv) {
      for (const auto& m : ms) csv->write(m);
    }
    if (engine) {
      for (const auto& m : ms) engine->ingest(from_measurement(m));
      const auto commands = engine->tick_now(t);
      std::vector<int> limits(commands.size());
      for (std::size_t i = 0; i < commands.size(); ++i) {
        limits[i] = commands[i].limit;
        summary.attribution_counts[commands[i].attribution] += 1;
        summary.decisions += 1;
      }
      scen.apply_speed_limits(limits);
    }
  }

  summary.ticks = ticks;
  summary.vht = scen.sim->vehicle_hours();
  summary.vmt = scen.sim->vehicle_miles();
  summary.mean_speed = summary.vht > 1e-12 ? summary.vmt / summary.vht : scen.cfg.fd.v_free;
  summary.final_vehicles = scen.sim->total_vehicles();
  summary.cum_inflow = scen.sim->cum_inflow_veh();
  summary.cum_outflow = scen.sim->cum_outflow_veh();
  return summary;
}

void write_summary_json(const SimulateSummary& summary, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["ticks"] = summary.ticks;
  j["vehicle_hours"] = summary.vht;
  j["vehicle_miles"] = summary.vmt;
  j["mean_speed_mph"] = summary.mean_speed;
  j["final_vehicles"] = summary.final_vehicles;
  j["cum_inflow_veh"] = summary.cum_inflow;
  j["cum_outflow_veh"] = summary.cum_outflow;
  j["decisions"] = summary.decisions;
  auto attr = nlohmann::ordered_json::object();
  for (const auto& [stage, count] : summary.attribution_counts) {
    attr[to_string(stage)] = count;
  }
  j["attribution_counts"] = attr;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                    const std::string& cfg_hash, std::uint64_t seed,
                    const std::vector<std::string>& files) {
  nlohmann::ordered_json j;
  j["tool"] = "vsltk";
  j["layout_version"] = 1;
  j["subcommand"] = subcommand;
  j["config_hash"] = cfg_hash;
  j["seed"] = seed;
  j["files"] = files;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << "\n";
}

ot::PointSet collect_observations(Scenario& scen, const PolicyFn& policy,
                                  const GuardConfig& guards) {
  const int ticks = static_cast<int>(std::floor(scen.cfg.horizon_s / scen.cfg.sensor_interval_s + 1e-9));
  GuardPipeline pipeline(&scen.corridor, guards, policy);

  ot::PointSet points;
  for (int k = 1; k <= ticks; ++k) {
    const double t = scen.cfg.start_time_s + k * scen.cfg.sensor_interval_s;
    scen.sim->run_until(t);
    const auto ms = scen.readout_all(t);
    std::unordered_map<std::string, Measurement> by_sensor;
    for (const auto& m : ms) by_sensor.emplace(m.sensor_id, m);
    const auto decisions = pipeline.step(by_sensor);
    std::vector<int> limits;
    limits.reserve(decisions.size());
    for (const auto& d : decisions) {
      const auto arr = d.observation.as_array();
      points.push_back(std::vector<double>(arr.begin(), arr.end()));
      limits.push_back(d.final);
    }
    scen.apply_speed_limits(limits);
  }
  return points;
}

MismatchResult run_mismatch_study(const MismatchStudyOptions& opt, const PolicyFn& policy) {
  std::vector<ot::PointSet> datasets;
  MismatchResult result;

  for (int block = 0; block < 2; ++block) {
    for (int run = 0; run < opt.runs_per_block; ++run) {
      ScenarioOptions so;
      so.seed = sub_seed(opt.seed, block == 0 ? "mismatch.nominal" : "mismatch.perturbed",
                         static_cast<std::uint64_t>(run));
      so.horizon_s = opt.horizon_s;
      so.demand_jitter = 0.02;
      if (block == 1) {
        so.demand_scale = opt.perturbed_demand_scale;
        so.k_jam_scale = opt.perturbed_k_jam_scale;
        so.sensor_noise_speed = opt.perturbed_noise_speed;
        so.sensor_noise_occ = opt.perturbed_noise_occ;
      }
      Scenario scen = build_testing_scenario(so);
      const auto obs = collect_observations(scen, policy, opt.guards);
      datasets.push_back(analytics::sample_points(obs, opt.samples,
                                                  sub_seed(so.seed, "mismatch.sample")));
      result.labels.push_back((block == 0 ? "sim" : "perturbed") + std::to_string(run + 1));
    }
  }

  result.matrix = ot::mismatch_matrix(datasets, opt.order);
  const int r = opt.runs_per_block;
  double within = 0.0, cross = 0.0;
  int n_within = 0, n_cross = 0;
  const int total = 2 * r;
  for (int i = 0; i < total; ++i) {
    for (int j = i + 1; j < total; ++j) {
      const bool same_block = (i < r) == (j < r);
      if (same_block) {
        within += result.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        n_within += 1;
      } else {
        cross += result.matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        n_cross += 1;
      }
    }
  }
  result.mean_within = n_within > 0 ? within / n_within : 0.0;
  result.mean_cross = n_cross > 0 ? cross / n_cross : 0.0;
  return result;
}

}  // namespace vsl
