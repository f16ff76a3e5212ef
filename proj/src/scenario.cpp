#include "vsl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsl {

namespace {

char pad2(int v, int pos) { return static_cast<char>('0' + (pos == 0 ? v / 10 : v % 10)); }

std::string numbered_id(const char* prefix, int n) {
  std::string s(prefix);
  s.push_back(pad2(n, 0));
  s.push_back(pad2(n, 1));
  return s;
}

void finalize_binding(Scenario& scen) {
  scen.corridor.assign_critical_sensors();
  const int n_g = scen.corridor.size();
  scen.gantry_cell.resize(static_cast<std::size_t>(n_g));
  for (int i = 0; i < n_g; ++i) {
    scen.gantry_cell[static_cast<std::size_t>(i)] =
        scen.sim->cell_of_milepost(scen.corridor.gantries()[static_cast<std::size_t>(i)].milepost);
  }
  scen.sensor_cell.resize(scen.corridor.sensors().size());
  for (std::size_t i = 0; i < scen.corridor.sensors().size(); ++i) {
    scen.sensor_cell[i] = scen.sim->cell_of_milepost(scen.corridor.sensors()[i].milepost);
  }
  // Control zones: gantry g governs the cells from its own position up to
  // the next upstream gantry; the most upstream gantry's zone extends to the
  // corridor start. Gantries sorted by cell index ascending are in
  // upstream-to-downstream order.
  std::vector<int> order(static_cast<std::size_t>(n_g));
  for (int i = 0; i < n_g; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scen.gantry_cell[static_cast<std::size_t>(a)] < scen.gantry_cell[static_cast<std::size_t>(b)]; });
  scen.gantry_zone.assign(static_cast<std::size_t>(n_g), {0, 0});
  int prev_cell = -1;
  for (const int gi : order) {
    const int c = scen.gantry_cell[static_cast<std::size_t>(gi)];
    scen.gantry_zone[static_cast<std::size_t>(gi)] = {prev_cell + 1, c};
    prev_cell = c;
  }
}

void apply_custom_max(Scenario& scen, const ScenarioOptions& opt) {
  if (opt.custom_max.empty()) return;
  std::vector<Gantry> gs = scen.corridor.gantries();
  for (const auto& [idx, mph] : opt.custom_max) {
    if (idx < 0 || idx >= static_cast<int>(gs.size())) {
      throw std::invalid_argument("custom_max gantry index out of range");
    }
    gs[static_cast<std::size_t>(idx)].max_limit = mph;
  }
  scen.corridor = Corridor(std::move(gs), scen.corridor.sensors(), scen.corridor.direction(),
                           scen.corridor.default_max());
}

}  // namespace

void Scenario::apply_speed_limits(const std::vector<int>& mph_per_gantry) {
  if (mph_per_gantry.size() != static_cast<std::size_t>(corridor.size())) {
    throw std::invalid_argument("one speed limit per gantry required");
  }
  std::vector<int> per_cell(static_cast<std::size_t>(sim->cell_count()), CtmSimulator::kNoLimit);
  for (std::size_t g = 0; g < mph_per_gantry.size(); ++g) {
    const auto [lo, hi] = gantry_zone[g];
    for (int c = lo; c <= hi; ++c) per_cell[static_cast<std::size_t>(c)] = mph_per_gantry[g];
  }
  sim->set_cell_limits(per_cell);
}

std::vector<Measurement> Scenario::readout_all(double timestamp) {
  std::vector<Measurement> out;
  out.reserve(corridor.sensors().size());
  for (std::size_t i = 0; i < corridor.sensors().size(); ++i) {
    out.push_back(sim->readout(corridor.sensors()[i].id, sensor_cell[i], timestamp));
  }
  sim->reset_window();
  return out;
}

Scenario build_training_scenario(const ScenarioOptions& opt) {
  Scenario scen;
  scen.length_mi = 7.0;
  scen.upstream_milepost = 7.0;

  SimConfig cfg;
  cfg.dt_s = 2.0;
  cfg.cell_length_mi = 0.1;
  cfg.lanes = 4;
  cfg.compliance = opt.compliance.value_or(0.05);
  cfg.sensor_interval_s = 60.0;
  cfg.horizon_s = opt.horizon_s.value_or(7200.0);
  cfg.seed = opt.seed;
  cfg.demand_jitter = opt.demand_jitter;
  cfg.demand_scale = opt.demand_scale;
  cfg.fd.k_jam *= opt.k_jam_scale;
  cfg.sensor_noise_speed = opt.sensor_noise_speed;
  cfg.sensor_noise_occ = opt.sensor_noise_occ;
  scen.cfg = cfg;

  // Merge sits 2 miles above the downstream boundary; the 8 gantries sit at
  // half-mile intervals upstream of it, each with a co-located sensor.
  const double merge_mp = 2.0;
  DemandProfile mainline{{0.0, 1850.0}, {3600.0, 925.0}};
  std::vector<RampConfig> ramps;
  ramps.push_back({merge_mp, 2, DemandProfile{{0.0, 1000.0}}});

  std::vector<Gantry> gantries;
  std::vector<Sensor> sensors;
  for (int i = 0; i < 8; ++i) {
    const double mp = merge_mp + 0.5 * (i + 1);
    gantries.push_back({numbered_id("g", i + 1), mp, Direction::DecreasingMilepost, 70});
    sensors.push_back({numbered_id("s", i + 1), mp, Direction::DecreasingMilepost});
  }
  scen.corridor = Corridor(std::move(gantries), std::move(sensors),
                           Direction::DecreasingMilepost, 70);
  apply_custom_max(scen, opt);

  scen.sim = std::make_unique<CtmSimulator>(scen.length_mi, cfg, std::move(mainline),
                                            std::move(ramps), Direction::DecreasingMilepost,
                                            scen.upstream_milepost);
  finalize_binding(scen);
  return scen;
}

Scenario build_testing_scenario(const ScenarioOptions& opt) {
  Scenario scen;
  scen.length_mi = 17.0;
  scen.upstream_milepost = 70.0;

  SimConfig cfg;
  cfg.dt_s = 2.0;
  cfg.cell_length_mi = 0.1;
  cfg.lanes = 4;
  cfg.compliance = opt.compliance.value_or(0.05);
  cfg.sensor_interval_s = 30.0;
  cfg.horizon_s = opt.horizon_s.value_or(7200.0);
  cfg.seed = opt.seed;
  cfg.demand_jitter = opt.demand_jitter;
  cfg.demand_scale = opt.demand_scale;
  cfg.fd.k_jam *= opt.k_jam_scale;
  cfg.sensor_noise_speed = opt.sensor_noise_speed;
  cfg.sensor_noise_occ = opt.sensor_noise_occ;
  scen.cfg = cfg;

  // Rush-hour shape with two on-ramp congestion sources.
  DemandProfile mainline{{0.0, 1500.0}, {1200.0, 1850.0}, {4800.0, 1000.0}};
  std::vector<RampConfig> ramps;
  ramps.push_back({55.2, 2, DemandProfile{{0.0, 900.0}, {4800.0, 400.0}}});
  ramps.push_back({61.4, 1, DemandProfile{{600.0, 1100.0}, {4800.0, 400.0}}});

  Rng layout_rng(sub_seed(opt.seed, "scenario.testing.layout"));
  std::vector<Gantry> gantries;
  std::vector<Sensor> sensors;
  for (int i = 0; i < 34; ++i) {
    const double gmp = 53.5 + 0.5 * i;  // most downstream gantry first
    const double offset = quantize(layout_rng.uniform(0.0, 0.2), 1e3);
    gantries.push_back({numbered_id("g", i + 1), gmp, Direction::DecreasingMilepost, 70});
    sensors.push_back({numbered_id("s", i + 1), gmp - offset, Direction::DecreasingMilepost});
  }
  if (opt.default_custom_max) {
    // Six consecutive reduced-max gantries at the downstream end.
    for (int i = 0; i < 6; ++i) gantries[static_cast<std::size_t>(i)].max_limit = 55;
  }
  scen.corridor = Corridor(std::move(gantries), std::move(sensors),
                           Direction::DecreasingMilepost, 70);
  apply_custom_max(scen, opt);

  scen.sim = std::make_unique<CtmSimulator>(scen.length_mi, cfg, std::move(mainline),
                                            std::move(ramps), Direction::DecreasingMilepost,
                                            scen.upstream_milepost);
  finalize_binding(scen);
  return scen;
}

}  // namespace vsl
