#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "vsl/csv.hpp"
#include "vsl/scenario.hpp"

using namespace vsl;

namespace {

CtmSimulator make_sim(double length_mi, SimConfig cfg, DemandProfile demand,
                      std::vector<RampConfig> ramps = {}) {
  return CtmSimulator(length_mi, cfg, std::move(demand), std::move(ramps),
                      Direction::DecreasingMilepost, length_mi);
}

}  // namespace

TEST_CASE("CFL violation is rejected at configuration time") {
  SimConfig cfg;
  cfg.dt_s = 10.0;  // 70 mph crosses a 0.1 mi cell in ~5.14 s
  CHECK_THROWS(make_sim(1.0, cfg, {{0.0, 500.0}}));
  cfg.dt_s = 2.0;
  CHECK_NOTHROW(make_sim(1.0, cfg, {{0.0, 500.0}}));
}

TEST_CASE("demand validation") {
  CHECK_THROWS(validate_demand(DemandProfile{{0.0, -5.0}}));
  CHECK_THROWS(validate_demand(DemandProfile{{0.0, 100.0}, {0.0, 200.0}}));
  CHECK_NOTHROW(validate_demand(DemandProfile{{0.0, 100.0}, {60.0, 200.0}}));
  CHECK(demand_at({{0.0, 100.0}, {3600.0, 50.0}}, 10.0) == 100.0);
  CHECK(demand_at({{0.0, 100.0}, {3600.0, 50.0}}, 3600.0) == 50.0);
  CHECK(demand_at({{600.0, 100.0}}, 0.0) == 0.0);
}

TEST_CASE("effective free-flow speed blends limit and compliance") {
  SimConfig cfg;
  cfg.compliance = 0.0;
  auto sim = make_sim(1.0, cfg, {{0.0, 0.0}});
  std::vector<int> limits(static_cast<std::size_t>(sim.cell_count()), 30);
  sim.set_cell_limits(limits);
  CHECK(sim.effective_free_flow(0) == doctest::Approx(70.0));  // nobody complies

  cfg.compliance = 1.0;
  auto sim_full = make_sim(1.0, cfg, {{0.0, 0.0}});
  sim_full.set_cell_limits(limits);
  CHECK(sim_full.effective_free_flow(0) == doctest::Approx(30.0));

  cfg.compliance = 0.05;
  auto sim_low = make_sim(1.0, cfg, {{0.0, 0.0}});
  sim_low.set_cell_limits(limits);
  CHECK(sim_low.effective_free_flow(0) == doctest::Approx(68.0));  // 0.05*30 + 0.95*70
}

TEST_CASE("empty road stays empty") {
  SimConfig cfg;
  auto sim = make_sim(2.0, cfg, {{0.0, 0.0}});
  sim.run_until(600.0);
  for (int c = 0; c < sim.cell_count(); ++c) CHECK(sim.density(c) == 0.0);
  CHECK(sim.total_vehicles() == 0.0);
}

TEST_CASE("closed system conserves vehicles to 1e-9 relative") {
  SimConfig cfg;
  auto sim = make_sim(2.0, cfg, {{0.0, 0.0}});
  sim.set_outflow_blocked(true);
  for (int c = 0; c < sim.cell_count(); ++c) sim.set_density(c, 40.0 + c);
  const double initial = sim.total_vehicles();
  sim.run_until(1800.0);
  CHECK(sim.total_vehicles() == doctest::Approx(initial).epsilon(1e-9));
  CHECK(sim.cum_outflow_veh() == 0.0);
}

TEST_CASE("critical-density profile with capacity demand is stationary") {
  SimConfig cfg;
  const double k_c = cfg.fd.critical_density();
  auto sim = make_sim(2.0, cfg, {{0.0, cfg.fd.q_max}});
  for (int c = 0; c < sim.cell_count(); ++c) sim.set_density(c, k_c);
  sim.run_until(900.0);
  for (int c = 0; c < sim.cell_count(); ++c) {
    CHECK(sim.density(c) == doctest::Approx(k_c).epsilon(1e-9));
  }
}

TEST_CASE("open-boundary conservation: inflow - outflow = accumulation") {
  ScenarioOptions opt;
  opt.seed = 3;
  Scenario scen = build_training_scenario(opt);
  scen.sim->run_until(7200.0);
  const double balance = scen.sim->cum_inflow_veh() - scen.sim->cum_outflow_veh();
  CHECK(scen.sim->total_vehicles() ==
        doctest::Approx(balance).epsilon(1e-6));
}

TEST_CASE("densities stay within [0, k_jam]") {
  ScenarioOptions opt;
  opt.horizon_s = 3600.0;
  Scenario scen = build_training_scenario(opt);
  for (int step = 0; step < 1800; ++step) {
    scen.sim->step();
    for (int c = 0; c < scen.sim->cell_count(); ++c) {
      CHECK(scen.sim->density(c) >= 0.0);
      CHECK(scen.sim->density(c) <= scen.cfg.fd.k_jam + 1e-12);
    }
  }
}

TEST_CASE("monotone congestion response to lower limits at full compliance") {
  ScenarioOptions opt;
  opt.compliance = 1.0;
  opt.horizon_s = 1800.0;

  auto run_with = [&](int limit) {
    Scenario scen = build_training_scenario(opt);
    std::vector<int> limits(static_cast<std::size_t>(scen.corridor.size()), limit);
    scen.apply_speed_limits(limits);
    scen.sim->run_until(1800.0);
    return scen.sim->vehicle_miles() / std::max(scen.sim->vehicle_hours(), 1e-9);
  };
  CHECK(run_with(30) <= run_with(70) + 1e-12);
}

TEST_CASE("identical seed and config give bit-identical measurement streams") {
  ScenarioOptions opt;
  opt.seed = 11;
  opt.sensor_noise_speed = 1.5;
  opt.sensor_noise_occ = 0.01;
  opt.demand_jitter = 0.05;
  opt.horizon_s = 900.0;

  auto run = [&]() {
    Scenario scen = build_testing_scenario(opt);
    std::vector<std::string> lines;
    for (int k = 1; k <= 30; ++k) {
      scen.sim->run_until(k * 30.0);
      for (const auto& m : scen.readout_all(k * 30.0)) {
        lines.push_back(format_sensor_row(from_measurement(m)));
      }
    }
    return lines;
  };
  CHECK(run() == run());
}

TEST_CASE("sensor readout conventions") {
  SimConfig cfg;
  auto sim = make_sim(1.0, cfg, {{0.0, 0.0}});

  SUBCASE("empty cell reads the effective free-flow speed and zero occupancy") {
    std::vector<int> limits(static_cast<std::size_t>(sim.cell_count()), 50);
    sim.set_cell_limits(limits);
    sim.run_until(60.0);
    const auto m = sim.readout("s", 3, 60.0);
    const double v_eff = sim.effective_free_flow(3);
    CHECK(m.speed == doctest::Approx(v_eff).epsilon(1e-4));
    CHECK(m.occupancy == doctest::Approx(0.0));
  }

  SUBCASE("jam density reads occupancy 1") {
    sim.set_outflow_blocked(true);
    for (int c = 0; c < sim.cell_count(); ++c) sim.set_density(c, cfg.fd.k_jam);
    sim.run_until(60.0);
    const auto m = sim.readout("s", 3, 60.0);
    CHECK(m.occupancy == doctest::Approx(1.0));
    CHECK(m.speed == doctest::Approx(0.0));
  }

  SUBCASE("half jam density reads occupancy 0.5") {
    sim.set_outflow_blocked(true);
    for (int c = 0; c < sim.cell_count(); ++c) sim.set_density(c, cfg.fd.k_jam / 2.0);
    // one step window; density persists (inflow blocked by jam spillback is
    // not at play here because outflow is blocked and no demand enters)
    sim.step();
    const auto m = sim.readout("s", 5, 2.0);
    CHECK(m.occupancy == doctest::Approx(0.5).epsilon(1e-3));
  }
}

TEST_CASE("training scenario layout matches the published setup") {
  Scenario scen = build_training_scenario({});
  CHECK(scen.corridor.size() == 8);
  CHECK(scen.cfg.lanes == 4);
  CHECK(scen.length_mi == doctest::Approx(7.0));
  CHECK(scen.cfg.compliance == doctest::Approx(0.05));
  CHECK(scen.cfg.sensor_interval_s == 60.0);
  CHECK(scen.cfg.horizon_s == 7200.0);
  // half-mile spacing
  for (int i = 1; i < 8; ++i) {
    const double d = scen.corridor.gantries()[static_cast<std::size_t>(i)].milepost -
                     scen.corridor.gantries()[static_cast<std::size_t>(i - 1)].milepost;
    CHECK(d == doctest::Approx(0.5));
  }
  // demand schedule: 1850 then 925 veh/lane/hr; ramp 1000 veh/lane/hr
  Scenario probe = build_training_scenario({});
  CHECK(demand_at({{0.0, 1850.0}, {3600.0, 925.0}}, 1800.0) == 1850.0);
  CHECK(demand_at({{0.0, 1850.0}, {3600.0, 925.0}}, 3601.0) == 925.0);
}

TEST_CASE("testing scenario layout") {
  ScenarioOptions opt;
  opt.seed = 5;
  Scenario scen = build_testing_scenario(opt);
  CHECK(scen.corridor.size() == 34);
  CHECK(scen.length_mi == doctest::Approx(17.0));
  for (int i = 0; i < 34; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double off = downstream_offset(scen.corridor.direction(),
                                         scen.corridor.gantries()[u].milepost,
                                         scen.corridor.sensors()[u].milepost);
    CHECK(off >= 0.0);
    CHECK(off <= 0.2);
  }
  // seeded layout is reproducible
  Scenario again = build_testing_scenario(opt);
  for (std::size_t i = 0; i < 34; ++i) {
    CHECK(scen.corridor.sensors()[i].milepost == again.corridor.sensors()[i].milepost);
  }
}

TEST_CASE("apply_speed_limits rejects a size mismatch") {
  Scenario scen = build_training_scenario({});
  CHECK_THROWS(scen.apply_speed_limits(std::vector<int>{70, 70}));
}
