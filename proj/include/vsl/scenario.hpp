#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vsl/corridor.hpp"
#include "vsl/ctm.hpp"

namespace vsl {

// A corridor bound to a running CTM instance: gantry control zones, sensor
// cells, and speed-limit application.
struct Scenario {
  Corridor corridor;
  std::unique_ptr<CtmSimulator> sim;
  SimConfig cfg;
  double length_mi = 0.0;
  double upstream_milepost = 0.0;

  std::vector<int> gantry_cell;                   // per gantry (downstream-to-upstream order)
  std::vector<int> sensor_cell;                   // per sensor (corridor order)
  std::vector<std::pair<int, int>> gantry_zone;   // [first, last] cell governed by each gantry

  // One limit per gantry, downstream-to-upstream order. Throws on size
  // mismatch. Each gantry governs the cells from its own position up to the
  // next upstream gantry.
  void apply_speed_limits(const std::vector<int>& mph_per_gantry);

  // Window readout for every sensor, stamped `timestamp`; resets the window.
  std::vector<Measurement> readout_all(double timestamp);
};

struct ScenarioOptions {
  std::uint64_t seed = 1;
  std::optional<double> compliance;      // default per scenario
  std::optional<double> horizon_s;
  double demand_jitter = 0.0;
  double demand_scale = 1.0;
  double k_jam_scale = 1.0;
  double sensor_noise_speed = 0.0;
  double sensor_noise_occ = 0.0;
  std::map<int, int> custom_max;         // gantry index (ds->us) -> max limit mph
  bool default_custom_max = true;        // keep the scenario's stock custom-max layout
};

// Training layout: 7-mile 4-lane mainline, a two-lane on-ramp merge, and 8
// gantries at half-mile intervals upstream of the merge with co-located
// sensors. Mainline demand 1850 veh/lane/hr for hour 1, 925 for hour 2; ramp
// demand 1000 veh/lane/hr; compliance 5%; 60 s sensor interval; 2 h horizon.
Scenario build_training_scenario(const ScenarioOptions& opt = {});

// Testing layout: 17-mile mainline (mileposts 53..70, traffic toward
// decreasing mileposts), 34 gantries at ~0.5-mile spacing, one sensor 0-0.2
// miles downstream of each gantry (offsets drawn deterministically from the
// seed), multiple on-ramp congestion sources, and six reduced-max gantries
// at the downstream end.
Scenario build_testing_scenario(const ScenarioOptions& opt = {});

}  // namespace vsl
