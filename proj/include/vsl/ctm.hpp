#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vsl/corridor.hpp"
#include "vsl/rng.hpp"

namespace vsl {

// Triangular fundamental diagram. The congestion wave speed is derived from
// the triangle: w = q_max / (k_jam - q_max / v_free).
struct FundamentalDiagram {
  double v_free = 70.0;   // mph
  double q_max = 2000.0;  // veh/hr/lane
  double k_jam = 200.0;   // veh/mi/lane

  double critical_density() const { return q_max / v_free; }
  double wave_speed() const { return q_max / (k_jam - critical_density()); }
};

struct DemandStep {
  double start_s = 0.0;
  double flow_vphpl = 0.0;  // veh/hr/lane
};

// Piecewise-constant inflow schedule; start times strictly increasing.
using DemandProfile = std::vector<DemandStep>;

void validate_demand(const DemandProfile& profile);
double demand_at(const DemandProfile& profile, double t_s);

struct RampConfig {
  double milepost = 0.0;
  int lanes = 2;
  DemandProfile demand;
};

struct SimConfig {
  double dt_s = 2.0;
  double cell_length_mi = 0.1;
  int lanes = 4;
  FundamentalDiagram fd;
  double compliance = 0.05;        // fraction of traffic obeying posted limits
  double sensor_interval_s = 60.0;
  double horizon_s = 7200.0;
  double start_time_s = 0.0;
  std::uint64_t seed = 1;
  double demand_jitter = 0.0;       // relative stddev applied per 15-min block
  double demand_scale = 1.0;        // global multiplier on all demand
  double sensor_noise_speed = 0.0;  // mph stddev added at readout
  double sensor_noise_occ = 0.0;    // occupancy stddev added at readout
};

// First-order cell transmission model of a freeway mainline with on-ramp
// merges. Cell 0 is the upstream (inflow) end; vehicles flow toward higher
// cell indices and exit freely at the last cell.
class CtmSimulator {
 public:
  CtmSimulator(double length_mi, SimConfig cfg, DemandProfile mainline_demand,
               std::vector<RampConfig> ramps, Direction direction, double upstream_milepost);

  int cell_count() const { return static_cast<int>(density_.size()); }
  double time() const { return time_s_; }
  const SimConfig& config() const { return cfg_; }

  int cell_of_milepost(double mp) const;
  double milepost_of_cell(int cell) const;

  // Per-cell posted limit in mph; values >= v_free (or kNoLimit) leave the
  // cell uncontrolled. The effective free-flow speed blends the limit with
  // the compliance rate.
  static constexpr int kNoLimit = 1000;
  void set_cell_limits(const std::vector<int>& limit_mph_per_cell);
  void clear_limits();
  double effective_free_flow(int cell) const { return v_eff_[static_cast<std::size_t>(cell)]; }

  void step();
  void run_until(double t_s);

  // Instantaneous state.
  double density(int cell) const { return density_[static_cast<std::size_t>(cell)]; }
  void set_density(int cell, double k);
  double cell_speed(int cell) const { return speed_[static_cast<std::size_t>(cell)]; }
  double mean_speed_between(double mp_a, double mp_b) const;

  // Conservation accounting (vehicles inside the modeled cells; queued
  // vehicles at the boundaries are counted on entry).
  double total_vehicles() const;
  double cum_inflow_veh() const { return cum_inflow_; }
  double cum_outflow_veh() const { return cum_outflow_; }
  double vehicle_hours() const { return vht_; }
  double vehicle_miles() const { return vmt_; }

  // Blocks the downstream boundary (receiving flow 0); used to model closed
  // systems in tests.
  void set_outflow_blocked(bool blocked) { outflow_blocked_ = blocked; }

  // Aggregated window statistics since the last reset, for sensor readout.
  struct WindowStats {
    double mean_speed = 0.0;  // flow-weighted mph
    double mean_occupancy = 0.0;
    int steps = 0;
  };
  WindowStats window_stats(int cell) const;
  void reset_window();

  // Measurement readout for a sensor located in `cell`, stamped `timestamp`.
  // Values are quantized (speed 1e-4 mph, occupancy 1e-6) so that CSV
  // round-trips are lossless; optional sensor noise is applied before
  // quantization.
  Measurement readout(const std::string& sensor_id, int cell, double timestamp);

  Rng& rng() { return rng_; }

 private:
  void ramp_arrivals_and_sending(double t, std::vector<double>& ramp_sending);

  SimConfig cfg_;
  Direction direction_;
  double upstream_milepost_;   // milepost of the upstream edge of cell 0
  double dt_h_;                // step length in hours
  double time_s_ = 0.0;

  std::vector<double> density_;  // veh/mi/lane
  std::vector<double> speed_;    // realized mph, updated each step
  std::vector<double> v_eff_;    // mph cap from posted limits + compliance
  std::vector<int> limit_mph_;

  DemandProfile mainline_demand_;
  double mainline_queue_ = 0.0;  // vehicles waiting to enter cell 0
  struct Ramp {
    RampConfig cfg;
    int cell = 0;
    double queue = 0.0;
  };
  std::vector<Ramp> ramps_;

  double cum_inflow_ = 0.0;
  double cum_outflow_ = 0.0;
  double vht_ = 0.0;
  double vmt_ = 0.0;
  bool outflow_blocked_ = false;

  // window accumulators per cell
  std::vector<double> win_flow_;
  std::vector<double> win_flow_speed_;
  std::vector<double> win_speed_;
  std::vector<double> win_density_;
  int win_steps_ = 0;

  Rng rng_;
  Rng demand_rng_;
};

// Snaps value onto a 1/divisor grid. The divisor (not the step) is the
// parameter so powers of ten stay exactly representable and decimal CSV
// round-trips are lossless.
double quantize(double value, double divisor);

}  // namespace vsl
