#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "vsl/analytics.hpp"
#include "vsl/config.hpp"
#include "vsl/policy.hpp"
#include "vsl/scenario.hpp"
#include "vsl/tick_engine.hpp"

namespace vsl {

enum class ControlMode { NoControl, FixedLimit, Policy };

struct SimulateOptions {
  ControlMode mode = ControlMode::NoControl;
  int fixed_limit = 70;
  std::optional<std::filesystem::path> checkpoint;  // required for Policy mode
  GuardConfig guards;
  std::filesystem::path out_dir;
  bool write_outputs = true;
};

struct SimulateSummary {
  int ticks = 0;
  double vht = 0.0;          // vehicle-hours traveled
  double vmt = 0.0;          // vehicle-miles traveled
  double mean_speed = 0.0;   // vmt / vht
  double final_vehicles = 0.0;
  double cum_inflow = 0.0;
  double cum_outflow = 0.0;
  long decisions = 0;
  std::map<Stage, long> attribution_counts;
};

// Closed-loop run: every sensor interval, read out the sensors, write the
// CSV rows, run the guard pipeline (policy mode), apply the resulting limits
// to the simulator, and log decisions. No-control leaves the corridor
// uncontrolled; fixed mode posts one limit everywhere (capped per gantry).
SimulateSummary run_closed_loop(Scenario& scenario, const SimulateOptions& opt);

void write_summary_json(const SimulateSummary& summary, const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                    const std::string& cfg_hash, std::uint64_t seed,
                    const std::vector<std::string>& files);

// ---------------------------------------------------------------------------
// Domain-mismatch study

struct MismatchStudyOptions {
  int runs_per_block = 5;
  std::size_t samples = 300;
  double horizon_s = 1800.0;
  std::uint64_t seed = 1;
  double order = 2.0;
  // Perturbed-domain settings relative to the nominal testing scenario.
  double perturbed_demand_scale = 1.3;
  double perturbed_k_jam_scale = 0.8;
  double perturbed_noise_speed = 2.0;
  double perturbed_noise_occ = 0.02;
  GuardConfig guards;
};

struct MismatchResult {
  std::vector<std::string> labels;  // nominal first, then perturbed
  std::vector<std::vector<double>> matrix;
  double mean_within = 0.0;
  double mean_cross = 0.0;
};

// Runs nominal and perturbed-domain testing-scenario experiments under the
// given policy, samples observation points from each, and computes the
// pairwise Wasserstein matrix.
MismatchResult run_mismatch_study(const MismatchStudyOptions& opt, const PolicyFn& policy);

// Observation dataset from one closed-loop run of `scenario`.
ot::PointSet collect_observations(Scenario& scenario, const PolicyFn& policy,
                                  const GuardConfig& guards);

}  // namespace vsl
