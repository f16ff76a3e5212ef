#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vsl/csv.hpp"
#include "vsl/decision_log.hpp"
#include "vsl/transport.hpp"

namespace vsl::analytics {

// ---------------------------------------------------------------------------
// Attribution accounting

struct AttributionFilters {
  std::optional<std::pair<int, int>> peak_hours;  // [start, end) UTC hours
  std::set<std::string> exclude_gantries;
  std::set<std::string> include_gantries;  // empty = all
};

struct AttributionSummary {
  // Mean and sample-population std of the per-day percentage, by stage.
  std::map<Stage, double> mean_pct;
  std::map<Stage, double> std_pct;
  std::vector<long> days;                          // day index (tick / 86400)
  std::vector<std::map<Stage, double>> daily_pct;  // aligned with days
  long total_decisions = 0;
  bool empty = false;  // nothing matched the filters
};

AttributionSummary attribution_summary(const std::vector<dss::DecisionLogRecord>& records,
                                       const AttributionFilters& filters = {});

std::string attribution_table_csv(const AttributionSummary& summary);

// ---------------------------------------------------------------------------
// Speed fields and virtual vehicles

// Grid of mean speeds indexed by (time bin, space bin at sensor mileposts).
struct SpeedField {
  double t0 = 0.0;
  double bin_seconds = 30.0;
  std::vector<double> mileposts;            // ascending
  std::vector<std::vector<double>> speed;   // [time][space]
  Direction direction = Direction::DecreasingMilepost;

  int time_bins() const { return static_cast<int>(speed.size()); }
  double t_end() const { return t0 + time_bins() * bin_seconds; }
  double lookup(double t, double milepost) const;  // nearest space bin, current time bin
};

// Builds the field from measurement rows; empty (time, space) bins inherit
// the previous time bin's value and default to free flow at the start.
SpeedField build_speed_field(const std::vector<SensorCsvRow>& rows,
                             const std::map<std::string, double>& sensor_milepost,
                             Direction direction, double bin_seconds = 30.0);

struct TrajectorySample {
  double t = 0.0;
  double milepost = 0.0;
  double speed = 0.0;  // mph actually used for the step (after flooring)
};

inline constexpr double kVirtualVehicleFloorMph = 2.0;

// Integrates a virtual vehicle through the field with piecewise-constant
// speeds (nearest space bin, current time bin), step = one time bin, moving
// in the travel direction until it exits the field in space or time. Throws
// if the start lies outside the field.
std::vector<TrajectorySample> virtual_vehicle(const SpeedField& field, double start_t,
                                              double start_milepost);

struct EncounterSample {
  double t = 0.0;
  double milepost = 0.0;
  double travel_speed = 0.0;
  std::optional<int> posted_limit;  // nullopt once past the last gantry
};

// Pairs each trajectory sample with the posted limit of the nearest gantry
// at or ahead of the vehicle, from the decision log tick at or before t.
std::vector<EncounterSample> vsl_encounter_series(
    const std::vector<TrajectorySample>& trajectory,
    const std::vector<dss::DecisionLogRecord>& records,
    const std::map<std::string, double>& gantry_milepost, Direction direction);

// ---------------------------------------------------------------------------
// Time-space exports

// Writes CSV grids: speed field (rows = time bins, columns = mileposts) and,
// from a decision log, the posted-limit field plus a policy-only variant
// where guard-overridden cells are left empty.
void write_speed_grid_csv(const SpeedField& field, const std::filesystem::path& path);

struct LimitGrid {
  std::vector<double> ticks;
  std::vector<std::string> gantry_ids;              // log order
  std::vector<std::vector<std::optional<int>>> limit;        // [tick][gantry]
  std::vector<std::vector<std::optional<int>>> policy_only;  // overrides masked out
};

LimitGrid build_limit_grid(const std::vector<dss::DecisionLogRecord>& records);
void write_limit_grid_csv(const LimitGrid& grid, const std::filesystem::path& path,
                          bool policy_only);

// ---------------------------------------------------------------------------
// Observation datasets (for the domain-mismatch study)

ot::PointSet observations_from_log(const std::vector<dss::DecisionLogRecord>& records);
ot::PointSet sample_points(const ot::PointSet& points, std::size_t count, std::uint64_t seed);

void write_matrix_csv(const std::vector<std::vector<double>>& matrix,
                      const std::vector<std::string>& labels,
                      const std::filesystem::path& path);

}  // namespace vsl::analytics
