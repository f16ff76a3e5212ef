#include "vsl/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "vsl/rng.hpp"

namespace vsl::analytics {

namespace {
const Stage kStages[] = {Stage::Policy, Stage::SM, Stage::MSLC, Stage::DB};
}

AttributionSummary attribution_summary(const std::vector<dss::DecisionLogRecord>& records,
                                       const AttributionFilters& filters) {
  if (records.empty()) throw std::invalid_argument("decision log is empty");

  std::map<long, std::map<Stage, long>> counts;  // day -> stage -> count
  long total = 0;
  for (const auto& r : records) {
    if (!filters.include_gantries.empty() && !filters.include_gantries.count(r.gantry_id)) continue;
    if (filters.exclude_gantries.count(r.gantry_id)) continue;
    if (filters.peak_hours) {
      const double sec_of_day = r.tick - std::floor(r.tick / 86400.0) * 86400.0;
      const int hour = static_cast<int>(sec_of_day / 3600.0);
      if (hour < filters.peak_hours->first || hour >= filters.peak_hours->second) continue;
    }
    const long day = static_cast<long>(std::floor(r.tick / 86400.0));
    counts[day][r.attribution] += 1;
    total += 1;
  }

  AttributionSummary summary;
  summary.total_decisions = total;
  if (total == 0) {
    summary.empty = true;
    return summary;
  }
  for (const auto& [day, by_stage] : counts) {
    long day_total = 0;
    for (const auto& [stage, c] : by_stage) day_total += c;
    std::map<Stage, double> pct;
    for (const Stage s : kStages) {
      const auto it = by_stage.find(s);
      pct[s] = day_total > 0 ? 100.0 * (it == by_stage.end() ? 0 : it->second) / day_total : 0.0;
    }
    summary.days.push_back(day);
    summary.daily_pct.push_back(pct);
  }
  const double n = static_cast<double>(summary.days.size());
  for (const Stage s : kStages) {
    double mean = 0.0;
    for (const auto& pct : summary.daily_pct) mean += pct.at(s);
    mean /= n;
    double var = 0.0;
    for (const auto& pct : summary.daily_pct) var += (pct.at(s) - mean) * (pct.at(s) - mean);
    summary.mean_pct[s] = mean;
    summary.std_pct[s] = std::sqrt(var / n);
  }
  return summary;
}

std::string attribution_table_csv(const AttributionSummary& summary) {
  std::string out = "stage,mean_pct,std_pct\n";
  char buf[96];
  for (const Stage s : kStages) {
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f\n", to_string(s).c_str(),
                  summary.empty ? 0.0 : summary.mean_pct.at(s),
                  summary.empty ? 0.0 : summary.std_pct.at(s));
    out += buf;
  }
  return out;
}

double SpeedField::lookup(double t, double milepost) const {
  const int tb = std::clamp(static_cast<int>(std::floor((t - t0) / bin_seconds)), 0,
                            time_bins() - 1);
  // nearest space bin
  std::size_t best = 0;
  double best_d = std::abs(mileposts[0] - milepost);
  for (std::size_t i = 1; i < mileposts.size(); ++i) {
    const double d = std::abs(mileposts[i] - milepost);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return speed[static_cast<std::size_t>(tb)][best];
}

SpeedField build_speed_field(const std::vector<SensorCsvRow>& rows,
                             const std::map<std::string, double>& sensor_milepost,
                             Direction direction, double bin_seconds) {
  if (rows.empty()) throw std::invalid_argument("no measurement rows");
  SpeedField field;
  field.bin_seconds = bin_seconds;
  field.direction = direction;

  std::set<double> mps;
  double t_min = rows.front().timestamp, t_max = rows.front().timestamp;
  for (const auto& r : rows) {
    const auto it = sensor_milepost.find(r.sensor_id);
    if (it == sensor_milepost.end()) continue;
    mps.insert(it->second);
    t_min = std::min(t_min, r.timestamp);
    t_max = std::max(t_max, r.timestamp);
  }
  if (mps.empty()) throw std::invalid_argument("no rows match the sensor map");
  field.mileposts.assign(mps.begin(), mps.end());
  field.t0 = std::floor(t_min / bin_seconds) * bin_seconds;
  const int nt = static_cast<int>(std::floor((t_max - field.t0) / bin_seconds)) + 1;
  const std::size_t ns = field.mileposts.size();

  std::vector<std::vector<double>> sum(static_cast<std::size_t>(nt), std::vector<double>(ns, 0.0));
  std::vector<std::vector<int>> cnt(static_cast<std::size_t>(nt), std::vector<int>(ns, 0));
  for (const auto& r : rows) {
    const auto it = sensor_milepost.find(r.sensor_id);
    if (it == sensor_milepost.end() || !r.speed) continue;
    const auto tb = static_cast<std::size_t>((r.timestamp - field.t0) / bin_seconds);
    const auto sb = static_cast<std::size_t>(
        std::lower_bound(field.mileposts.begin(), field.mileposts.end(), it->second) -
        field.mileposts.begin());
    sum[tb][sb] += *r.speed;
    cnt[tb][sb] += 1;
  }
  field.speed.assign(static_cast<std::size_t>(nt), std::vector<double>(ns, 70.0));
  for (std::size_t tb = 0; tb < static_cast<std::size_t>(nt); ++tb) {
    for (std::size_t sb = 0; sb < ns; ++sb) {
      if (cnt[tb][sb] > 0) {
        field.speed[tb][sb] = sum[tb][sb] / cnt[tb][sb];
      } else if (tb > 0) {
        field.speed[tb][sb] = field.speed[tb - 1][sb];
      }
    }
  }
  return field;
}

std::vector<TrajectorySample> virtual_vehicle(const SpeedField& field, double start_t,
                                              double start_milepost) {
  if (field.mileposts.empty()) throw std::invalid_argument("empty speed field");
  const double mp_lo = field.mileposts.front();
  const double mp_hi = field.mileposts.back();
  if (start_milepost < mp_lo - 1e-9 || start_milepost > mp_hi + 1e-9 || start_t < field.t0 ||
      start_t >= field.t_end()) {
    throw std::invalid_argument("virtual vehicle start outside the field bounds");
  }
  std::vector<TrajectorySample> out;
  double t = start_t;
  double mp = start_milepost;
  const double sign = field.direction == Direction::DecreasingMilepost ? -1.0 : 1.0;
  while (t < field.t_end() - 1e-9 && mp >= mp_lo - 1e-9 && mp <= mp_hi + 1e-9) {
    const double v = std::max(field.lookup(t, mp), kVirtualVehicleFloorMph);
    out.push_back({t, mp, v});
    mp += sign * v * field.bin_seconds / 3600.0;
    t += field.bin_seconds;
  }
  return out;
}

std::vector<EncounterSample> vsl_encounter_series(
    const std::vector<TrajectorySample>& trajectory,
    const std::vector<dss::DecisionLogRecord>& records,
    const std::map<std::string, double>& gantry_milepost, Direction direction) {
  // Posted limit per gantry per tick, ticks ascending.
  std::map<double, std::map<std::string, int>> by_tick;
  for (const auto& r : records) by_tick[r.tick][r.gantry_id] = r.final;

  std::vector<EncounterSample> out;
  out.reserve(trajectory.size());
  for (const auto& s : trajectory) {
    EncounterSample e;
    e.t = s.t;
    e.milepost = s.milepost;
    e.travel_speed = s.speed;
    // Nearest gantry at or ahead (downstream) of the vehicle.
    std::optional<std::string> gantry;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [id, mp] : gantry_milepost) {
      const double off = downstream_offset(direction, s.milepost, mp);
      if (off < -1e-9) continue;
      if (off < best) {
        best = off;
        gantry = id;
      }
    }
    if (gantry) {
      // Latest tick at or before t.
      auto it = by_tick.upper_bound(s.t);
      if (it != by_tick.begin()) {
        --it;
        const auto g = it->second.find(*gantry);
        if (g != it->second.end()) e.posted_limit = g->second;
      }
    }
    out.push_back(e);
  }
  return out;
}

void write_speed_grid_csv(const SpeedField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  out << "time";
  for (const double mp : field.mileposts) {
    std::snprintf(buf, sizeof(buf), ",%.3f", mp);
    out << buf;
  }
  out << "\n";
  for (int tb = 0; tb < field.time_bins(); ++tb) {
    std::snprintf(buf, sizeof(buf), "%.1f", field.t0 + tb * field.bin_seconds);
    out << buf;
    for (std::size_t sb = 0; sb < field.mileposts.size(); ++sb) {
      std::snprintf(buf, sizeof(buf), ",%.4f", field.speed[static_cast<std::size_t>(tb)][sb]);
      out << buf;
    }
    out << "\n";
  }
}

LimitGrid build_limit_grid(const std::vector<dss::DecisionLogRecord>& records) {
  if (records.empty()) throw std::invalid_argument("decision log is empty");
  LimitGrid grid;
  std::set<double> ticks;
  for (const auto& r : records) {
    ticks.insert(r.tick);
    if (std::find(grid.gantry_ids.begin(), grid.gantry_ids.end(), r.gantry_id) ==
        grid.gantry_ids.end()) {
      grid.gantry_ids.push_back(r.gantry_id);
    }
  }
  grid.ticks.assign(ticks.begin(), ticks.end());
  const std::size_t nt = grid.ticks.size();
  const std::size_t ng = grid.gantry_ids.size();
  grid.limit.assign(nt, std::vector<std::optional<int>>(ng));
  grid.policy_only.assign(nt, std::vector<std::optional<int>>(ng));
  for (const auto& r : records) {
    const auto tb = static_cast<std::size_t>(
        std::lower_bound(grid.ticks.begin(), grid.ticks.end(), r.tick) - grid.ticks.begin());
    const auto gb = static_cast<std::size_t>(
        std::find(grid.gantry_ids.begin(), grid.gantry_ids.end(), r.gantry_id) -
        grid.gantry_ids.begin());
    grid.limit[tb][gb] = r.final;
    if (r.attribution == Stage::Policy) grid.policy_only[tb][gb] = r.final;
  }
  return grid;
}

void write_limit_grid_csv(const LimitGrid& grid, const std::filesystem::path& path,
                          bool policy_only) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "tick";
  for (const auto& id : grid.gantry_ids) out << "," << id;
  out << "\n";
  char buf[64];
  const auto& cells = policy_only ? grid.policy_only : grid.limit;
  for (std::size_t tb = 0; tb < grid.ticks.size(); ++tb) {
    std::snprintf(buf, sizeof(buf), "%.1f", grid.ticks[tb]);
    out << buf;
    for (const auto& cell : cells[tb]) {
      out << ",";
      if (cell) out << *cell;
    }
    out << "\n";
  }
}

ot::PointSet observations_from_log(const std::vector<dss::DecisionLogRecord>& records) {
  ot::PointSet points;
  points.reserve(records.size());
  for (const auto& r : records) {
    points.push_back(std::vector<double>(r.obs.begin(), r.obs.end()));
  }
  return points;
}

ot::PointSet sample_points(const ot::PointSet& points, std::size_t count, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("no points to sample");
  Rng rng(seed);
  ot::PointSet out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(points[rng.next_below(points.size())]);
  }
  return out;
}

void write_matrix_csv(const std::vector<std::vector<double>>& matrix,
                      const std::vector<std::string>& labels,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "dataset";
  for (const auto& l : labels) out << "," << l;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << labels[i];
    for (const double v : matrix[i]) {
      std::snprintf(buf, sizeof(buf), ",%.6f", v);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace vsl::analytics
