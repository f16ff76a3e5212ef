#include "vsl/replay.hpp"

namespace vsl::dss {

ReplayStats replay(const std::filesystem::path& csv_path, const Corridor& corridor,
                   const GuardConfig& guard_cfg, const PolicyFn& policy, double tick_seconds,
                   const std::filesystem::path& log_dir) {
  const auto rows = read_sensor_csv(csv_path);

  DecisionLogWriter log(log_dir);
  ReplayStats stats;
  TickEngine engine(&corridor, guard_cfg, policy, tick_seconds, &log,
                    [&stats](const std::vector<SpeedLimitCommand>& commands) {
                      stats.records += static_cast<int>(commands.size());
                    });
  for (const auto& row : rows) engine.ingest(row);
  engine.flush();

  stats.ticks = engine.tick_count();
  stats.log_files = log.files();
  for (const auto& f : stats.log_files) {
    for (const auto& r : read_decision_log(f)) {
      if (r.interpolated) stats.interpolated_records += 1;
    }
  }
  return stats;
}

}  // namespace vsl::dss
