#pragma once

#include <filesystem>

#include "vsl/tick_engine.hpp"

namespace vsl::dss {

struct ReplayStats {
  int ticks = 0;
  int records = 0;
  int interpolated_records = 0;
  std::vector<std::filesystem::path> log_files;
};

// Open-loop replay of a recorded sensor CSV through the identical tick
// pipeline used by the live service; decisions do not affect the recording.
ReplayStats replay(const std::filesystem::path& csv_path, const Corridor& corridor,
                   const GuardConfig& guard_cfg, const PolicyFn& policy, double tick_seconds,
                   const std::filesystem::path& log_dir);

}  // namespace vsl::dss
