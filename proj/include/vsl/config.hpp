#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "vsl/guards.hpp"
#include "vsl/scenario.hpp"
#include "vsl/service.hpp"

namespace vsl {

// One JSON file drives the toolkit. Sections: "scenario" (builtin name +
// overrides, or explicit geometry), "guards", "service". Every section is
// optional; missing values fall back to defaults. See the README for the
// schema.
struct ConfigBundle {
  std::string scenario_builtin = "training";  // "training" | "testing" | "custom"
  ScenarioOptions scenario_options;

  // Explicit geometry (used when scenario_builtin == "custom").
  std::optional<Corridor> corridor;
  double length_mi = 0.0;
  double upstream_milepost = 0.0;
  SimConfig sim;
  DemandProfile mainline_demand;
  std::vector<RampConfig> ramps;

  GuardConfig guards;
  dss::ServiceConfig service;

  Scenario build_scenario() const;
  Corridor build_corridor() const;  // corridor only (no simulator)
};

ConfigBundle load_config(const std::filesystem::path& path);
std::string config_hash(const std::filesystem::path& path);  // FNV-1a of the file bytes

// Writes the builtin scenario configs as documented examples.
void write_example_config(const std::filesystem::path& path, const std::string& builtin);

}  // namespace vsl
