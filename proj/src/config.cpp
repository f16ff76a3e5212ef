#include "vsl/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace vsl {

namespace {

using nlohmann::json;

DemandProfile parse_demand(const json& j) {
  DemandProfile profile;
  for (const auto& step : j) {
    profile.push_back({step.at(0).get<double>(), step.at(1).get<double>()});
  }
  return profile;
}

void parse_scenario_options(const json& j, ScenarioOptions& opt) {
  if (j.contains("seed")) opt.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("compliance")) opt.compliance = j["compliance"].get<double>();
  if (j.contains("horizon_seconds")) opt.horizon_s = j["horizon_seconds"].get<double>();
  if (j.contains("demand_jitter")) opt.demand_jitter = j["demand_jitter"].get<double>();
  if (j.contains("demand_scale")) opt.demand_scale = j["demand_scale"].get<double>();
  if (j.contains("k_jam_scale")) opt.k_jam_scale = j["k_jam_scale"].get<double>();
  if (j.contains("sensor_noise_speed")) opt.sensor_noise_speed = j["sensor_noise_speed"].get<double>();
  if (j.contains("sensor_noise_occ")) opt.sensor_noise_occ = j["sensor_noise_occ"].get<double>();
  if (j.contains("default_custom_max")) opt.default_custom_max = j["default_custom_max"].get<bool>();
  if (j.contains("custom_max")) {
    for (const auto& [key, value] : j["custom_max"].items()) {
      opt.custom_max[std::stoi(key)] = value.get<int>();
    }
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace

Corridor ConfigBundle::build_corridor() const {
  if (scenario_builtin == "training") {
    return build_training_scenario(scenario_options).corridor;
  }
  if (scenario_builtin == "testing") {
    return build_testing_scenario(scenario_options).corridor;
  }
  if (!corridor) throw std::invalid_argument("custom scenario requires corridor geometry");
  return *corridor;
}

Scenario ConfigBundle::build_scenario() const {
  if (scenario_builtin == "training") return build_training_scenario(scenario_options);
  if (scenario_builtin == "testing") return build_testing_scenario(scenario_options);
  if (!corridor) throw std::invalid_argument("custom scenario requires corridor geometry");
  Scenario scen;
  scen.corridor = *corridor;
  scen.cfg = sim;
  scen.length_mi = length_mi;
  scen.upstream_milepost = upstream_milepost;
  scen.sim = std::make_unique<CtmSimulator>(length_mi, sim, mainline_demand, ramps,
                                            corridor->direction(), upstream_milepost);
  scen.corridor.assign_critical_sensors();
  scen.gantry_cell.clear();
  for (const auto& g : scen.corridor.gantries()) {
    scen.gantry_cell.push_back(scen.sim->cell_of_milepost(g.milepost));
  }
  scen.sensor_cell.clear();
  for (const auto& s : scen.corridor.sensors()) {
    scen.sensor_cell.push_back(scen.sim->cell_of_milepost(s.milepost));
  }
  // zones: same rule as the builtin builders
  std::vector<int> order(scen.gantry_cell.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return scen.gantry_cell[static_cast<std::size_t>(a)] < scen.gantry_cell[static_cast<std::size_t>(b)];
  });
  scen.gantry_zone.assign(scen.gantry_cell.size(), {0, 0});
  int prev = -1;
  for (const int gi : order) {
    const int c = scen.gantry_cell[static_cast<std::size_t>(gi)];
    scen.gantry_zone[static_cast<std::size_t>(gi)] = {prev + 1, c};
    prev = c;
  }
  return scen;
}

ConfigBundle load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }

  ConfigBundle cfg;
  if (j.contains("scenario")) {
    const auto& s = j["scenario"];
    maybe(s, "builtin", cfg.scenario_builtin);
    parse_scenario_options(s, cfg.scenario_options);
    if (cfg.scenario_builtin == "custom") {
      maybe(s, "length_miles", cfg.length_mi);
      maybe(s, "upstream_milepost", cfg.upstream_milepost);
      if (s.contains("sim")) {
        const auto& sj = s["sim"];
        maybe(sj, "dt_seconds", cfg.sim.dt_s);
        maybe(sj, "cell_length_miles", cfg.sim.cell_length_mi);
        maybe(sj, "lanes", cfg.sim.lanes);
        maybe(sj, "v_free_mph", cfg.sim.fd.v_free);
        maybe(sj, "q_max_vphpl", cfg.sim.fd.q_max);
        maybe(sj, "k_jam_vpmpl", cfg.sim.fd.k_jam);
        maybe(sj, "compliance", cfg.sim.compliance);
        maybe(sj, "sensor_interval_seconds", cfg.sim.sensor_interval_s);
        maybe(sj, "horizon_seconds", cfg.sim.horizon_s);
        maybe(sj, "start_time_seconds", cfg.sim.start_time_s);
        maybe(sj, "seed", cfg.sim.seed);
      }
      if (s.contains("mainline_demand")) cfg.mainline_demand = parse_demand(s["mainline_demand"]);
      if (s.contains("ramps")) {
        for (const auto& rj : s["ramps"]) {
          RampConfig rc;
          rc.milepost = rj.at("milepost").get<double>();
          maybe(rj, "lanes", rc.lanes);
          rc.demand = parse_demand(rj.at("demand"));
          cfg.ramps.push_back(std::move(rc));
        }
      }
      if (s.contains("corridor")) {
        const auto& cj = s["corridor"];
        const auto dir = direction_from_string(cj.value("direction", "decreasing"));
        std::vector<Gantry> gantries;
        for (const auto& gj : cj.at("gantries")) {
          Gantry g;
          g.id = gj.at("id").get<std::string>();
          g.milepost = gj.at("milepost").get<double>();
          g.direction = dir;
          g.max_limit = gj.value("max_limit", 70);
          gantries.push_back(std::move(g));
        }
        std::vector<Sensor> sensors;
        for (const auto& sj : cj.at("sensors")) {
          Sensor sn;
          sn.id = sj.at("id").get<std::string>();
          sn.milepost = sj.at("milepost").get<double>();
          sn.direction = dir;
          sensors.push_back(std::move(sn));
        }
        cfg.corridor = Corridor(std::move(gantries), std::move(sensors), dir,
                                cj.value("default_max", 70));
      }
    }
  }
  if (j.contains("guards")) {
    const auto& g = j["guards"];
    maybe(g, "a_diff", cfg.guards.a_diff);
    maybe(g, "o_thred", cfg.guards.o_thred);
    maybe(g, "strict_round_up", cfg.guards.strict_round_up);
    maybe(g, "max_hold_ticks", cfg.guards.max_hold_ticks);
  }
  if (j.contains("service")) {
    const auto& s = j["service"];
    maybe(s, "host", cfg.service.host);
    maybe(s, "port", cfg.service.port);
    maybe(s, "tick_seconds", cfg.service.tick_seconds);
    maybe(s, "data_clock", cfg.service.data_clock);
    maybe(s, "log_dir", cfg.service.log_dir);
  }
  return cfg;
}

std::string config_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_example_config(const std::filesystem::path& path, const std::string& builtin) {
  nlohmann::ordered_json j;
  j["scenario"] = {{"builtin", builtin}, {"seed", 1}};
  j["guards"] = {{"a_diff", 10}, {"o_thred", 0.15}, {"strict_round_up", true}};
  j["service"] = {{"host", "127.0.0.1"}, {"port", 8471}, {"tick_seconds", 30.0}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace vsl
