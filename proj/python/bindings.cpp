#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vsl/analytics.hpp"
#include "vsl/config.hpp"
#include "vsl/policy.hpp"
#include "vsl/replay.hpp"
#include "vsl/runner.hpp"
#include "vsl/training.hpp"
#include "vsl/transport.hpp"

namespace py = pybind11;
using namespace vsl;

namespace {

ScenarioOptions options_from_kwargs(std::uint64_t seed, std::optional<double> compliance,
                                    std::optional<double> horizon_s, double demand_scale,
                                    double demand_jitter) {
  ScenarioOptions opt;
  opt.seed = seed;
  opt.compliance = compliance;
  opt.horizon_s = horizon_s;
  opt.demand_scale = demand_scale;
  opt.demand_jitter = demand_jitter;
  return opt;
}

Scenario build_scenario(const std::string& builtin, const ScenarioOptions& opt) {
  if (builtin == "training") return build_training_scenario(opt);
  if (builtin == "testing") return build_testing_scenario(opt);
  throw std::invalid_argument("unknown builtin scenario: " + builtin);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MARL-based variable speed limit control toolkit";

  m.attr("SPEED_GRID") = std::vector<int>(kSpeedGrid.begin(), kSpeedGrid.end());

  // ---- guards -------------------------------------------------------------
  m.def("invalid_action_set", &invalid_action_set, py::arg("downstream_action"),
        py::arg("a_diff") = 10,
        "Grid actions strictly greater than downstream_action + a_diff.");
  m.def("round_up_to_ten", &round_up_to_ten, py::arg("speed"), py::arg("strict") = true);
  m.def(
      "speed_match",
      [](int intended, int downstream, double speed, double occupancy, int a_diff,
         double o_thred) {
        GuardConfig cfg;
        cfg.a_diff = a_diff;
        cfg.o_thred = o_thred;
        return speed_match(intended, downstream, speed, occupancy, cfg);
      },
      py::arg("intended"), py::arg("downstream_intended"), py::arg("speed"),
      py::arg("occupancy"), py::arg("a_diff") = 10, py::arg("o_thred") = 0.15);
  m.def("max_speed_clip", &max_speed_clip, py::arg("limit"), py::arg("gantry_max"));
  m.def("debounce", &debounce, py::arg("limits"),
        "Order-1 debounce pass over a downstream-to-upstream limit list.");

  // ---- observations -------------------------------------------------------
  m.def(
      "build_observation",
      [](int downstream_action, double speed_own, double occ_own, double speed_up,
         double occ_up) {
        Measurement own, up;
        own.speed = speed_own;
        own.occupancy = occ_own;
        up.speed = speed_up;
        up.occupancy = occ_up;
        const auto arr = build_observation(downstream_action, own, up).as_array();
        return std::vector<double>(arr.begin(), arr.end());
      },
      py::arg("downstream_action"), py::arg("speed_own"), py::arg("occ_own"),
      py::arg("speed_up"), py::arg("occ_up"));

  // ---- optimal transport --------------------------------------------------
  m.def("wasserstein_distance", &ot::wasserstein_distance, py::arg("a"), py::arg("b"),
        py::arg("order") = 2.0,
        "Exact p-Wasserstein distance between equal-weight samples.");
  m.def("mismatch_matrix", &ot::mismatch_matrix, py::arg("datasets"), py::arg("order") = 2.0);

  // ---- simulation ---------------------------------------------------------
  m.def(
      "simulate",
      [](const std::string& builtin, const std::string& out_dir, std::uint64_t seed,
         std::optional<double> horizon_s, std::optional<double> compliance,
         const std::optional<std::string>& checkpoint, const std::string& mode) {
        Scenario scen =
            build_scenario(builtin, options_from_kwargs(seed, compliance, horizon_s, 1.0, 0.0));
        SimulateOptions opt;
        opt.out_dir = out_dir;
        if (mode == "policy" || checkpoint) {
          if (!checkpoint) throw std::invalid_argument("policy mode requires a checkpoint");
          opt.mode = ControlMode::Policy;
          opt.checkpoint = *checkpoint;
        } else if (mode == "fixed") {
          opt.mode = ControlMode::FixedLimit;
        } else {
          opt.mode = ControlMode::NoControl;
        }
        const auto summary = run_closed_loop(scen, opt);
        py::dict out;
        out["ticks"] = summary.ticks;
        out["vehicle_hours"] = summary.vht;
        out["vehicle_miles"] = summary.vmt;
        out["mean_speed_mph"] = summary.mean_speed;
        out["decisions"] = summary.decisions;
        return out;
      },
      py::arg("builtin") = "training", py::arg("out_dir") = "out", py::arg("seed") = 1,
      py::arg("horizon_s") = std::nullopt, py::arg("compliance") = std::nullopt,
      py::arg("checkpoint") = std::nullopt, py::arg("mode") = "none",
      "Closed-loop scenario run; writes measurements.csv (and a decision log in policy mode).");

  m.def(
      "train",
      [](const std::string& out_dir, std::uint64_t seed, int iterations) {
        marl::Hyperparams hp;
        hp.seed = seed;
        hp.iterations = iterations;
        std::filesystem::create_directories(out_dir);
        const auto result = marl::train(marl::training_scenario_factory(hp), hp,
                                        marl::RewardWeights{}, std::filesystem::path(out_dir));
        py::list curve;
        for (const auto& s : result.curve) {
          py::dict row;
          row["iteration"] = s.iteration;
          row["mean_reward"] = s.mean_episode_reward;
          row["actor_loss"] = s.actor_loss;
          row["critic_loss"] = s.critic_loss;
          curve.append(row);
        }
        return curve;
      },
      py::arg("out_dir") = "out", py::arg("seed") = 1, py::arg("iterations") = 40,
      "MAPPO training on the builtin training scenario; writes checkpoint.json.");

  m.def(
      "replay",
      [](const std::string& csv_path, const std::string& builtin, std::uint64_t seed,
         const std::optional<std::string>& checkpoint, double tick_seconds,
         const std::string& log_dir) {
        Scenario scen = build_scenario(builtin, options_from_kwargs(seed, {}, {}, 1.0, 0.0));
        const PolicyFn policy =
            checkpoint ? marl::make_greedy_policy(marl::PolicyParams::load(*checkpoint))
                       : marl::make_greedy_policy(marl::make_biased_actor(70));
        const auto stats =
            dss::replay(csv_path, scen.corridor, GuardConfig{}, policy, tick_seconds, log_dir);
        py::dict out;
        out["ticks"] = stats.ticks;
        out["records"] = stats.records;
        out["interpolated_records"] = stats.interpolated_records;
        return out;
      },
      py::arg("csv_path"), py::arg("builtin") = "training", py::arg("seed") = 1,
      py::arg("checkpoint") = std::nullopt, py::arg("tick_seconds") = 30.0,
      py::arg("log_dir") = "replay_log",
      "Open-loop replay of a recorded sensor CSV through the tick pipeline.");

  m.def(
      "attribution_summary",
      [](const std::vector<std::string>& log_paths, std::optional<std::pair<int, int>> peak,
         const std::set<std::string>& exclude) {
        std::vector<dss::DecisionLogRecord> records;
        for (const auto& p : log_paths) {
          const auto part = dss::read_decision_log(p);
          records.insert(records.end(), part.begin(), part.end());
        }
        analytics::AttributionFilters filters;
        filters.peak_hours = peak;
        filters.exclude_gantries = exclude;
        const auto s = analytics::attribution_summary(records, filters);
        py::dict out;
        for (const Stage st : {Stage::Policy, Stage::SM, Stage::MSLC, Stage::DB}) {
          py::dict entry;
          entry["mean_pct"] = s.empty ? 0.0 : s.mean_pct.at(st);
          entry["std_pct"] = s.empty ? 0.0 : s.std_pct.at(st);
          out[to_string(st).c_str()] = entry;
        }
        out["total_decisions"] = s.total_decisions;
        out["days"] = s.days.size();
        return out;
      },
      py::arg("log_paths"), py::arg("peak_hours") = std::nullopt,
      py::arg("exclude_gantries") = std::set<std::string>{},
      "Per-stage control-time percentages (mean and std over days).");

  m.attr("__version__") = "0.1.0";
}
