#pragma once

#include <array>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vsl/corridor.hpp"

namespace vsl {

struct GuardConfig {
  int a_diff = 10;          // maximum permissible step-down between adjacent gantries, mph
  double o_thred = 0.15;    // occupancy threshold for speed-matching at 70 mph
  bool strict_round_up = true;  // f(50) = 60 when true, 50 when false
  int max_hold_ticks = 3;   // fail-safe: hold the last posted limit this many ticks
};

enum class Stage { Policy, SM, MSLC, DB };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct StageDecision {
  std::string gantry_id;
  Observation observation;
  int policy_action = 70;  // post-IAM policy output
  int after_sm = 70;
  int after_mslc = 70;
  int final = 70;
  Stage attribution = Stage::Policy;
  bool interpolated = false;  // the gantry's critical-sensor data was interpolated
  bool held = false;          // fail-safe path: no usable measurement
};

// Invalid action set of Eq.-style masking: grid actions strictly greater
// than downstream_action + a_diff.
std::vector<int> invalid_action_set(int downstream_action, int a_diff = 10);

// Valid-action mask over the grid (complement of the invalid set), indexed
// like kSpeedGrid.
std::array<bool, kNumActions> valid_action_mask(int downstream_action, int a_diff = 10);

// Smallest multiple of 10 greater than `speed` (strictly greater by
// default; configurable to non-strict at exact multiples).
int round_up_to_ten(double speed, bool strict = true);

// Speed-matching guard. Applies only when the policy picked an extreme
// action: 30 always, 70 only under occupancy at or above the threshold.
int speed_match(int intended, int downstream_intended, double speed_mph, double occupancy,
                const GuardConfig& cfg = {});

// Maximum-speed-limit correction: min(limit, gantry_max), snapped down to
// the grid when the cap is off-grid (65 -> 60, 55 -> 50).
int max_speed_clip(int limit, int gantry_max);

// Order-1 debounce pass over a downstream-to-upstream limit list. A single
// left-to-right scan replaces the middle of every order-1 bounce with the
// min of its two boundary values, using already-corrected values. A triple
// counts as an order-1 bounce only when its downstream boundary is not
// itself part of a longer descending run (otherwise the bounce has order
// >= 2 and is out of the mandate).
std::vector<int> debounce(std::vector<int> limits);

// True if position k of the list is the middle of an order-1 bounce.
bool is_order1_bounce(const std::vector<int>& limits, int k);

struct Violation {
  enum class Kind { OffGrid, MaxLimit, Bounce, StepDown };
  Kind kind;
  int gantry_index;
  std::string detail;
};

std::string to_string(Violation::Kind k);

// Report-only verification of final limits: grid membership, gantry caps,
// order-1 bounces, and step-down compliance.
std::vector<Violation> verify_constraints(const std::vector<int>& finals, const Corridor& corridor,
                                          const GuardConfig& cfg = {});

// Deployment-time policy hook: returns a grid action given the observation
// and the valid-action mask. The returned action must be inside the mask.
using PolicyFn = std::function<int(const Observation&, const std::array<bool, kNumActions>&)>;

// The deployed four-step control pipeline. Holds per-gantry fail-safe state
// (last posted limit, staleness counters); each step() is otherwise a pure
// function of the measurement snapshot, the policy parameters, and the
// configuration.
class GuardPipeline {
 public:
  GuardPipeline(const Corridor* corridor, GuardConfig cfg, PolicyFn policy);

  // `by_sensor` maps sensor id -> measurement (already interpolated).
  // Gantries whose critical sensor is absent fall back to the held value.
  std::vector<StageDecision> step(const std::unordered_map<std::string, Measurement>& by_sensor);

  const std::vector<int>& last_finals() const { return held_; }

 private:
  const Corridor* corridor_;
  GuardConfig cfg_;
  PolicyFn policy_;
  std::vector<int> held_;        // last posted limit per gantry
  std::vector<int> miss_streak_;
};

}  // namespace vsl
