#include "vsl/guards.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsl {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Policy: return "Policy";
    case Stage::SM: return "SM";
    case Stage::MSLC: return "MSLC";
    case Stage::DB: return "DB";
  }
  return "Policy";
}

Stage stage_from_string(const std::string& s) {
  if (s == "Policy") return Stage::Policy;
  if (s == "SM") return Stage::SM;
  if (s == "MSLC") return Stage::MSLC;
  if (s == "DB") return Stage::DB;
  throw std::invalid_argument("unknown stage: " + s);
}

std::vector<int> invalid_action_set(int downstream_action, int a_diff) {
  std::vector<int> out;
  for (const int a : kSpeedGrid) {
    if (a > downstream_action + a_diff) out.push_back(a);
  }
  return out;
}

std::array<bool, kNumActions> valid_action_mask(int downstream_action, int a_diff) {
  std::array<bool, kNumActions> mask{};
  for (int i = 0; i < kNumActions; ++i) {
    mask[static_cast<std::size_t>(i)] = kSpeedGrid[static_cast<std::size_t>(i)] <= downstream_action + a_diff;
  }
  return mask;
}

int round_up_to_ten(double speed, bool strict) {
  if (strict) {
    return (static_cast<int>(std::floor(speed / 10.0)) + 1) * 10;
  }
  return static_cast<int>(std::ceil(speed / 10.0)) * 10;
}

namespace {
int clip_to_grid_range(int v) { return std::clamp(v, kGridMin, kGridMax); }
}  // namespace

int speed_match(int intended, int downstream_intended, double speed_mph, double occupancy,
                const GuardConfig& cfg) {
  if (intended == kGridMin) {
    const int f = round_up_to_ten(speed_mph, cfg.strict_round_up);
    return clip_to_grid_range(std::min(downstream_intended + cfg.a_diff, f));
  }
  if (intended == kGridMax && occupancy >= cfg.o_thred) {
    return clip_to_grid_range(round_up_to_ten(speed_mph, cfg.strict_round_up));
  }
  return intended;
}

int max_speed_clip(int limit, int gantry_max) {
  return snap_down_to_grid(std::min(limit, gantry_max));
}

bool is_order1_bounce(const std::vector<int>& limits, int k) {
  const int n = static_cast<int>(limits.size());
  if (k <= 0 || k >= n - 1) return false;
  const auto at = [&](int i) { return limits[static_cast<std::size_t>(i)]; };
  if (!(at(k) > at(k - 1) && at(k) > at(k + 1))) return false;
  // The downstream boundary must close the bounce: if the value below it is
  // even lower, the hump extends past the boundary and the bounce has order
  // >= 2 (e.g. [30, 60, 50, 40] in the traffic direction).
  if (k - 1 > 0 && at(k - 2) < at(k - 1)) return false;
  return true;
}

std::vector<int> debounce(std::vector<int> limits) {
  const int n = static_cast<int>(limits.size());
  for (int k = 1; k + 1 < n; ++k) {
    if (is_order1_bounce(limits, k)) {
      limits[static_cast<std::size_t>(k)] =
          std::min(limits[static_cast<std::size_t>(k - 1)], limits[static_cast<std::size_t>(k + 1)]);
    }
  }
  return limits;
}

std::string to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::OffGrid: return "off-grid";
    case Violation::Kind::MaxLimit: return "max-limit";
    case Violation::Kind::Bounce: return "bounce";
    case Violation::Kind::StepDown: return "step-down";
  }
  return "off-grid";
}

std::vector<Violation> verify_constraints(const std::vector<int>& finals, const Corridor& corridor,
                                          const GuardConfig& cfg) {
  std::vector<Violation> out;
  const int n = static_cast<int>(finals.size());
  for (int i = 0; i < n; ++i) {
    const int v = finals[static_cast<std::size_t>(i)];
    if (!on_grid(v)) {
      out.push_back({Violation::Kind::OffGrid, i, std::to_string(v) + " not on grid"});
    }
    if (i < corridor.size() && v > corridor.gantries()[static_cast<std::size_t>(i)].max_limit) {
      out.push_back({Violation::Kind::MaxLimit, i,
                     std::to_string(v) + " exceeds cap " +
                         std::to_string(corridor.gantries()[static_cast<std::size_t>(i)].max_limit)});
    }
    if (i > 0 && v > finals[static_cast<std::size_t>(i - 1)] + cfg.a_diff) {
      out.push_back({Violation::Kind::StepDown, i,
                     std::to_string(v) + " > downstream " +
                         std::to_string(finals[static_cast<std::size_t>(i - 1)]) + " + " +
                         std::to_string(cfg.a_diff)});
    }
    if (is_order1_bounce(finals, i)) {
      out.push_back({Violation::Kind::Bounce, i, "order-1 bounce at index " + std::to_string(i)});
    }
  }
  return out;
}

GuardPipeline::GuardPipeline(const Corridor* corridor, GuardConfig cfg, PolicyFn policy)
    : corridor_(corridor), cfg_(cfg), policy_(std::move(policy)) {
  if (corridor_ == nullptr) throw std::invalid_argument("corridor is required");
  if (cfg_.a_diff <= 0 || cfg_.a_diff % 10 != 0) {
    throw std::invalid_argument("a_diff must be a positive multiple of 10");
  }
  if (cfg_.o_thred <= 0.0 || cfg_.o_thred >= 1.0) {
    throw std::invalid_argument("o_thred must lie in (0, 1)");
  }
  if (!corridor_->sensors_assigned()) {
    throw std::invalid_argument("corridor sensors must be assigned before building the pipeline");
  }
  held_.resize(static_cast<std::size_t>(corridor_->size()));
  miss_streak_.assign(static_cast<std::size_t>(corridor_->size()), 0);
  for (int i = 0; i < corridor_->size(); ++i) {
    held_[static_cast<std::size_t>(i)] =
        snap_down_to_grid(corridor_->gantries()[static_cast<std::size_t>(i)].max_limit);
  }
}

std::vector<StageDecision> GuardPipeline::step(
    const std::unordered_map<std::string, Measurement>& by_sensor) {
  const int n = corridor_->size();
  std::vector<StageDecision> decisions(static_cast<std::size_t>(n));
  std::vector<int> after_sm(static_cast<std::size_t>(n));

  // Step 2: evaluate the masked policy and speed-matching from the most
  // downstream gantry upward; the speed-matched output feeds the upstream
  // neighbor's state.
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    auto& dec = decisions[u];
    dec.gantry_id = corridor_->gantries()[u].id;
    const int downstream_intent = i == 0 ? corridor_->default_max() : after_sm[u - 1];

    const auto own_it = by_sensor.find(
        corridor_->sensors()[static_cast<std::size_t>(corridor_->critical_sensor(i))].id);
    if (own_it == by_sensor.end()) {
      // Fail-safe: hold the previous posted limit for up to max_hold_ticks,
      // then fall back to the gantry cap.
      miss_streak_[u] += 1;
      if (miss_streak_[u] > cfg_.max_hold_ticks) {
        held_[u] = snap_down_to_grid(corridor_->gantries()[u].max_limit);
      }
      dec.held = true;
      dec.policy_action = dec.after_sm = held_[u];
      after_sm[u] = held_[u];
      continue;
    }
    miss_streak_[u] = 0;

    const auto up_it = by_sensor.find(
        corridor_->sensors()[static_cast<std::size_t>(corridor_->upstream_sensor(i))].id);
    const Measurement& own = own_it->second;
    const Measurement& up = up_it == by_sensor.end() ? own_it->second : up_it->second;

    dec.observation = build_observation(downstream_intent, own, up);
    dec.interpolated = own.interpolated;

    const auto mask = valid_action_mask(downstream_intent, cfg_.a_diff);
    const int action = policy_(dec.observation, mask);
    if (!on_grid(action) || !mask[static_cast<std::size_t>(grid_index(action))]) {
      throw std::logic_error("policy returned an action outside the valid mask");
    }
    dec.policy_action = action;
    dec.after_sm = speed_match(action, downstream_intent, own.speed, own.occupancy, cfg_);
    after_sm[u] = dec.after_sm;
  }

  // Step 3: maximum speed limit correction, and Step 4: debounce.
  std::vector<int> after_mslc(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    after_mslc[u] = max_speed_clip(after_sm[u], corridor_->gantries()[u].max_limit);
    decisions[u].after_mslc = after_mslc[u];
  }
  const std::vector<int> finals = debounce(after_mslc);

  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    auto& dec = decisions[u];
    dec.final = finals[u];
    if (dec.final != dec.after_mslc) {
      dec.attribution = Stage::DB;
    } else if (dec.after_mslc != dec.after_sm) {
      dec.attribution = Stage::MSLC;
    } else if (dec.after_sm != dec.policy_action) {
      dec.attribution = Stage::SM;
    } else {
      dec.attribution = Stage::Policy;
    }
    held_[u] = dec.final;
  }
  return decisions;
}

}  // namespace vsl
