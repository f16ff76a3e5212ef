#include "vsl/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vsl {

bool on_grid(int mph) {
  return mph >= kGridMin && mph <= kGridMax && mph % kGridStep == 0;
}

int grid_index(int mph) {
  if (!on_grid(mph)) {
    throw std::invalid_argument("speed limit " + std::to_string(mph) + " is not on the action grid");
  }
  return (mph - kGridMin) / kGridStep;
}

int snap_down_to_grid(int mph) {
  if (mph >= kGridMax) return kGridMax;
  if (mph <= kGridMin) return kGridMin;
  return mph - mph % kGridStep;
}

std::string to_string(Direction d) {
  return d == Direction::IncreasingMilepost ? "increasing" : "decreasing";
}

Direction direction_from_string(const std::string& s) {
  if (s == "increasing" || s == "increasing-milepost") return Direction::IncreasingMilepost;
  if (s == "decreasing" || s == "decreasing-milepost") return Direction::DecreasingMilepost;
  throw std::invalid_argument("unknown direction: " + s);
}

double downstream_offset(Direction d, double from_mp, double to_mp) {
  return d == Direction::DecreasingMilepost ? from_mp - to_mp : to_mp - from_mp;
}

std::vector<Gantry> order_downstream_to_upstream(std::vector<Gantry> gantries, Direction d) {
  for (const auto& g : gantries) {
    if (g.direction != d) {
      throw std::invalid_argument("gantry " + g.id + " direction differs from corridor direction");
    }
  }
  // Most downstream first: ascending milepost when traffic flows toward
  // decreasing mileposts, descending otherwise.
  std::sort(gantries.begin(), gantries.end(), [d](const Gantry& a, const Gantry& b) {
    return d == Direction::DecreasingMilepost ? a.milepost < b.milepost : a.milepost > b.milepost;
  });
  for (std::size_t i = 1; i < gantries.size(); ++i) {
    if (gantries[i].milepost == gantries[i - 1].milepost) {
      throw std::invalid_argument("duplicate gantry milepost at " +
                                  std::to_string(gantries[i].milepost));
    }
  }
  return gantries;
}

Observation build_observation(int downstream_action_mph, const Measurement& own,
                              const Measurement& upstream) {
  const auto norm_speed = [](double mph) {
    return std::clamp(std::min(mph, kSpeedClip) / kSpeedClip, 0.0, 1.0);
  };
  const auto norm_occ = [](double occ) { return std::clamp(occ, 0.0, 1.0); };
  Observation obs;
  obs.a_down = std::clamp(downstream_action_mph / kActionNorm, 0.0, 1.0);
  obs.speed_own = norm_speed(own.speed);
  obs.occ_own = norm_occ(own.occupancy);
  obs.speed_up = norm_speed(upstream.speed);
  obs.occ_up = norm_occ(upstream.occupancy);
  return obs;
}

Corridor::Corridor(std::vector<Gantry> gantries, std::vector<Sensor> sensors, Direction direction,
                   int default_max)
    : sensors_(std::move(sensors)), direction_(direction), default_max_(default_max) {
  gantries_ = order_downstream_to_upstream(std::move(gantries), direction);
  if (!on_grid(default_max_)) {
    throw std::invalid_argument("corridor default_max must be on the action grid");
  }
}

void Corridor::assign_critical_sensors(double radius_miles) {
  if (sensors_.empty()) {
    throw std::invalid_argument("corridor has no sensors");
  }
  critical_sensor_.assign(gantries_.size(), -1);
  for (std::size_t gi = 0; gi < gantries_.size(); ++gi) {
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (std::size_t si = 0; si < sensors_.size(); ++si) {
      const double off = downstream_offset(direction_, gantries_[gi].milepost, sensors_[si].milepost);
      if (off < 0.0 || off > radius_miles) continue;  // upstream or out of range
      if (off < best) {
        best = off;
        best_idx = static_cast<int>(si);
      }
    }
    if (best_idx < 0) {
      throw std::runtime_error("gantry " + gantries_[gi].id + " has no downstream sensor within " +
                               std::to_string(radius_miles) + " miles");
    }
    critical_sensor_[gi] = best_idx;
  }
}

int Corridor::critical_sensor(int gantry_index) const {
  if (!sensors_assigned()) {
    throw std::logic_error("assign_critical_sensors has not been run");
  }
  return critical_sensor_.at(static_cast<std::size_t>(gantry_index));
}

int Corridor::upstream_sensor(int gantry_index) const {
  const int n = size();
  const int up = gantry_index + 1 < n ? gantry_index + 1 : gantry_index;
  return critical_sensor(up);
}

std::vector<int> Corridor::custom_max_gantries() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (gantries_[static_cast<std::size_t>(i)].max_limit != kGridMax) out.push_back(i);
  }
  return out;
}

}  // namespace vsl
