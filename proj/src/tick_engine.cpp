#include "vsl/tick_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

namespace vsl::dss {

namespace {
constexpr double kEps = 1e-6;
}

TickEngine::TickEngine(const Corridor* corridor, GuardConfig cfg, PolicyFn policy,
                       double tick_seconds, DecisionLogWriter* log, PublishFn publish)
    : corridor_(corridor),
      pipeline_(corridor, cfg, std::move(policy)),
      tick_seconds_(tick_seconds),
      log_(log),
      publish_(std::move(publish)) {
  if (tick_seconds_ <= 0.0) throw std::invalid_argument("tick period must be > 0");
  state_.resize(corridor_->sensors().size());
  by_milepost_.resize(state_.size());
  for (std::size_t i = 0; i < by_milepost_.size(); ++i) by_milepost_[i] = i;
  std::sort(by_milepost_.begin(), by_milepost_.end(), [&](std::size_t a, std::size_t b) {
    return corridor_->sensors()[a].milepost < corridor_->sensors()[b].milepost;
  });
}

bool TickEngine::ingest(const SensorUpdate& update) {
  int sensor_idx = -1;
  for (std::size_t i = 0; i < corridor_->sensors().size(); ++i) {
    if (corridor_->sensors()[i].id == update.sensor_id) {
      sensor_idx = static_cast<int>(i);
      break;
    }
  }
  if (sensor_idx < 0) {
    error_count_ += 1;
    return false;
  }
  if (!next_boundary_) {
    next_boundary_ = std::ceil(update.timestamp / tick_seconds_ - kEps) * tick_seconds_;
  }
  while (update.timestamp > *next_boundary_ + kEps) {
    tick_now(*next_boundary_);
  }
  auto& st = state_[static_cast<std::size_t>(sensor_idx)];
  if (update.speed && (!st.speed.has || update.timestamp >= st.speed.ts)) {
    st.speed = {true, *update.speed, update.timestamp};
  }
  if (update.occupancy && (!st.occ.has || update.timestamp >= st.occ.ts)) {
    st.occ = {true, *update.occupancy, update.timestamp};
  }
  pending_ = true;
  return true;
}

std::vector<Measurement> TickEngine::interpolate_missing(double tick_ts) const {
  const std::size_t n = state_.size();
  enum class Status { Fresh, Held, Missing };
  std::vector<Status> speed_status(n, Status::Missing), occ_status(n, Status::Missing);
  std::vector<double> speed(n, 0.0), occ(n, 0.0);

  const auto classify = [&](const FieldState& f, Status& status, double& value) {
    if (!f.has) return;
    const double age = (tick_ts - f.ts) / tick_seconds_;
    if (age < 1.0 - kEps) {
      status = Status::Fresh;
      value = f.value;
    } else if (age <= kStaleTicks + kEps) {
      status = Status::Held;
      value = f.value;
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    classify(state_[i].speed, speed_status[i], speed[i]);
    classify(state_[i].occ, occ_status[i], occ[i]);
  }

  // Spatial fallback: mean of the nearest resolved sensors on each side in
  // milepost order.
  const auto spatial = [&](std::size_t sensor, const std::vector<Status>& status,
                           const std::vector<double>& value, double fallback) {
    const auto pos = std::find(by_milepost_.begin(), by_milepost_.end(), sensor);
    const auto idx = static_cast<std::size_t>(pos - by_milepost_.begin());
    std::optional<double> lo, hi;
    for (std::size_t k = idx; k-- > 0;) {
      if (status[by_milepost_[k]] != Status::Missing) {
        lo = value[by_milepost_[k]];
        break;
      }
    }
    for (std::size_t k = idx + 1; k < by_milepost_.size(); ++k) {
      if (status[by_milepost_[k]] != Status::Missing) {
        hi = value[by_milepost_[k]];
        break;
      }
    }
    if (lo && hi) return (*lo + *hi) / 2.0;
    if (lo) return *lo;
    if (hi) return *hi;
    return fallback;
  };

  std::vector<Measurement> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Measurement m;
    m.sensor_id = corridor_->sensors()[i].id;
    m.timestamp = tick_ts;
    m.valid = true;
    m.speed = speed_status[i] == Status::Missing ? spatial(i, speed_status, speed, kDefaultSpeed)
                                                 : speed[i];
    m.occupancy = occ_status[i] == Status::Missing ? spatial(i, occ_status, occ, kDefaultOcc)
                                                   : occ[i];
    m.interpolated = speed_status[i] != Status::Fresh || occ_status[i] != Status::Fresh;
    out[i] = m;
  }
  return out;
}

std::vector<SpeedLimitCommand> TickEngine::tick_now(double tick_ts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto measurements = interpolate_missing(tick_ts);
  std::unordered_map<std::string, Measurement> by_sensor;
  by_sensor.reserve(measurements.size());
  for (const auto& m : measurements) by_sensor.emplace(m.sensor_id, m);

  const auto decisions = pipeline_.step(by_sensor);

  std::vector<SpeedLimitCommand> commands;
  commands.reserve(decisions.size());
  for (const auto& d : decisions) {
    commands.push_back({d.gantry_id, tick_ts, d.final, d.attribution});
    if (d.held) error_count_ += 1;  // gantry fell back to its held value
    if (log_ != nullptr) log_->append(make_record(tick_ts, d));
  }
  if (log_ != nullptr) log_->flush();
  if (publish_) publish_(commands);

  tick_count_ += 1;
  last_tick_ts_ = tick_ts;
  pending_ = false;
  if (!next_boundary_ || tick_ts >= *next_boundary_ - kEps) {
    next_boundary_ = (std::floor(tick_ts / tick_seconds_ + kEps) + 1.0) * tick_seconds_;
  }
  last_tick_ms_ = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return commands;
}

void TickEngine::flush() {
  if (pending_ && next_boundary_) {
    tick_now(*next_boundary_);
  }
}

}  // namespace vsl::dss
