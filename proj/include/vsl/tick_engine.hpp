#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "vsl/csv.hpp"
#include "vsl/decision_log.hpp"
#include "vsl/guards.hpp"

namespace vsl::dss {

using SensorUpdate = SensorCsvRow;  // wire message and CSV row share one shape

struct SpeedLimitCommand {
  std::string gantry_id;
  double timestamp = 0.0;
  int limit = 70;
  Stage attribution = Stage::Policy;
};

// The fixed-interval decision loop: ingests timestamped sensor updates,
// interpolates missing values, runs the guard pipeline once per tick, and
// publishes/logs the commands. Ticks fire either when the ingested data
// crosses a tick boundary (data clock) or via tick_now (closed-loop driver
// or wall clock). Each tick consumes an immutable snapshot: updates arriving
// afterwards only affect subsequent ticks.
class TickEngine {
 public:
  using PublishFn = std::function<void(const std::vector<SpeedLimitCommand>&)>;

  TickEngine(const Corridor* corridor, GuardConfig cfg, PolicyFn policy, double tick_seconds,
             DecisionLogWriter* log = nullptr, PublishFn publish = {});

  // Returns false (and counts an error) for unknown sensor ids. May fire
  // pending boundary ticks before storing the update.
  bool ingest(const SensorUpdate& update);

  // Runs one tick at `tick_ts` regardless of boundaries.
  std::vector<SpeedLimitCommand> tick_now(double tick_ts);

  // Fires the current partial window, if any data arrived since the last
  // tick.
  void flush();

  // Interpolated snapshot for `tick_ts`: per-sensor measurement in corridor
  // sensor order. Fill order: last valid reading if at most
  // `stale_ticks` old, else the mean of the nearest resolved
  // upstream/downstream sensors, else free-flow defaults.
  std::vector<Measurement> interpolate_missing(double tick_ts) const;

  int tick_count() const { return tick_count_; }
  double last_tick_ms() const { return last_tick_ms_; }
  int error_count() const { return error_count_; }
  std::optional<double> last_tick_ts() const { return last_tick_ts_; }
  double tick_seconds() const { return tick_seconds_; }

  static constexpr int kStaleTicks = 3;
  static constexpr double kDefaultSpeed = 70.0;
  static constexpr double kDefaultOcc = 0.0;

 private:
  struct FieldState {
    bool has = false;
    double value = 0.0;
    double ts = 0.0;
  };
  struct SensorState {
    FieldState speed;
    FieldState occ;
  };

  const Corridor* corridor_;
  GuardPipeline pipeline_;
  double tick_seconds_;
  DecisionLogWriter* log_;
  PublishFn publish_;

  std::vector<SensorState> state_;
  std::vector<std::size_t> by_milepost_;  // sensor indices sorted by milepost
  std::optional<double> next_boundary_;
  bool pending_ = false;

  int tick_count_ = 0;
  double last_tick_ms_ = 0.0;
  int error_count_ = 0;
  std::optional<double> last_tick_ts_;
};

}  // namespace vsl::dss
