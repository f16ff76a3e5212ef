#pragma once

#include <array>
#include <string>
#include <vector>

namespace vsl {

// Posted speed limits live on the fixed 5-value display grid.
inline constexpr std::array<int, 5> kSpeedGrid{30, 40, 50, 60, 70};
inline constexpr int kNumActions = 5;
inline constexpr int kGridMin = 30;
inline constexpr int kGridMax = 70;
inline constexpr int kGridStep = 10;

// Normalization constants for agent observations. Actions are scaled by the
// grid maximum; speeds are clipped to 80 mph before scaling.
inline constexpr double kActionNorm = 70.0;
inline constexpr double kSpeedClip = 80.0;

bool on_grid(int mph);
int grid_index(int mph);          // throws std::invalid_argument if off grid
int snap_down_to_grid(int mph);   // largest grid value <= mph, never below 30

enum class Direction { IncreasingMilepost, DecreasingMilepost };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct Gantry {
  std::string id;
  double milepost = 0.0;  // miles
  Direction direction = Direction::DecreasingMilepost;
  int max_limit = 70;     // legal cap in mph (55/65/70 in the default config)
};

struct Sensor {
  std::string id;
  double milepost = 0.0;
  Direction direction = Direction::DecreasingMilepost;
};

struct Measurement {
  std::string sensor_id;
  double timestamp = 0.0;  // seconds since epoch
  double speed = 0.0;      // mph
  double occupancy = 0.0;  // [0, 1]
  bool valid = true;
  bool interpolated = false;
};

// Normalized 5-feature agent state; every entry lies in [0, 1].
struct Observation {
  double a_down = 1.0;     // downstream intended action / 70
  double speed_own = 1.0;  // min(speed, 80) / 80
  double occ_own = 0.0;
  double speed_up = 1.0;
  double occ_up = 0.0;

  std::array<double, 5> as_array() const {
    return {a_down, speed_own, occ_own, speed_up, occ_up};
  }
};

// Signed offset of `to_mp` relative to `from_mp`, measured along the travel
// direction. Positive values are downstream of `from_mp`.
double downstream_offset(Direction d, double from_mp, double to_mp);

// Sorts gantries so that index 0 is the most downstream one in the travel
// direction. Throws on duplicate mileposts or mixed directions.
std::vector<Gantry> order_downstream_to_upstream(std::vector<Gantry> gantries, Direction d);

Observation build_observation(int downstream_action_mph, const Measurement& own,
                              const Measurement& upstream);

class Corridor {
 public:
  Corridor() = default;
  Corridor(std::vector<Gantry> gantries, std::vector<Sensor> sensors, Direction direction,
           int default_max = 70);

  // Gantries are stored most-downstream first.
  const std::vector<Gantry>& gantries() const { return gantries_; }
  const std::vector<Sensor>& sensors() const { return sensors_; }
  Direction direction() const { return direction_; }
  int default_max() const { return default_max_; }
  int size() const { return static_cast<int>(gantries_.size()); }

  // Maps every gantry to the nearest sensor at or downstream of it, within
  // `radius_miles`. Throws a configuration error naming the gantry when no
  // sensor qualifies.
  void assign_critical_sensors(double radius_miles = 2.0);
  bool sensors_assigned() const { return !critical_sensor_.empty(); }

  int critical_sensor(int gantry_index) const;
  // Sensor feeding the upstream features of gantry i: the critical sensor of
  // gantry i+1, or the gantry's own sensor for the most upstream agent.
  int upstream_sensor(int gantry_index) const;

  // Set of gantry indices whose max_limit differs from the grid maximum.
  std::vector<int> custom_max_gantries() const;

 private:
  std::vector<Gantry> gantries_;
  std::vector<Sensor> sensors_;
  Direction direction_ = Direction::DecreasingMilepost;
  int default_max_ = 70;
  std::vector<int> critical_sensor_;
};

}  // namespace vsl
