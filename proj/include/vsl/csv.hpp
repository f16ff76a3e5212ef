#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsl/corridor.hpp"

namespace vsl {

// Sensor CSV schema: sensor_id,timestamp,speed,occupancy with empty fields
// marking missing values. Timestamps use one decimal, speed four,
// occupancy six; paired with the readout quantization this makes the file a
// lossless round-trip of the measurement stream.
struct SensorCsvRow {
  std::string sensor_id;
  double timestamp = 0.0;
  std::optional<double> speed;
  std::optional<double> occupancy;
};

inline constexpr const char* kSensorCsvHeader = "sensor_id,timestamp,speed,occupancy";

std::string format_sensor_row(const SensorCsvRow& row);
SensorCsvRow from_measurement(const Measurement& m);
Measurement to_measurement(const SensorCsvRow& row);  // missing fields -> valid=false

class SensorCsvWriter {
 public:
  explicit SensorCsvWriter(const std::filesystem::path& path);
  ~SensorCsvWriter();
  void write(const SensorCsvRow& row);
  void write(const Measurement& m) { write(from_measurement(m)); }

 private:
  std::FILE* file_ = nullptr;
};

// Parses the whole file; throws std::runtime_error naming the offending
// line number when the schema is violated.
std::vector<SensorCsvRow> read_sensor_csv(const std::filesystem::path& path);

}  // namespace vsl
