#include "vsl/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vsl {

std::string format_sensor_row(const SensorCsvRow& row) {
  char buf[160];
  char speed[32] = "";
  char occ[32] = "";
  if (row.speed) std::snprintf(speed, sizeof(speed), "%.4f", *row.speed);
  if (row.occupancy) std::snprintf(occ, sizeof(occ), "%.6f", *row.occupancy);
  std::snprintf(buf, sizeof(buf), "%s,%.1f,%s,%s", row.sensor_id.c_str(), row.timestamp, speed,
                occ);
  return buf;
}

SensorCsvRow from_measurement(const Measurement& m) {
  SensorCsvRow row;
  row.sensor_id = m.sensor_id;
  row.timestamp = m.timestamp;
  if (m.valid) {
    row.speed = m.speed;
    row.occupancy = m.occupancy;
  }
  return row;
}

Measurement to_measurement(const SensorCsvRow& row) {
  Measurement m;
  m.sensor_id = row.sensor_id;
  m.timestamp = row.timestamp;
  m.valid = row.speed.has_value() && row.occupancy.has_value();
  m.speed = row.speed.value_or(0.0);
  m.occupancy = row.occupancy.value_or(0.0);
  return m;
}

SensorCsvWriter::SensorCsvWriter(const std::filesystem::path& path) {
  file_ = std::fopen(path.string().c_str(), "w");
  if (file_ == nullptr) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::fprintf(file_, "%s\n", kSensorCsvHeader);
}

SensorCsvWriter::~SensorCsvWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void SensorCsvWriter::write(const SensorCsvRow& row) {
  std::fprintf(file_, "%s\n", format_sensor_row(row).c_str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_number(const std::string& s, int line_no, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("sensor CSV line " + std::to_string(line_no) + ": bad " + what +
                             " value '" + s + "'");
  }
}

}  // namespace

std::vector<SensorCsvRow> read_sensor_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<SensorCsvRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no += 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == kSensorCsvHeader) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw std::runtime_error("sensor CSV line " + std::to_string(line_no) + ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    }
    SensorCsvRow row;
    row.sensor_id = fields[0];
    if (row.sensor_id.empty()) {
      throw std::runtime_error("sensor CSV line " + std::to_string(line_no) + ": empty sensor_id");
    }
    row.timestamp = parse_number(fields[1], line_no, "timestamp");
    if (!fields[2].empty()) row.speed = parse_number(fields[2], line_no, "speed");
    if (!fields[3].empty()) row.occupancy = parse_number(fields[3], line_no, "occupancy");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace vsl
