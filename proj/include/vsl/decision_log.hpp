#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vsl/guards.hpp"

namespace vsl::dss {

// One decision-log line. Serialized as JSON-lines with a fixed field order:
// tick, gantry_id, obs, policy_action, after_sm, after_mslc, final,
// attribution, interpolated. Records carry no wall-clock fields, so equal
// inputs produce byte-identical logs.
struct DecisionLogRecord {
  double tick = 0.0;  // tick timestamp, seconds since epoch
  std::string gantry_id;
  std::array<double, 5> obs{};
  int policy_action = 70;
  int after_sm = 70;
  int after_mslc = 70;
  int final = 70;
  Stage attribution = Stage::Policy;
  bool interpolated = false;
};

DecisionLogRecord make_record(double tick, const StageDecision& d);
std::string to_json_line(const DecisionLogRecord& r);
DecisionLogRecord parse_record(const std::string& line);

// Append-only JSON-lines writer, rotated daily by the record's tick
// timestamp (UTC): <dir>/decisions-YYYYMMDD.jsonl.
class DecisionLogWriter {
 public:
  explicit DecisionLogWriter(std::filesystem::path dir);
  ~DecisionLogWriter();

  void append(const DecisionLogRecord& r);
  void flush();
  std::vector<std::filesystem::path> files() const { return files_; }

 private:
  void rotate_for(double tick);

  std::filesystem::path dir_;
  std::FILE* file_ = nullptr;
  long current_day_ = -1;
  std::vector<std::filesystem::path> files_;
};

// Reads one file or every decisions-*.jsonl file in a directory, in name
// order.
std::vector<DecisionLogRecord> read_decision_log(const std::filesystem::path& path);

}  // namespace vsl::dss
