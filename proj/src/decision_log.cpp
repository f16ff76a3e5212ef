#include "vsl/decision_log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace vsl::dss {

DecisionLogRecord make_record(double tick, const StageDecision& d) {
  DecisionLogRecord r;
  r.tick = tick;
  r.gantry_id = d.gantry_id;
  r.obs = d.observation.as_array();
  r.policy_action = d.policy_action;
  r.after_sm = d.after_sm;
  r.after_mslc = d.after_mslc;
  r.final = d.final;
  r.attribution = d.attribution;
  r.interpolated = d.interpolated;
  return r;
}

std::string to_json_line(const DecisionLogRecord& r) {
  nlohmann::ordered_json j;
  j["tick"] = r.tick;
  j["gantry_id"] = r.gantry_id;
  j["obs"] = r.obs;
  j["policy_action"] = r.policy_action;
  j["after_sm"] = r.after_sm;
  j["after_mslc"] = r.after_mslc;
  j["final"] = r.final;
  j["attribution"] = to_string(r.attribution);
  j["interpolated"] = r.interpolated;
  return j.dump();
}

DecisionLogRecord parse_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  DecisionLogRecord r;
  r.tick = j.at("tick").get<double>();
  r.gantry_id = j.at("gantry_id").get<std::string>();
  const auto obs = j.at("obs").get<std::vector<double>>();
  if (obs.size() != 5) throw std::runtime_error("decision record obs must have 5 entries");
  std::copy(obs.begin(), obs.end(), r.obs.begin());
  r.policy_action = j.at("policy_action").get<int>();
  r.after_sm = j.at("after_sm").get<int>();
  r.after_mslc = j.at("after_mslc").get<int>();
  r.final = j.at("final").get<int>();
  r.attribution = stage_from_string(j.at("attribution").get<std::string>());
  r.interpolated = j.value("interpolated", false);
  return r;
}

DecisionLogWriter::DecisionLogWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

DecisionLogWriter::~DecisionLogWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void DecisionLogWriter::rotate_for(double tick) {
  const long day = static_cast<long>(std::floor(tick / 86400.0));
  if (day == current_day_ && file_ != nullptr) return;
  if (file_ != nullptr) std::fclose(file_);
  current_day_ = day;
  // Day index -> civil date (UTC), valid for nonnegative epochs.
  long z = day + 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long y = static_cast<long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  char name[48];
  std::snprintf(name, sizeof(name), "decisions-%04ld%02u%02u.jsonl", m <= 2 ? y + 1 : y, m, d);
  const auto path = dir_ / name;
  file_ = std::fopen(path.string().c_str(), "a");
  if (file_ == nullptr) throw std::runtime_error("cannot open decision log " + path.string());
  if (std::find(files_.begin(), files_.end(), path) == files_.end()) files_.push_back(path);
}

void DecisionLogWriter::append(const DecisionLogRecord& r) {
  rotate_for(r.tick);
  const std::string line = to_json_line(r);
  std::fprintf(file_, "%s\n", line.c_str());
}

void DecisionLogWriter::flush() {
  if (file_ != nullptr) std::fflush(file_);
}

std::vector<DecisionLogRecord> read_decision_log(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("decisions-", 0) == 0 && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<DecisionLogRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot open decision log " + f.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      records.push_back(parse_record(line));
    }
  }
  return records;
}

}  // namespace vsl::dss
