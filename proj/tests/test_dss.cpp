#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>

#include "json.hpp"
#include "vsl/config.hpp"
#include "vsl/policy.hpp"
#include "vsl/replay.hpp"
#include "vsl/runner.hpp"
#include "vsl/service.hpp"

using namespace vsl;
using namespace vsl::dss;

namespace {

Corridor three_gantries() {
  std::vector<Gantry> g{{"g1", 1.0, Direction::DecreasingMilepost, 70},
                        {"g2", 1.5, Direction::DecreasingMilepost, 70},
                        {"g3", 2.0, Direction::DecreasingMilepost, 70}};
  std::vector<Sensor> s{{"s1", 1.0, Direction::DecreasingMilepost},
                        {"s2", 1.5, Direction::DecreasingMilepost},
                        {"s3", 2.0, Direction::DecreasingMilepost}};
  Corridor c(std::move(g), std::move(s), Direction::DecreasingMilepost, 70);
  c.assign_critical_sensors();
  return c;
}

SensorUpdate update(const std::string& id, double ts, std::optional<double> speed,
                    std::optional<double> occ) {
  SensorUpdate u;
  u.sensor_id = id;
  u.timestamp = ts;
  u.speed = speed;
  u.occupancy = occ;
  return u;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PolicyFn stub70() { return marl::make_greedy_policy(marl::make_biased_actor(70)); }

}  // namespace

TEST_CASE("interpolation: hold-last within the staleness budget") {
  const Corridor c = three_gantries();
  TickEngine engine(&c, {}, stub70(), 30.0);
  for (const auto* id : {"s1", "s2", "s3"}) engine.ingest(update(id, 30.0, 42.0, 0.1));
  // s2 misses the next tick
  engine.ingest(update("s1", 60.0, 50.0, 0.1));
  engine.ingest(update("s3", 60.0, 55.0, 0.1));
  const auto ms = engine.interpolate_missing(60.0);
  CHECK(ms[1].speed == doctest::Approx(42.0));
  CHECK(ms[1].interpolated);
  CHECK(!ms[0].interpolated);
  CHECK(ms[0].speed == doctest::Approx(50.0));
}

TEST_CASE("interpolation: spatial fallback after the staleness budget") {
  const Corridor c = three_gantries();
  TickEngine engine(&c, {}, stub70(), 30.0);
  // s2 reports only at t=30; s1/s3 keep reporting. At t=180 the s2 reading
  // is 5 ticks old: neighbors (60 and 40) average to 50.
  engine.ingest(update("s2", 30.0, 99.0, 0.5));
  for (int k = 1; k <= 6; ++k) {
    engine.ingest(update("s1", 30.0 * k, 60.0, 0.2));
    engine.ingest(update("s3", 30.0 * k, 40.0, 0.3));
  }
  const auto ms = engine.interpolate_missing(180.0);
  CHECK(ms[1].speed == doctest::Approx(50.0));
  CHECK(ms[1].occupancy == doctest::Approx(0.25));
  CHECK(ms[1].interpolated);
}

TEST_CASE("interpolation: free-flow defaults when everything is silent") {
  const Corridor c = three_gantries();
  TickEngine engine(&c, {}, stub70(), 30.0);
  const auto ms = engine.interpolate_missing(600.0);
  for (const auto& m : ms) {
    CHECK(m.speed == doctest::Approx(70.0));
    CHECK(m.occupancy == doctest::Approx(0.0));
    CHECK(m.interpolated);
    CHECK(m.valid);
  }
}

TEST_CASE("interpolation: per-field nulls") {
  const Corridor c = three_gantries();
  TickEngine engine(&c, {}, stub70(), 30.0);
  engine.ingest(update("s1", 30.0, 33.0, std::nullopt));
  engine.ingest(update("s2", 30.0, 44.0, 0.25));
  engine.ingest(update("s3", 30.0, std::nullopt, 0.35));
  const auto ms = engine.interpolate_missing(30.0);
  CHECK(ms[0].speed == doctest::Approx(33.0));
  CHECK(ms[0].occupancy == doctest::Approx(0.25));  // nearest resolved neighbor (s2)
  CHECK(ms[0].interpolated);
  CHECK(ms[2].speed == doctest::Approx(44.0));  // nearest resolved neighbor (s2)
  CHECK(!ms[1].interpolated);
}

TEST_CASE("tick engine: unknown sensors are counted as errors") {
  const Corridor c = three_gantries();
  TickEngine engine(&c, {}, stub70(), 30.0);
  CHECK(!engine.ingest(update("nope", 30.0, 50.0, 0.1)));
  CHECK(engine.error_count() == 1);
}

TEST_CASE("tick engine: log completeness and monotone timestamps") {
  const Corridor c = three_gantries();
  const auto dir = temp_dir("vsltk_engine_log");
  {
    DecisionLogWriter log(dir);
    TickEngine engine(&c, {}, stub70(), 30.0, &log);
    for (int k = 1; k <= 5; ++k) {
      for (const auto* id : {"s1", "s2", "s3"}) {
        engine.ingest(update(id, 30.0 * k, 60.0, 0.1));
      }
    }
    engine.flush();
    CHECK(engine.tick_count() == 5);
  }
  const auto records = read_decision_log(dir);
  CHECK(records.size() == 15);  // one record per gantry per tick
  std::set<std::pair<double, std::string>> keys;
  double prev_tick = 0.0;
  for (const auto& r : records) {
    CHECK(keys.insert({r.tick, r.gantry_id}).second);  // no duplicates
    CHECK(r.tick >= prev_tick);
    prev_tick = r.tick;
  }
}

TEST_CASE("decision record JSON round trip") {
  DecisionLogRecord r;
  r.tick = 1234.0;
  r.gantry_id = "g7";
  r.obs = {0.1, 0.2, 0.3, 0.4, 0.5};
  r.policy_action = 70;
  r.after_sm = 60;
  r.after_mslc = 50;
  r.final = 50;
  r.attribution = Stage::MSLC;
  r.interpolated = true;
  const auto line = to_json_line(r);
  const auto back = parse_record(line);
  CHECK(back.tick == r.tick);
  CHECK(back.gantry_id == r.gantry_id);
  CHECK(back.obs == r.obs);
  CHECK(back.after_mslc == 50);
  CHECK(back.attribution == Stage::MSLC);
  CHECK(back.interpolated);
  // field order is stable
  CHECK(line.rfind("{\"tick\":", 0) == 0);
}

TEST_CASE("replay: empty recording gives an empty log") {
  const auto dir = temp_dir("vsltk_replay_empty");
  const auto csv = dir / "empty.csv";
  std::ofstream(csv) << kSensorCsvHeader << "\n";
  const auto stats = replay(csv, three_gantries(), {}, stub70(), 30.0, dir / "log");
  CHECK(stats.ticks == 0);
  CHECK(stats.records == 0);
  CHECK(read_decision_log(dir / "log").empty());
}

TEST_CASE("replay: schema violations abort with the line number") {
  const auto dir = temp_dir("vsltk_replay_bad");
  const auto csv = dir / "bad.csv";
  std::ofstream(csv) << kSensorCsvHeader << "\ns1,30.0,60.0,0.1\ns1,not_a_number,60.0,0.1\n";
  CHECK_THROWS_WITH_AS(replay(csv, three_gantries(), {}, stub70(), 30.0, dir / "log"),
                       doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("replay: gaps in the recording surface as interpolation flags") {
  const auto dir = temp_dir("vsltk_replay_gaps");
  const auto csv = dir / "gaps.csv";
  {
    std::ofstream out(csv);
    out << kSensorCsvHeader << "\n";
    for (int k = 1; k <= 3; ++k) {
      out << "s1," << 30.0 * k << ",60.0,0.1\n";
      if (k != 2) out << "s2," << 30.0 * k << ",55.0,0.2\n";  // s2 misses tick 2
      out << "s3," << 30.0 * k << ",50.0,0.3\n";
    }
  }
  const auto stats = replay(csv, three_gantries(), {}, stub70(), 30.0, dir / "log");
  CHECK(stats.interpolated_records > 0);
}

TEST_CASE("service: health, subscriptions, malformed input, broadcast") {
  ServiceConfig cfg;
  cfg.port = 0;  // ephemeral
  cfg.tick_seconds = 30.0;
  cfg.data_clock = true;
  cfg.log_dir = temp_dir("vsltk_service_log").string();

  DssService service(three_gantries(), {}, stub70(), cfg);
  service.start();
  REQUIRE(service.port() > 0);

  NdjsonClient sub1("127.0.0.1", service.port());
  NdjsonClient sub2("127.0.0.1", service.port());
  sub1.send_line(R"({"type":"subscribe"})");
  sub2.send_line(R"({"type":"subscribe"})");
  CHECK(sub1.read_line().value_or("").find("subscribe_ack") != std::string::npos);
  CHECK(sub2.read_line().value_or("").find("subscribe_ack") != std::string::npos);

  NdjsonClient feeder("127.0.0.1", service.port());
  // malformed line: error reply, connection stays usable
  feeder.send_line("{not json");
  const auto err = feeder.read_line();
  REQUIRE(err.has_value());
  CHECK(err->find("\"error\"") != std::string::npos);

  for (int k = 1; k <= 2; ++k) {
    for (const auto* id : {"s1", "s2", "s3"}) {
      nlohmann::ordered_json j;
      j["type"] = "sensor_update";
      j["sensor_id"] = id;
      j["timestamp"] = 30.0 * k;
      j["speed"] = 62.0;
      j["occupancy"] = 0.08;
      feeder.send_line(j.dump());
    }
  }
  feeder.send_line(R"({"type":"flush"})");
  bool flushed = false;
  for (int i = 0; i < 10 && !flushed; ++i) {
    const auto line = feeder.read_line();
    REQUIRE(line.has_value());
    flushed = line->find("flush_ack") != std::string::npos;
  }
  CHECK(flushed);

  feeder.send_line(R"({"type":"health_query"})");
  const auto health = feeder.read_line();
  REQUIRE(health.has_value());
  const auto hj = nlohmann::json::parse(*health);
  CHECK(hj.at("type") == "health_reply");
  CHECK(hj.at("tick_count").get<int>() == 2);

  // both subscribers see identical command sequences
  std::vector<std::string> seq1, seq2;
  for (int i = 0; i < 6; ++i) {
    const auto a = sub1.read_line();
    const auto b = sub2.read_line();
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    seq1.push_back(*a);
    seq2.push_back(*b);
  }
  CHECK(seq1 == seq2);
  CHECK(seq1.front().find("speed_limit_command") != std::string::npos);

  service.stop();
}

TEST_CASE("serve and replay produce identical decision logs") {
  // Build a small recording with a gap.
  const auto dir = temp_dir("vsltk_equivalence");
  const auto csv = dir / "recording.csv";
  {
    std::ofstream out(csv);
    out << kSensorCsvHeader << "\n";
    for (int k = 1; k <= 8; ++k) {
      out << "s1," << 30.0 * k << "," << 60.0 - k << ",0.1\n";
      if (k % 3 != 0) out << "s2," << 30.0 * k << ",44.0,0.35\n";
      out << "s3," << 30.0 * k << ",52.0,0.2\n";
    }
  }

  ServiceConfig cfg;
  cfg.port = 0;
  cfg.tick_seconds = 30.0;
  cfg.data_clock = true;
  cfg.log_dir = (dir / "serve_log").string();
  DssService service(three_gantries(), {}, stub70(), cfg);
  service.start();
  stream_sensor_csv("127.0.0.1", service.port(), csv);
  service.stop();

  replay(csv, three_gantries(), {}, stub70(), 30.0, dir / "replay_log");

  const auto serve_files = std::filesystem::directory_iterator(dir / "serve_log");
  int compared = 0;
  for (const auto& entry : serve_files) {
    const auto other = dir / "replay_log" / entry.path().filename();
    REQUIRE(std::filesystem::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    compared += 1;
  }
  CHECK(compared > 0);
}

TEST_CASE("fixed-limit baseline posts one capped limit everywhere") {
  ScenarioOptions so;
  so.seed = 21;
  so.horizon_s = 300.0;
  so.custom_max = {{2, 55}};
  Scenario scen = build_training_scenario(so);
  SimulateOptions opt;
  opt.mode = ControlMode::FixedLimit;
  opt.fixed_limit = 60;
  opt.write_outputs = false;
  run_closed_loop(scen, opt);
  // Cells governed by the capped gantry run at min(60, snap(55)) = 50.
  const int capped_cell = scen.gantry_cell[2];
  const int normal_cell = scen.gantry_cell[4];
  const double compliance = scen.cfg.compliance;
  CHECK(scen.sim->effective_free_flow(capped_cell) ==
        doctest::Approx(compliance * 50.0 + (1 - compliance) * 70.0));
  CHECK(scen.sim->effective_free_flow(normal_cell) ==
        doctest::Approx(compliance * 60.0 + (1 - compliance) * 70.0));
}

TEST_CASE("guard config validation") {
  const Corridor c = three_gantries();
  GuardConfig bad;
  bad.a_diff = 15;
  CHECK_THROWS(GuardPipeline(&c, bad, stub70()));
  bad.a_diff = 10;
  bad.o_thred = 1.5;
  CHECK_THROWS(GuardPipeline(&c, bad, stub70()));
}

TEST_CASE("a subscriber disconnect does not disturb the loop or other subscribers") {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.tick_seconds = 30.0;
  cfg.data_clock = true;
  DssService service(three_gantries(), {}, stub70(), cfg);
  service.start();

  auto goner = std::make_unique<NdjsonClient>("127.0.0.1", service.port());
  NdjsonClient stayer("127.0.0.1", service.port());
  goner->send_line(R"({"type":"subscribe"})");
  stayer.send_line(R"({"type":"subscribe"})");
  REQUIRE(goner->read_line().has_value());
  REQUIRE(stayer.read_line().has_value());
  goner.reset();  // drop one subscriber

  NdjsonClient feeder("127.0.0.1", service.port());
  for (int k = 1; k <= 3; ++k) {
    for (const auto* id : {"s1", "s2", "s3"}) {
      nlohmann::ordered_json j;
      j["type"] = "sensor_update";
      j["sensor_id"] = id;
      j["timestamp"] = 30.0 * k;
      j["speed"] = 61.0;
      j["occupancy"] = 0.05;
      feeder.send_line(j.dump());
    }
  }
  feeder.send_line(R"({"type":"flush"})");
  REQUIRE(feeder.read_line().has_value());  // flush_ack

  int received = 0;
  while (received < 9) {
    const auto line = stayer.read_line(2000);
    REQUIRE(line.has_value());
    if (line->find("speed_limit_command") != std::string::npos) received += 1;
  }
  CHECK(received == 9);
  CHECK(service.health().tick_count == 3);
  service.stop();
}

TEST_CASE("closed-loop simulate log equals an open-loop replay of its CSV") {
  const auto dir = temp_dir("vsltk_sim_replay");
  ScenarioOptions so;
  so.seed = 17;
  so.horizon_s = 600.0;
  Scenario scen = build_testing_scenario(so);

  marl::PolicyParams params = marl::PolicyParams::init(17, 8);
  const auto ckpt = dir / "ckpt.json";
  params.save(ckpt);

  SimulateOptions opt;
  opt.mode = ControlMode::Policy;
  opt.checkpoint = ckpt;
  opt.out_dir = dir / "sim";
  run_closed_loop(scen, opt);

  Corridor corridor = build_testing_scenario(so).corridor;
  replay(dir / "sim" / "measurements.csv", corridor, {}, marl::make_greedy_policy(params),
         scen.cfg.sensor_interval_s, dir / "replay");

  int compared = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "sim" / "decisions")) {
    const auto other = dir / "replay" / entry.path().filename();
    REQUIRE(std::filesystem::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    compared += 1;
  }
  CHECK(compared > 0);
}

TEST_CASE("config: example files load and build") {
  const auto dir = temp_dir("vsltk_config");
  write_example_config(dir / "training.json", "training");
  const auto cfg = load_config(dir / "training.json");
  CHECK(cfg.scenario_builtin == "training");
  CHECK(cfg.guards.a_diff == 10);
  const auto corridor = cfg.build_corridor();
  CHECK(corridor.size() == 8);
  CHECK(config_hash(dir / "training.json") == config_hash(dir / "training.json"));
}

TEST_CASE("config: custom corridor geometry") {
  const auto dir = temp_dir("vsltk_config_custom");
  const auto path = dir / "custom.json";
  std::ofstream(path) << R"({
    "scenario": {
      "builtin": "custom",
      "length_miles": 2.0,
      "upstream_milepost": 2.0,
      "sim": {"dt_seconds": 2.0, "lanes": 3, "horizon_seconds": 600, "seed": 4},
      "mainline_demand": [[0, 1200]],
      "ramps": [{"milepost": 0.5, "lanes": 1, "demand": [[0, 600]]}],
      "corridor": {
        "direction": "decreasing",
        "default_max": 70,
        "gantries": [{"id": "a", "milepost": 1.0, "max_limit": 65},
                      {"id": "b", "milepost": 1.5}],
        "sensors": [{"id": "sa", "milepost": 0.9}, {"id": "sb", "milepost": 1.4}]
      }
    }
  })";
  const auto cfg = load_config(path);
  auto scen = cfg.build_scenario();
  CHECK(scen.corridor.size() == 2);
  CHECK(scen.corridor.gantries()[0].max_limit == 65);
  scen.sim->run_until(300.0);
  CHECK(scen.sim->total_vehicles() > 0.0);
  CHECK_THROWS(load_config(dir / "missing.json"));
}
