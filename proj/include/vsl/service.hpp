#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vsl/tick_engine.hpp"

namespace vsl::dss {

inline constexpr int kProtocolVersion = 1;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8471;            // 0 picks an ephemeral port
  double tick_seconds = 30.0;
  bool data_clock = false;    // tick on data timestamps instead of wall clock
  std::string log_dir;        // decision log directory (empty = no log)
};

struct HealthStats {
  int tick_count = 0;
  double last_tick_ms = 0.0;
  int error_count = 0;
};

// Decision-support service: newline-delimited JSON over TCP. Inbound
// messages: sensor_update, subscribe, health_query, flush. Outbound:
// speed_limit_command broadcasts to subscribers, subscribe_ack/flush_ack/
// health_reply/error replies. Malformed input gets an error reply and the
// connection stays open. One logical decision loop owns the posted-limit
// state; ingestion is serialized through it, publication goes through
// per-subscriber queues so a slow subscriber cannot stall the loop.
class DssService {
 public:
  DssService(Corridor corridor, GuardConfig guard_cfg, PolicyFn policy, ServiceConfig cfg);
  ~DssService();

  void start();
  void stop();
  int port() const { return port_; }
  HealthStats health() const;
  std::vector<std::filesystem::path> log_files() const;

 private:
  struct Connection {
    int fd = -1;
    bool subscribed = false;
    std::deque<std::string> outbox;
    std::mutex mu;
    std::condition_variable cv;
    bool closing = false;
    std::thread reader;
    std::thread writer;
    ~Connection();
  };

  void accept_loop();
  void reader_loop(std::shared_ptr<Connection> conn);
  void writer_loop(std::shared_ptr<Connection> conn);
  void wall_clock_loop();
  void handle_line(const std::shared_ptr<Connection>& conn, const std::string& line);
  static void enqueue(const std::shared_ptr<Connection>& conn, const std::string& line);
  void broadcast(const std::vector<SpeedLimitCommand>& commands);
  void close_connection(const std::shared_ptr<Connection>& conn);

  Corridor corridor_;
  ServiceConfig cfg_;
  std::unique_ptr<DecisionLogWriter> log_;
  std::unique_ptr<TickEngine> engine_;
  mutable std::mutex engine_mu_;

  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread tick_thread_;
  std::mutex conns_mu_;
  std::vector<std::shared_ptr<Connection>> conns_;
};

// Minimal blocking NDJSON client, used by the mock peer and tests.
class NdjsonClient {
 public:
  NdjsonClient(const std::string& host, int port);
  ~NdjsonClient();

  void send_line(const std::string& line);
  // Blocks up to timeout_ms; returns nullopt on timeout or closed peer.
  std::optional<std::string> read_line(int timeout_ms = 5000);
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
};

// Mock peer: streams a recorded sensor CSV to a running service as
// sensor_update messages, then sends flush and waits for the ack.
void stream_sensor_csv(const std::string& host, int port, const std::filesystem::path& csv_path);

}  // namespace vsl::dss
