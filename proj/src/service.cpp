#include "vsl/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <stdexcept>

#include "json.hpp"

namespace vsl::dss {

namespace {

std::string error_msg(const std::string& message) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["protocol_version"] = kProtocolVersion;
  j["message"] = message;
  return j.dump();
}

std::string command_msg(const SpeedLimitCommand& c) {
  nlohmann::ordered_json j;
  j["type"] = "speed_limit_command";
  j["protocol_version"] = kProtocolVersion;
  j["gantry_id"] = c.gantry_id;
  j["timestamp"] = c.timestamp;
  j["limit"] = c.limit;
  j["attribution"] = to_string(c.attribution);
  return j.dump();
}

}  // namespace

DssService::Connection::~Connection() {
  if (fd >= 0) ::close(fd);
}

DssService::DssService(Corridor corridor, GuardConfig guard_cfg, PolicyFn policy,
                       ServiceConfig cfg)
    : corridor_(std::move(corridor)), cfg_(std::move(cfg)) {
  if (!cfg_.log_dir.empty()) {
    log_ = std::make_unique<DecisionLogWriter>(cfg_.log_dir);
  }
  engine_ = std::make_unique<TickEngine>(
      &corridor_, guard_cfg, std::move(policy), cfg_.tick_seconds, log_.get(),
      [this](const std::vector<SpeedLimitCommand>& commands) { broadcast(commands); });
}

DssService::~DssService() { stop(); }

void DssService::start() {
  if (cfg_.port < 0 || cfg_.port > 65535) {
    throw std::invalid_argument("invalid TCP port: " + std::to_string(cfg_.port));
  }
  if (running_.exchange(true)) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(cfg_.port));
  if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    running_ = false;
    throw std::runtime_error("invalid host address: " + cfg_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    running_ = false;
    throw std::runtime_error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  }
  if (::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    running_ = false;
    throw std::runtime_error("listen() failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  accept_thread_ = std::thread([this] { accept_loop(); });
  if (!cfg_.data_clock) {
    tick_thread_ = std::thread([this] { wall_clock_loop(); });
  }
}

void DssService::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  if (tick_thread_.joinable()) tick_thread_.join();
  std::vector<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(conns_mu_);
    conns.swap(conns_);
  }
  for (const auto& conn : conns) close_connection(conn);
  for (const auto& conn : conns) {
    if (conn->reader.joinable()) conn->reader.join();
    if (conn->writer.joinable()) conn->writer.join();
  }
}

HealthStats DssService::health() const {
  std::lock_guard lock(engine_mu_);
  return {engine_->tick_count(), engine_->last_tick_ms(), engine_->error_count()};
}

std::vector<std::filesystem::path> DssService::log_files() const {
  return log_ ? log_->files() : std::vector<std::filesystem::path>{};
}

void DssService::accept_loop() {
  while (running_) {
    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    {
      std::lock_guard lock(conns_mu_);
      if (!running_) {
        ::close(fd);
        break;
      }
      conns_.push_back(conn);
    }
    conn->writer = std::thread([this, conn] { writer_loop(conn); });
    conn->reader = std::thread([this, conn] { reader_loop(conn); });
  }
}

void DssService::close_connection(const std::shared_ptr<Connection>& conn) {
  {
    std::lock_guard lock(conn->mu);
    if (conn->closing) return;
    conn->closing = true;
  }
  // Shut the socket down before waking the writer: the fd must stay valid
  // until both loops have observed the close.
  ::shutdown(conn->fd, SHUT_RDWR);
  conn->cv.notify_all();
}

void DssService::reader_loop(std::shared_ptr<Connection> conn) {
  std::string buffer;
  char chunk[4096];
  while (running_) {
    const ssize_t n = ::recv(conn->fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) handle_line(conn, line);
    }
  }
  close_connection(conn);
}

void DssService::writer_loop(std::shared_ptr<Connection> conn) {
  while (true) {
    std::string line;
    {
      std::unique_lock lock(conn->mu);
      conn->cv.wait(lock, [&] { return conn->closing || !conn->outbox.empty(); });
      if (conn->outbox.empty()) {
        if (conn->closing) break;
        continue;
      }
      line = std::move(conn->outbox.front());
      conn->outbox.pop_front();
    }
    line.push_back('\n');
    std::size_t sent = 0;
    while (sent < line.size()) {
      const ssize_t n = ::send(conn->fd, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) break;
      sent += static_cast<std::size_t>(n);
    }
  }
  // The fd is closed by the Connection destructor once both loops are done.
}

void DssService::enqueue(const std::shared_ptr<Connection>& conn, const std::string& line) {
  {
    std::lock_guard lock(conn->mu);
    if (conn->closing) return;
    conn->outbox.push_back(line);
  }
  conn->cv.notify_one();
}

void DssService::broadcast(const std::vector<SpeedLimitCommand>& commands) {
  std::vector<std::string> lines;
  lines.reserve(commands.size());
  for (const auto& c : commands) lines.push_back(command_msg(c));
  std::lock_guard lock(conns_mu_);
  for (const auto& conn : conns_) {
    if (!conn->subscribed) continue;
    for (const auto& line : lines) enqueue(conn, line);
  }
}

void DssService::handle_line(const std::shared_ptr<Connection>& conn, const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const std::exception&) {
    enqueue(conn, error_msg("malformed JSON"));
    return;
  }
  const std::string type = j.value("type", "");
  try {
    if (type == "sensor_update") {
      SensorUpdate u;
      u.sensor_id = j.at("sensor_id").get<std::string>();
      u.timestamp = j.at("timestamp").get<double>();
      if (j.contains("speed") && !j["speed"].is_null()) u.speed = j["speed"].get<double>();
      if (j.contains("occupancy") && !j["occupancy"].is_null()) {
        u.occupancy = j["occupancy"].get<double>();
      }
      bool ok;
      {
        std::lock_guard lock(engine_mu_);
        ok = engine_->ingest(u);
      }
      if (!ok) enqueue(conn, error_msg("unknown sensor id: " + u.sensor_id));
    } else if (type == "subscribe") {
      conn->subscribed = true;
      nlohmann::ordered_json ack;
      ack["type"] = "subscribe_ack";
      ack["protocol_version"] = kProtocolVersion;
      enqueue(conn, ack.dump());
    } else if (type == "health_query") {
      HealthStats h;
      {
        std::lock_guard lock(engine_mu_);
        h = {engine_->tick_count(), engine_->last_tick_ms(), engine_->error_count()};
      }
      nlohmann::ordered_json reply;
      reply["type"] = "health_reply";
      reply["protocol_version"] = kProtocolVersion;
      reply["tick_count"] = h.tick_count;
      reply["last_tick_ms"] = h.last_tick_ms;
      reply["error_count"] = h.error_count;
      enqueue(conn, reply.dump());
    } else if (type == "flush") {
      {
        std::lock_guard lock(engine_mu_);
        engine_->flush();
      }
      nlohmann::ordered_json ack;
      ack["type"] = "flush_ack";
      ack["protocol_version"] = kProtocolVersion;
      enqueue(conn, ack.dump());
    } else {
      enqueue(conn, error_msg("unknown message type: " + type));
    }
  } catch (const std::exception& e) {
    enqueue(conn, error_msg(std::string("bad message: ") + e.what()));
  }
}

void DssService::wall_clock_loop() {
  using clock = std::chrono::system_clock;
  while (running_) {
    std::this_thread::sleep_for(std::chrono::duration<double>(cfg_.tick_seconds));
    if (!running_) break;
    const double now = std::chrono::duration<double>(clock::now().time_since_epoch()).count();
    std::lock_guard lock(engine_mu_);
    engine_->tick_now(now);
  }
}

NdjsonClient::NdjsonClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::runtime_error("invalid host address: " + host);
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

NdjsonClient::~NdjsonClient() { close(); }

void NdjsonClient::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void NdjsonClient::send_line(const std::string& line) {
  std::string msg = line;
  msg.push_back('\n');
  std::size_t sent = 0;
  while (sent < msg.size()) {
    const ssize_t n = ::send(fd_, msg.data() + sent, msg.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) throw std::runtime_error("send() failed");
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> NdjsonClient::read_line(int timeout_ms) {
  while (true) {
    const std::size_t pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc <= 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void stream_sensor_csv(const std::string& host, int port, const std::filesystem::path& csv_path) {
  const auto rows = read_sensor_csv(csv_path);
  NdjsonClient client(host, port);
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["type"] = "sensor_update";
    j["protocol_version"] = kProtocolVersion;
    j["sensor_id"] = row.sensor_id;
    j["timestamp"] = row.timestamp;
    j["speed"] = row.speed ? nlohmann::json(*row.speed) : nlohmann::json(nullptr);
    j["occupancy"] = row.occupancy ? nlohmann::json(*row.occupancy) : nlohmann::json(nullptr);
    client.send_line(j.dump());
  }
  client.send_line(R"({"type":"flush"})");
  // Wait for the ack so the decision log is complete before returning.
  while (auto line = client.read_line()) {
    if (line->find("flush_ack") != std::string::npos) break;
  }
}

}  // namespace vsl::dss
