#include "vsl/ctm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsl {

void validate_demand(const DemandProfile& profile) {
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile[i].flow_vphpl < 0.0) throw std::invalid_argument("demand flow must be >= 0");
    if (i > 0 && profile[i].start_s <= profile[i - 1].start_s) {
      throw std::invalid_argument("demand start times must be strictly increasing");
    }
  }
}

double demand_at(const DemandProfile& profile, double t_s) {
  double flow = 0.0;
  for (const auto& step : profile) {
    if (t_s >= step.start_s) flow = step.flow_vphpl;
  }
  return flow;
}

double quantize(double value, double divisor) {
  return std::llround(value * divisor) / divisor;
}

CtmSimulator::CtmSimulator(double length_mi, SimConfig cfg, DemandProfile mainline_demand,
                           std::vector<RampConfig> ramps, Direction direction,
                           double upstream_milepost)
    : cfg_(cfg),
      direction_(direction),
      upstream_milepost_(upstream_milepost),
      mainline_demand_(std::move(mainline_demand)),
      rng_(sub_seed(cfg.seed, "ctm.sensor")),
      demand_rng_(sub_seed(cfg.seed, "ctm.demand")) {
  if (cfg_.dt_s <= 0.0) throw std::invalid_argument("dt must be > 0");
  if (cfg_.cell_length_mi <= 0.0) throw std::invalid_argument("cell length must be > 0");
  if (cfg_.lanes <= 0) throw std::invalid_argument("lane count must be > 0");
  if (cfg_.compliance < 0.0 || cfg_.compliance > 1.0) {
    throw std::invalid_argument("compliance must be in [0, 1]");
  }
  const double ratio = cfg_.sensor_interval_s / cfg_.dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("sensor interval must be a multiple of dt");
  }
  // CFL: a vehicle may not cross a full cell in one step.
  const double dt_h = cfg_.dt_s / 3600.0;
  if (dt_h * cfg_.fd.v_free > cfg_.cell_length_mi + 1e-12) {
    throw std::invalid_argument("CFL violated: dt exceeds cell_length / v_free");
  }
  if (cfg_.fd.k_jam <= cfg_.fd.critical_density()) {
    throw std::invalid_argument("fundamental diagram requires k_jam > q_max / v_free");
  }
  dt_h_ = dt_h;

  const int n = std::max(1, static_cast<int>(std::round(length_mi / cfg_.cell_length_mi)));
  density_.assign(static_cast<std::size_t>(n), 0.0);
  speed_.assign(static_cast<std::size_t>(n), cfg_.fd.v_free);
  v_eff_.assign(static_cast<std::size_t>(n), cfg_.fd.v_free);
  limit_mph_.assign(static_cast<std::size_t>(n), kNoLimit);
  win_flow_.assign(static_cast<std::size_t>(n), 0.0);
  win_flow_speed_.assign(static_cast<std::size_t>(n), 0.0);
  win_speed_.assign(static_cast<std::size_t>(n), 0.0);
  win_density_.assign(static_cast<std::size_t>(n), 0.0);

  validate_demand(mainline_demand_);
  time_s_ = cfg_.start_time_s;

  for (auto& rc : ramps) {
    validate_demand(rc.demand);
    Ramp r;
    r.cell = cell_of_milepost(rc.milepost);
    r.cfg = std::move(rc);
    ramps_.push_back(std::move(r));
  }
}

int CtmSimulator::cell_of_milepost(double mp) const {
  const double off = downstream_offset(direction_, upstream_milepost_, mp);
  int cell = static_cast<int>(std::floor(off / cfg_.cell_length_mi + 1e-9));
  return std::clamp(cell, 0, cell_count() - 1);
}

double CtmSimulator::milepost_of_cell(int cell) const {
  const double off = (cell + 0.5) * cfg_.cell_length_mi;
  return direction_ == Direction::DecreasingMilepost ? upstream_milepost_ - off
                                                     : upstream_milepost_ + off;
}

void CtmSimulator::set_cell_limits(const std::vector<int>& limit_mph_per_cell) {
  if (limit_mph_per_cell.size() != density_.size()) {
    throw std::invalid_argument("limit vector size does not match cell count");
  }
  limit_mph_ = limit_mph_per_cell;
  for (std::size_t i = 0; i < v_eff_.size(); ++i) {
    const double lim = std::min<double>(limit_mph_[i], cfg_.fd.v_free);
    v_eff_[i] = cfg_.compliance * lim + (1.0 - cfg_.compliance) * cfg_.fd.v_free;
  }
}

void CtmSimulator::clear_limits() {
  std::fill(limit_mph_.begin(), limit_mph_.end(), kNoLimit);
  std::fill(v_eff_.begin(), v_eff_.end(), cfg_.fd.v_free);
}

void CtmSimulator::ramp_arrivals_and_sending(double t, std::vector<double>& ramp_sending) {
  ramp_sending.assign(ramps_.size(), 0.0);
  for (std::size_t r = 0; r < ramps_.size(); ++r) {
    auto& ramp = ramps_[r];
    double d = demand_at(ramp.cfg.demand, t) * ramp.cfg.lanes * cfg_.demand_scale;
    if (cfg_.demand_jitter > 0.0) {
      const auto block = static_cast<std::uint64_t>(std::floor(t / 900.0));
      Rng block_rng(sub_seed(cfg_.seed, "ctm.jitter.ramp", (r << 24) ^ block));
      d *= std::clamp(1.0 + cfg_.demand_jitter * block_rng.normal(), 0.5, 1.5);
    }
    ramp.queue += d * dt_h_;
    ramp_sending[r] = std::min(ramp.queue / dt_h_, cfg_.fd.q_max * ramp.cfg.lanes);
  }
}

void CtmSimulator::step() {
  const int n = cell_count();
  const double len = cfg_.cell_length_mi;
  const double lanes = cfg_.lanes;
  const auto& fd = cfg_.fd;

  std::vector<double> sending(static_cast<std::size_t>(n));
  std::vector<double> receiving(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    sending[u] = std::min(v_eff_[u] * density_[u], fd.q_max) * lanes;
    receiving[u] = std::min(fd.q_max, fd.wave_speed() * (fd.k_jam - density_[u])) * lanes;
    receiving[u] = std::max(receiving[u], 0.0);
  }

  std::vector<double> ramp_sending;
  ramp_arrivals_and_sending(time_s_, ramp_sending);

  std::vector<double> inflow(static_cast<std::size_t>(n), 0.0);
  std::vector<double> outflow(static_cast<std::size_t>(n), 0.0);
  std::vector<double> ramp_flow(ramps_.size(), 0.0);

  // Mainline boundary demand queues at the upstream edge.
  {
    double d = demand_at(mainline_demand_, time_s_) * lanes * cfg_.demand_scale;
    if (cfg_.demand_jitter > 0.0) {
      const auto block = static_cast<std::uint64_t>(std::floor(time_s_ / 900.0));
      Rng block_rng(sub_seed(cfg_.seed, "ctm.jitter.main", block));
      d *= std::clamp(1.0 + cfg_.demand_jitter * block_rng.normal(), 0.5, 1.5);
    }
    mainline_queue_ += d * dt_h_;
  }

  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    // Upstream supply into cell i: mainline for i = 0, otherwise cell i-1.
    double s_main = i == 0 ? std::min(mainline_queue_ / dt_h_, fd.q_max * lanes)
                           : sending[static_cast<std::size_t>(i - 1)];
    double s_ramp = 0.0;
    int ramp_idx = -1;
    for (std::size_t r = 0; r < ramps_.size(); ++r) {
      if (ramps_[r].cell == i) {
        s_ramp += ramp_sending[r];
        ramp_idx = static_cast<int>(r);
      }
    }
    const double total = s_main + s_ramp;
    double f_main = 0.0;
    double f_ramp = 0.0;
    if (total > 0.0) {
      if (total <= receiving[u]) {
        f_main = s_main;
        f_ramp = s_ramp;
      } else {
        // Demand-proportional merge allocation.
        f_main = receiving[u] * (s_main / total);
        f_ramp = receiving[u] * (s_ramp / total);
      }
    }
    inflow[u] = f_main + f_ramp;
    if (i == 0) {
      mainline_queue_ -= f_main * dt_h_;
      mainline_queue_ = std::max(mainline_queue_, 0.0);
      cum_inflow_ += f_main * dt_h_;
    } else {
      outflow[static_cast<std::size_t>(i - 1)] = f_main;
    }
    if (ramp_idx >= 0 && f_ramp > 0.0) {
      double remaining = f_ramp;
      for (std::size_t r = 0; r < ramps_.size(); ++r) {
        if (ramps_[r].cell != i) continue;
        const double share = ramp_sending[r] > 0.0 && s_ramp > 0.0
                                 ? remaining * (ramp_sending[r] / s_ramp)
                                 : 0.0;
        ramp_flow[r] = share;
        ramps_[r].queue -= share * dt_h_;
        ramps_[r].queue = std::max(ramps_[r].queue, 0.0);
        cum_inflow_ += share * dt_h_;
      }
    }
  }

  // Free discharge at the downstream boundary.
  const auto last = static_cast<std::size_t>(n - 1);
  outflow[last] = outflow_blocked_ ? 0.0 : sending[last];
  cum_outflow_ += outflow[last] * dt_h_;

  win_steps_ += 1;
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double dk = (inflow[u] - outflow[u]) * dt_h_ / (len * lanes);
    density_[u] = std::clamp(density_[u] + dk, 0.0, fd.k_jam);
    // Realized speed: outflow over density, capped by the effective limit.
    speed_[u] = density_[u] < 1e-9 ? v_eff_[u]
                                   : std::min(v_eff_[u], outflow[u] / (density_[u] * lanes));
    vht_ += density_[u] * len * lanes * dt_h_;
    vmt_ += outflow[u] * dt_h_ * len;
    win_flow_[u] += outflow[u];
    win_flow_speed_[u] += outflow[u] * speed_[u];
    win_speed_[u] += speed_[u];
    win_density_[u] += density_[u];
  }

  time_s_ += cfg_.dt_s;
}

void CtmSimulator::run_until(double t_s) {
  while (time_s_ < t_s - 1e-9) step();
}

double CtmSimulator::mean_speed_between(double mp_a, double mp_b) const {
  const int c1 = cell_of_milepost(mp_a);
  const int c2 = cell_of_milepost(mp_b);
  const int lo = std::min(c1, c2);
  const int hi = std::max(c1, c2);
  double sum = 0.0;
  for (int i = lo; i <= hi; ++i) sum += speed_[static_cast<std::size_t>(i)];
  return sum / (hi - lo + 1);
}

void CtmSimulator::set_density(int cell, double k) {
  if (k < 0.0 || k > cfg_.fd.k_jam) throw std::invalid_argument("density outside [0, k_jam]");
  density_[static_cast<std::size_t>(cell)] = k;
}

double CtmSimulator::total_vehicles() const {
  double total = 0.0;
  for (const double k : density_) total += k * cfg_.cell_length_mi * cfg_.lanes;
  return total;
}

CtmSimulator::WindowStats CtmSimulator::window_stats(int cell) const {
  const auto u = static_cast<std::size_t>(cell);
  WindowStats ws;
  ws.steps = win_steps_;
  if (win_steps_ == 0) {
    ws.mean_speed = v_eff_[u];
    ws.mean_occupancy = density_[u] / cfg_.fd.k_jam;
    return ws;
  }
  ws.mean_speed = win_flow_[u] > 1e-12 ? win_flow_speed_[u] / win_flow_[u]
                                       : win_speed_[u] / win_steps_;
  ws.mean_occupancy = win_density_[u] / win_steps_ / cfg_.fd.k_jam;
  return ws;
}

void CtmSimulator::reset_window() {
  std::fill(win_flow_.begin(), win_flow_.end(), 0.0);
  std::fill(win_flow_speed_.begin(), win_flow_speed_.end(), 0.0);
  std::fill(win_speed_.begin(), win_speed_.end(), 0.0);
  std::fill(win_density_.begin(), win_density_.end(), 0.0);
  win_steps_ = 0;
}

Measurement CtmSimulator::readout(const std::string& sensor_id, int cell, double timestamp) {
  const WindowStats ws = window_stats(cell);
  double speed = ws.mean_speed;
  double occ = ws.mean_occupancy;
  if (cfg_.sensor_noise_speed > 0.0) speed += cfg_.sensor_noise_speed * rng_.normal();
  if (cfg_.sensor_noise_occ > 0.0) occ += cfg_.sensor_noise_occ * rng_.normal();
  Measurement m;
  m.sensor_id = sensor_id;
  m.timestamp = timestamp;
  m.speed = quantize(std::clamp(speed, 0.0, 100.0), 1e4);
  m.occupancy = quantize(std::clamp(occ, 0.0, 1.0), 1e6);
  m.valid = true;
  return m;
}

}  // namespace vsl
