#include "vsl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace vsl {

Mlp::Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("MLP needs at least input and output sizes");
  init_offsets();
  params_.assign(layer_offset_.back(), 0.0);
  Rng rng(seed);
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    // Xavier-uniform weights; the output layer is scaled down so the initial
    // policy is near-uniform and the initial value near zero.
    double s = std::sqrt(6.0 / (in + out));
    if (l + 1 == layers) s *= 0.01;
    double* w = params_.data() + layer_offset_[l];
    for (int i = 0; i < out * in; ++i) w[i] = rng.uniform(-s, s);
    // biases stay zero
  }
}

Mlp::Mlp(std::vector<int> sizes, std::vector<double> params)
    : sizes_(std::move(sizes)), params_(std::move(params)) {
  if (sizes_.size() < 2) throw std::invalid_argument("MLP needs at least input and output sizes");
  init_offsets();
  if (params_.size() != layer_offset_.back()) {
    throw std::invalid_argument("parameter vector size does not match layer sizes");
  }
}

void Mlp::init_offsets() {
  layer_offset_.assign(sizes_.size(), 0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    layer_offset_[l] = off;
    off += static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
  }
  layer_offset_.back() = off;
}

void Mlp::forward(std::span<const double> input, Workspace& ws) const {
  if (static_cast<int>(input.size()) != input_size()) {
    throw std::invalid_argument("MLP input size mismatch");
  }
  const std::size_t layers = sizes_.size() - 1;
  ws.act.resize(layers + 1);
  ws.act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params_.data() + layer_offset_[l];
    const double* b = w + static_cast<std::size_t>(out) * in;
    auto& y = ws.act[l + 1];
    y.assign(static_cast<std::size_t>(out), 0.0);
    const auto& x = ws.act[l];
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wr = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += wr[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = l + 1 == layers ? acc : std::tanh(acc);
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Workspace ws;
  forward(input, ws);
  return ws.act.back();
}

void Mlp::backward(Mlp::Workspace& ws, std::span<const double> doutput,
                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  const std::size_t layers = sizes_.size() - 1;
  auto& delta = ws.delta;
  delta.resize(layers + 1);
  delta[layers].assign(doutput.begin(), doutput.end());
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double* w = params_.data() + layer_offset_[l];
    double* gw = grad.data() + layer_offset_[l];
    double* gb = gw + static_cast<std::size_t>(out) * in;
    const auto& x = ws.act[l];
    const auto& y = ws.act[l + 1];
    auto& d = delta[l + 1];
    // tanh' applied to hidden layers only (output is linear)
    if (l + 1 != layers) {
      for (int o = 0; o < out; ++o) {
        const double t = y[static_cast<std::size_t>(o)];
        d[static_cast<std::size_t>(o)] *= 1.0 - t * t;
      }
    }
    auto& dx = delta[l];
    dx.assign(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      const double dv = d[static_cast<std::size_t>(o)];
      double* gwr = gw + static_cast<std::size_t>(o) * in;
      const double* wr = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        gwr[i] += dv * x[static_cast<std::size_t>(i)];
        dx[static_cast<std::size_t>(i)] += dv * wr[i];
      }
      gb[o] += dv;
    }
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("Adam state size mismatch");
  }
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
}

}  // namespace vsl
