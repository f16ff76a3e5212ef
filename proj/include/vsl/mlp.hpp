#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vsl/rng.hpp"

namespace vsl {

// Fully-connected network with tanh hidden layers and a linear output,
// stored as one flat parameter vector (per layer: row-major weight matrix,
// then bias). The flat layout keeps optimizer state and finite-difference
// checks simple.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, std::uint64_t seed);
  Mlp(std::vector<int> sizes, std::vector<double> params);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Forward/backward share a workspace so batch loops avoid reallocation.
  struct Workspace {
    std::vector<std::vector<double>> act;  // act[0] = input, act[L] = output
    std::vector<std::vector<double>> delta;
  };

  void forward(std::span<const double> input, Workspace& ws) const;
  std::vector<double> forward(std::span<const double> input) const;

  // Accumulates dLoss/dparams into `grad` given dLoss/doutput; requires the
  // workspace of the matching forward call.
  void backward(Workspace& ws, std::span<const double> doutput, std::span<double> grad) const;

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> layer_offset_;  // offset of each layer's weights

  void init_offsets();
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  double learning_rate() const { return lr_; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace vsl
