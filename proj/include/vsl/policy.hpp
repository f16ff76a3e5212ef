#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "vsl/corridor.hpp"
#include "vsl/guards.hpp"
#include "vsl/mlp.hpp"

namespace vsl::marl {

// Categorical distribution over the action grid with invalid actions masked
// out: masked logits are treated as -inf, so masked probabilities are
// exactly zero and the rest renormalize.
struct MaskedDistribution {
  std::array<double, kNumActions> probs{};
  std::array<double, kNumActions> logits{};
  std::array<bool, kNumActions> valid{};
  double log_z = 0.0;  // log-sum-exp over valid logits

  static MaskedDistribution from_logits(std::span<const double> logits,
                                        const std::array<bool, kNumActions>& valid);

  int sample(Rng& rng) const;   // returns grid index
  int greedy() const;           // argmax; ties resolved toward the lower limit
  double log_prob(int index) const;
  double entropy() const;
};

// Shared-parameter actor plus centralized critic. Agents are homogeneous:
// every gantry evaluates the same actor weights. The critic consumes the
// concatenation of all local observations of the training scenario.
struct PolicyParams {
  Mlp actor;    // 5 -> hidden -> 5 logits
  Mlp critic;   // 5 * n_agents -> hidden -> 1
  int n_agents = 8;
  int format_version = 1;

  static PolicyParams init(std::uint64_t seed, int n_agents = 8,
                           const std::vector<int>& hidden = {64, 64});

  void save(const std::filesystem::path& path) const;
  static PolicyParams load(const std::filesystem::path& path);
};

// Deployment adapter: greedy masked action selection.
PolicyFn make_greedy_policy(const PolicyParams& params);
PolicyFn make_greedy_policy(Mlp actor);

// Training adapter: masked sampling with an externally owned RNG.
PolicyFn make_sampling_policy(const PolicyParams& params, Rng* rng);

// A handcrafted actor whose logits always prefer a fixed grid action (used
// as a deterministic stub where no trained checkpoint is available).
Mlp make_biased_actor(int preferred_mph);

}  // namespace vsl::marl
