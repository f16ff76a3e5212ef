#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vsl/policy.hpp"
#include "vsl/scenario.hpp"

namespace vsl::marl {

struct RewardWeights {
  double w_a = 1.0;  // adaptability
  double w_s = 1.0;  // safety
  double w_m = 1.0;  // mobility
};

struct RewardInputs {
  int action = 70;             // mph posted by this agent
  int downstream_action = 70;  // mph intended by the downstream neighbor
  double speed = 70.0;         // mph at the agent's critical sensor
  double occupancy = 0.0;
};

// Three-term reward. Adaptability penalizes limits far above the measured
// speed while the sensor reads congested; safety penalizes step-downs
// steeper than 10 mph toward downstream; mobility pays for high limits in
// free flow. Every term lies in [-1, 1].
double reward(const RewardInputs& in, const RewardWeights& w, double occ_threshold = 0.15);

struct Hyperparams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double entropy_coef = 0.01;
  int epochs = 4;
  int minibatch = 1024;
  int episodes_per_iter = 4;
  int iterations = 40;
  std::uint64_t seed = 1;
  double episode_demand_jitter = 0.05;  // per-episode demand variation
  int a_diff = 10;                      // masking bound used during rollouts
  double occ_threshold = 0.15;
};

struct Transition {
  std::array<double, 5> obs{};
  std::vector<double> global_state;  // concatenated local observations
  int action_index = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  std::array<bool, kNumActions> mask{};
  double advantage = 0.0;
  double ret = 0.0;
};

// Standard GAE recursion over one agent's episode slice; fills advantage
// and return fields in place.
void compute_gae(std::span<Transition> trajectory, double gamma, double lambda);

struct LossStats {
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Clipped-surrogate actor loss with masked log-probs and entropy bonus.
// Accumulates dLoss/dparams into `grad`; returns the mean loss.
double actor_loss_and_grad(const Mlp& actor, const std::vector<Transition>& batch,
                           std::span<const std::size_t> indices, const Hyperparams& hp,
                           std::vector<double>& grad, LossStats* stats = nullptr);

// Mean-squared-error critic regression on returns.
double critic_loss_and_grad(const Mlp& critic, const std::vector<Transition>& batch,
                            std::span<const std::size_t> indices, std::vector<double>& grad);

struct UpdateDiagnostics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// One MAPPO update over a gathered batch: advantages normalized across the
// batch, then `epochs` passes of shuffled minibatches on both networks.
// Throws if a non-finite loss appears.
UpdateDiagnostics mappo_update(std::vector<Transition>& batch, PolicyParams& params,
                               const Hyperparams& hp, Adam& actor_opt, Adam& critic_opt, Rng& rng);

struct IterationStats {
  int iteration = 0;
  double mean_episode_reward = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<IterationStats> curve;
};

using ScenarioFactory = std::function<Scenario(std::uint64_t episode_seed)>;

// Builds training-scenario episodes with per-episode demand jitter derived
// from the hyperparameter seed.
ScenarioFactory training_scenario_factory(const Hyperparams& hp);

// Desk-scale MAPPO training: rollouts with invalid action masking active,
// parameter sharing across the homogeneous agents, centralized critic on the
// concatenated observations. Optionally writes checkpoint files under
// `checkpoint_dir` every 10 iterations plus the final parameters.
TrainResult train(const ScenarioFactory& factory, const Hyperparams& hp, const RewardWeights& w,
                  const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt,
                  const std::function<void(const IterationStats&)>& on_iteration = {});

// Greedy policy evaluation: returns the per-episode mean-agent cumulative
// reward over `episodes` seeded episodes.
std::vector<double> evaluate(const ScenarioFactory& factory, const PolicyParams& params,
                             const RewardWeights& w, int episodes, std::uint64_t seed_base,
                             const Hyperparams& hp = {});

}  // namespace vsl::marl
