#include "vsl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vsl::marl {

namespace {
double clip01(double x) { return std::clamp(x, 0.0, 1.0); }
}  // namespace

double reward(const RewardInputs& in, const RewardWeights& w, double occ_threshold) {
  const bool congested = in.occupancy >= occ_threshold;
  const double r_a = congested ? -clip01((in.action - in.speed) / 40.0) : 0.0;
  const double r_s = -clip01((in.action - in.downstream_action - 10.0) / 40.0);
  const double r_m = congested ? 0.0 : in.action / kActionNorm;
  return w.w_a * r_a + w.w_s * r_s + w.w_m * r_m;
}

void compute_gae(std::span<Transition> trajectory, double gamma, double lambda) {
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
  double gae = 0.0;
  for (std::size_t i = trajectory.size(); i-- > 0;) {
    auto& t = trajectory[i];
    const double next_value =
        t.done || i + 1 == trajectory.size() ? 0.0 : trajectory[i + 1].value;
    const double not_done = t.done ? 0.0 : 1.0;
    const double delta = t.reward + gamma * next_value * not_done - t.value;
    gae = delta + gamma * lambda * not_done * gae;
    t.advantage = gae;
    t.ret = gae + t.value;
  }
}

double actor_loss_and_grad(const Mlp& actor, const std::vector<Transition>& batch,
                           std::span<const std::size_t> indices, const Hyperparams& hp,
                           std::vector<double>& grad, LossStats* stats) {
  if (indices.empty()) throw std::invalid_argument("empty minibatch");
  Mlp::Workspace ws;
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  double kl = 0.0, ent_sum = 0.0;
  int clipped = 0;

  std::array<double, kNumActions> dlogits{};
  for (const std::size_t bi : indices) {
    const Transition& t = batch[bi];
    actor.forward(std::span<const double>(t.obs.data(), t.obs.size()), ws);
    const auto dist = MaskedDistribution::from_logits(ws.act.back(), t.mask);
    const double logp = dist.log_prob(t.action_index);
    const double ratio = std::exp(logp - t.log_prob);
    const double adv = t.advantage;
    const double lo = 1.0 - hp.clip_ratio;
    const double hi = 1.0 + hp.clip_ratio;
    const double surr1 = ratio * adv;
    const double surr2 = std::clamp(ratio, lo, hi) * adv;
    const double ent = dist.entropy();
    loss += (-std::min(surr1, surr2) - hp.entropy_coef * ent) * inv_n;
    kl += (t.log_prob - logp) * inv_n;
    ent_sum += ent * inv_n;
    const bool clip_active = (adv >= 0.0 && ratio > hi) || (adv < 0.0 && ratio < lo);
    if (std::abs(ratio - 1.0) > hp.clip_ratio) clipped += 1;

    dlogits.fill(0.0);
    for (int k = 0; k < kNumActions; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      if (!t.mask[ku]) continue;  // masked logits receive no gradient
      const double p = dist.probs[ku];
      double g = 0.0;
      if (!clip_active) {
        const double dlogp = (k == t.action_index ? 1.0 : 0.0) - p;
        g -= ratio * adv * dlogp;  // d(-surrogate)/dlogit
      }
      if (p > 0.0) {
        g -= hp.entropy_coef * (-p * (std::log(p) + ent));
      }
      dlogits[ku] = g * inv_n;
    }
    actor.backward(ws, dlogits, grad);
  }
  if (stats != nullptr) {
    stats->entropy = ent_sum;
    stats->approx_kl = kl;
    stats->clip_fraction = static_cast<double>(clipped) / static_cast<double>(indices.size());
  }
  return loss;
}

double critic_loss_and_grad(const Mlp& critic, const std::vector<Transition>& batch,
                            std::span<const std::size_t> indices, std::vector<double>& grad) {
  if (indices.empty()) throw std::invalid_argument("empty minibatch");
  Mlp::Workspace ws;
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  double dv[1];
  for (const std::size_t bi : indices) {
    const Transition& t = batch[bi];
    critic.forward(t.global_state, ws);
    const double v = ws.act.back()[0];
    const double err = v - t.ret;
    loss += err * err * inv_n;
    dv[0] = 2.0 * err * inv_n;
    critic.backward(ws, std::span<const double>(dv, 1), grad);
  }
  return loss;
}

UpdateDiagnostics mappo_update(std::vector<Transition>& batch, PolicyParams& params,
                               const Hyperparams& hp, Adam& actor_opt, Adam& critic_opt,
                               Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("empty batch");

  // Normalize advantages across the whole update batch.
  double mean = 0.0;
  for (const auto& t : batch) mean += t.advantage;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (const auto& t : batch) var += (t.advantage - mean) * (t.advantage - mean);
  const double stdev = std::sqrt(var / static_cast<double>(batch.size()));
  for (auto& t : batch) t.advantage = (t.advantage - mean) / (stdev + 1e-8);

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);

  UpdateDiagnostics diag;
  std::vector<double> agrad(params.actor.param_count());
  std::vector<double> cgrad(params.critic.param_count());
  const int mb = std::max(1, hp.minibatch);
  int passes = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    // Fisher-Yates shuffle with the trainer RNG.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(mb)) {
      const std::size_t count = std::min<std::size_t>(mb, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      std::fill(agrad.begin(), agrad.end(), 0.0);
      std::fill(cgrad.begin(), cgrad.end(), 0.0);
      LossStats stats;
      const double al = actor_loss_and_grad(params.actor, batch, idx, hp, agrad, &stats);
      const double cl = critic_loss_and_grad(params.critic, batch, idx, cgrad);
      if (!std::isfinite(al) || !std::isfinite(cl)) {
        throw std::runtime_error("non-finite loss (actor=" + std::to_string(al) +
                                 ", critic=" + std::to_string(cl) + ")");
      }
      actor_opt.step(params.actor.params(), agrad);
      critic_opt.step(params.critic.params(), cgrad);
      diag.actor_loss = al;
      diag.critic_loss = cl;
      diag.entropy = stats.entropy;
      diag.approx_kl = stats.approx_kl;
      diag.clip_fraction = stats.clip_fraction;
      passes += 1;
    }
  }
  (void)passes;
  return diag;
}

namespace {

struct EpisodeResult {
  std::vector<std::vector<Transition>> per_agent;  // [agent][tick]
  double mean_agent_reward = 0.0;
};

// Runs one episode of the scenario under masked action selection. When
// `sample` is false the policy acts greedily and no transitions are stored.
EpisodeResult run_episode(Scenario& scen, const PolicyParams& params, const RewardWeights& w,
                          const Hyperparams& hp, Rng* sample_rng, bool record) {
  const int n = scen.corridor.size();
  const int ticks = static_cast<int>(scen.cfg.horizon_s / scen.cfg.sensor_interval_s);
  EpisodeResult result;
  result.per_agent.resize(static_cast<std::size_t>(n));

  Mlp::Workspace ws;
  double total_reward = 0.0;

  for (int k = 1; k <= ticks; ++k) {
    const double t = scen.cfg.start_time_s + k * scen.cfg.sensor_interval_s;
    scen.sim->run_until(t);
    const auto ms = scen.readout_all(t);

    std::vector<Observation> obs(static_cast<std::size_t>(n));
    std::vector<int> actions(static_cast<std::size_t>(n));
    std::vector<double> logps(static_cast<std::size_t>(n));
    std::vector<std::array<bool, kNumActions>> masks(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const int down = i == 0 ? scen.corridor.default_max() : actions[u - 1];
      const auto& own = ms[static_cast<std::size_t>(scen.corridor.critical_sensor(i))];
      const auto& up = ms[static_cast<std::size_t>(scen.corridor.upstream_sensor(i))];
      obs[u] = build_observation(down, own, up);
      masks[u] = valid_action_mask(down, hp.a_diff);
      const auto arr = obs[u].as_array();
      params.actor.forward(std::span<const double>(arr.data(), arr.size()), ws);
      const auto dist = MaskedDistribution::from_logits(ws.act.back(), masks[u]);
      const int idx = sample_rng != nullptr ? dist.sample(*sample_rng) : dist.greedy();
      actions[u] = kSpeedGrid[static_cast<std::size_t>(idx)];
      logps[u] = dist.log_prob(idx);
    }

    std::vector<double> global;
    global.reserve(static_cast<std::size_t>(5 * n));
    for (const auto& o : obs) {
      const auto arr = o.as_array();
      global.insert(global.end(), arr.begin(), arr.end());
    }
    double value = 0.0;
    if (record) {
      value = params.critic.forward(global)[0];
    }

    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const auto& own = ms[static_cast<std::size_t>(scen.corridor.critical_sensor(i))];
      const int down = i == 0 ? scen.corridor.default_max() : actions[u - 1];
      const double r = reward({actions[u], down, own.speed, own.occupancy}, w, hp.occ_threshold);
      total_reward += r;
      if (record) {
        Transition tr;
        tr.obs = obs[u].as_array();
        tr.global_state = global;
        tr.action_index = grid_index(actions[u]);
        tr.log_prob = logps[u];
        tr.reward = r;
        tr.value = value;
        tr.done = k == ticks;
        tr.mask = masks[u];
        result.per_agent[u].push_back(std::move(tr));
      }
    }
    scen.apply_speed_limits(actions);
  }
  result.mean_agent_reward = n > 0 && ticks > 0 ? total_reward / n : 0.0;
  return result;
}

}  // namespace

ScenarioFactory training_scenario_factory(const Hyperparams& hp) {
  const double jitter = hp.episode_demand_jitter;
  return [jitter](std::uint64_t episode_seed) {
    ScenarioOptions opt;
    opt.seed = episode_seed;
    opt.demand_jitter = jitter;
    return build_training_scenario(opt);
  };
}

TrainResult train(const ScenarioFactory& factory, const Hyperparams& hp, const RewardWeights& w,
                  const std::optional<std::filesystem::path>& checkpoint_dir,
                  const std::function<void(const IterationStats&)>& on_iteration) {
  Scenario probe = factory(sub_seed(hp.seed, "train.probe"));
  const int n_agents = probe.corridor.size();

  TrainResult result;
  result.params = PolicyParams::init(hp.seed, n_agents);
  Adam actor_opt(result.params.actor.param_count(), hp.actor_lr);
  Adam critic_opt(result.params.critic.param_count(), hp.critic_lr);
  Rng update_rng(sub_seed(hp.seed, "train.update"));
  Rng sample_rng(sub_seed(hp.seed, "train.sample"));

  for (int iter = 0; iter < hp.iterations; ++iter) {
    std::vector<Transition> batch;
    double reward_sum = 0.0;
    for (int ep = 0; ep < hp.episodes_per_iter; ++ep) {
      const std::uint64_t ep_seed =
          sub_seed(hp.seed, "train.episode",
                   static_cast<std::uint64_t>(iter) * 1000 + static_cast<std::uint64_t>(ep));
      Scenario scen = factory(ep_seed);
      auto episode = run_episode(scen, result.params, w, hp, &sample_rng, /*record=*/true);
      reward_sum += episode.mean_agent_reward;
      for (auto& traj : episode.per_agent) {
        compute_gae(traj, hp.gamma, hp.gae_lambda);
        for (auto& t : traj) batch.push_back(std::move(t));
      }
    }
    const auto diag = mappo_update(batch, result.params, hp, actor_opt, critic_opt, update_rng);

    IterationStats stats;
    stats.iteration = iter + 1;
    stats.mean_episode_reward = reward_sum / std::max(1, hp.episodes_per_iter);
    stats.actor_loss = diag.actor_loss;
    stats.critic_loss = diag.critic_loss;
    stats.approx_kl = diag.approx_kl;
    stats.clip_fraction = diag.clip_fraction;
    result.curve.push_back(stats);
    if (on_iteration) on_iteration(stats);
    if (checkpoint_dir && (iter + 1) % 10 == 0) {
      result.params.save(*checkpoint_dir /
                         ("checkpoint-iter" + std::to_string(iter + 1) + ".json"));
    }
  }
  if (checkpoint_dir) {
    result.params.save(*checkpoint_dir / "checkpoint.json");
  }
  return result;
}

std::vector<double> evaluate(const ScenarioFactory& factory, const PolicyParams& params,
                             const RewardWeights& w, int episodes, std::uint64_t seed_base,
                             const Hyperparams& hp) {
  std::vector<double> rewards;
  rewards.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    Scenario scen = factory(sub_seed(seed_base, "eval.episode", static_cast<std::uint64_t>(ep)));
    auto episode = run_episode(scen, params, w, hp, nullptr, /*record=*/false);
    rewards.push_back(episode.mean_agent_reward);
  }
  return rewards;
}

}  // namespace vsl::marl
