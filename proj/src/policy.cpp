#include "vsl/policy.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace vsl::marl {

MaskedDistribution MaskedDistribution::from_logits(std::span<const double> logits,
                                                   const std::array<bool, kNumActions>& valid) {
  if (logits.size() != kNumActions) throw std::invalid_argument("expected 5 logits");
  MaskedDistribution d;
  d.valid = valid;
  double max_logit = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int i = 0; i < kNumActions; ++i) {
    d.logits[static_cast<std::size_t>(i)] = logits[static_cast<std::size_t>(i)];
    if (valid[static_cast<std::size_t>(i)]) {
      any = true;
      max_logit = std::max(max_logit, logits[static_cast<std::size_t>(i)]);
    }
  }
  if (!any) throw std::invalid_argument("action mask is empty");
  double z = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    if (valid[static_cast<std::size_t>(i)]) {
      z += std::exp(logits[static_cast<std::size_t>(i)] - max_logit);
    }
  }
  d.log_z = max_logit + std::log(z);
  for (int i = 0; i < kNumActions; ++i) {
    d.probs[static_cast<std::size_t>(i)] =
        valid[static_cast<std::size_t>(i)]
            ? std::exp(logits[static_cast<std::size_t>(i)] - d.log_z)
            : 0.0;
  }
  return d;
}

int MaskedDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  int last_valid = 0;
  for (int i = 0; i < kNumActions; ++i) {
    if (!valid[static_cast<std::size_t>(i)]) continue;
    last_valid = i;
    acc += probs[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  return last_valid;  // u landed in accumulated rounding slack
}

int MaskedDistribution::greedy() const {
  int best = -1;
  double best_p = -1.0;
  for (int i = 0; i < kNumActions; ++i) {
    if (!valid[static_cast<std::size_t>(i)]) continue;
    if (probs[static_cast<std::size_t>(i)] > best_p) {  // strict: ties keep the lower limit
      best_p = probs[static_cast<std::size_t>(i)];
      best = i;
    }
  }
  return best;
}

double MaskedDistribution::log_prob(int index) const {
  if (index < 0 || index >= kNumActions || !valid[static_cast<std::size_t>(index)]) {
    throw std::invalid_argument("log_prob of a masked action");
  }
  return logits[static_cast<std::size_t>(index)] - log_z;
}

double MaskedDistribution::entropy() const {
  double h = 0.0;
  for (int i = 0; i < kNumActions; ++i) {
    const double p = probs[static_cast<std::size_t>(i)];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

PolicyParams PolicyParams::init(std::uint64_t seed, int n_agents, const std::vector<int>& hidden) {
  PolicyParams p;
  p.n_agents = n_agents;
  std::vector<int> actor_sizes{5};
  actor_sizes.insert(actor_sizes.end(), hidden.begin(), hidden.end());
  actor_sizes.push_back(kNumActions);
  std::vector<int> critic_sizes{5 * n_agents};
  critic_sizes.insert(critic_sizes.end(), hidden.begin(), hidden.end());
  critic_sizes.push_back(1);
  p.actor = Mlp(actor_sizes, sub_seed(seed, "policy.actor"));
  p.critic = Mlp(critic_sizes, sub_seed(seed, "policy.critic"));
  return p;
}

void PolicyParams::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["format_version"] = format_version;
  j["n_agents"] = n_agents;
  j["actor"] = {{"sizes", actor.sizes()}, {"weights", actor.params()}};
  j["critic"] = {{"sizes", critic.sizes()}, {"weights", critic.params()}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

PolicyParams PolicyParams::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
  nlohmann::json j;
  in >> j;
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw std::runtime_error("unsupported checkpoint format version");
  }
  PolicyParams p;
  p.format_version = j["format_version"].get<int>();
  p.n_agents = j.value("n_agents", 8);
  p.actor = Mlp(j["actor"]["sizes"].get<std::vector<int>>(),
                j["actor"]["weights"].get<std::vector<double>>());
  p.critic = Mlp(j["critic"]["sizes"].get<std::vector<int>>(),
                 j["critic"]["weights"].get<std::vector<double>>());
  if (p.actor.input_size() != 5 || p.actor.output_size() != kNumActions) {
    throw std::runtime_error("checkpoint actor has unexpected shape");
  }
  return p;
}

PolicyFn make_greedy_policy(Mlp actor) {
  return [actor = std::move(actor)](const Observation& obs,
                                    const std::array<bool, kNumActions>& mask) {
    const auto arr = obs.as_array();
    const auto logits = actor.forward(std::span<const double>(arr.data(), arr.size()));
    const auto dist = MaskedDistribution::from_logits(logits, mask);
    return kSpeedGrid[static_cast<std::size_t>(dist.greedy())];
  };
}

PolicyFn make_greedy_policy(const PolicyParams& params) {
  return make_greedy_policy(params.actor);
}

PolicyFn make_sampling_policy(const PolicyParams& params, Rng* rng) {
  return [actor = params.actor, rng](const Observation& obs,
                                     const std::array<bool, kNumActions>& mask) {
    const auto arr = obs.as_array();
    const auto logits = actor.forward(std::span<const double>(arr.data(), arr.size()));
    const auto dist = MaskedDistribution::from_logits(logits, mask);
    return kSpeedGrid[static_cast<std::size_t>(dist.sample(*rng))];
  };
}

Mlp make_biased_actor(int preferred_mph) {
  // Single linear layer, zero weights, a large bias on the preferred action.
  std::vector<double> params(static_cast<std::size_t>(kNumActions) * 5 + kNumActions, 0.0);
  params[static_cast<std::size_t>(kNumActions) * 5 +
         static_cast<std::size_t>(grid_index(preferred_mph))] = 10.0;
  return Mlp({5, kNumActions}, std::move(params));
}

}  // namespace vsl::marl
