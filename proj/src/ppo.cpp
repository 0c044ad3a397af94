#include "xfolio/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xfolio/kernels.hpp"

namespace xfolio::ppo {

void PPOConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("PPOConfig: gamma outside [0,1]");
  }
  if (gae_lambda < 0.0 || gae_lambda > 1.0) {
    throw std::invalid_argument("PPOConfig: gae_lambda outside [0,1]");
  }
  if (clip_epsilon <= 0.0) {
    throw std::invalid_argument("PPOConfig: clip_epsilon must be > 0");
  }
  if (minibatch_size == 0) {
    throw std::invalid_argument("PPOConfig: minibatch_size must be > 0");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("PPOConfig: learning_rate must be > 0");
  }
}

std::vector<double> compute_returns(std::span<const double> rewards,
                                    double gamma) {
  std::vector<double> returns(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    returns[i] = acc;
  }
  return returns;
}

std::vector<double> compute_gae(std::span<const double> rewards,
                                std::span<const double> values, double gamma,
                                double lambda, bool normalize) {
  const std::size_t k = rewards.size();
  if (values.size() != k + 1) {
    throw LengthMismatch("compute_gae: values must have length K+1 (" +
                         std::to_string(k + 1) + "), got " +
                         std::to_string(values.size()));
  }
  std::vector<double> adv(k, 0.0);
  double acc = 0.0;
  for (std::size_t i = k; i-- > 0;) {
    const double delta = rewards[i] + gamma * values[i + 1] - values[i];
    acc = delta + gamma * lambda * acc;
    adv[i] = acc;
  }
  if (normalize && k >= 2) {
    const double mean = kernels::sum(adv.data(), k) / static_cast<double>(k);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(k);
    if (var >= 1e-12) {
      const double inv_std = 1.0 / std::sqrt(var);
      for (double& a : adv) a = (a - mean) * inv_std;
    }
  }
  return adv;
}

Adam::Adam(std::size_t n_params, double lr, double beta1, double beta2,
           double eps)
    : m_(n_params, 0.0), v_(n_params, 0.0), lr_(lr), beta1_(beta1),
      beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw LengthMismatch("Adam::step: size mismatch");
  }
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  kernels::adam_step(params.data(), grad.data(), m_.data(), v_.data(),
                     params.size(), lr_, beta1_, beta2_, eps_, bias1, bias2);
}

SampleBatch flatten_trajectories(std::span<const Trajectory> trajectories,
                                 const PPOConfig& config) {
  SampleBatch batch;
  std::vector<double> raw_adv;
  for (const Trajectory& traj : trajectories) {
    const std::size_t k = traj.length();
    if (traj.states.size() != k || traj.actions.size() != k ||
        traj.log_probs_old.size() != k || traj.values_old.size() != k) {
      throw LengthMismatch("flatten_trajectories: ragged trajectory");
    }
    std::vector<double> values(traj.values_old.begin(),
                               traj.values_old.end());
    values.push_back(0.0);  // terminal bootstrap
    const auto adv = compute_gae(traj.rewards, values, config.gamma,
                                 config.gae_lambda, /*normalize=*/false);
    const auto ret = compute_returns(traj.rewards, config.gamma);
    raw_adv.insert(raw_adv.end(), adv.begin(), adv.end());
    batch.returns.insert(batch.returns.end(), ret.begin(), ret.end());
    batch.states.insert(batch.states.end(), traj.states.begin(),
                        traj.states.end());
    batch.actions.insert(batch.actions.end(), traj.actions.begin(),
                         traj.actions.end());
    batch.log_probs_old.insert(batch.log_probs_old.end(),
                               traj.log_probs_old.begin(),
                               traj.log_probs_old.end());
  }

  // Normalize advantages jointly across the update's samples.
  const std::size_t n = raw_adv.size();
  if (n >= 2) {
    const double mean = kernels::sum(raw_adv.data(), n) /
                        static_cast<double>(n);
    double var = 0.0;
    for (double a : raw_adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    if (var >= 1e-12) {
      const double inv_std = 1.0 / std::sqrt(var);
      for (double& a : raw_adv) a = (a - mean) * inv_std;
    }
  }
  batch.advantages = std::move(raw_adv);
  return batch;
}

namespace {

struct SampleTerms {
  double ratio = 1.0;
  double pg_loss = 0.0;        // -min(rho*A, clip(rho)*A)
  double value_err = 0.0;      // v - R
  double entropy = 0.0;
  bool clipped = false;
  // d pg_loss / d log_prob_new; zero when the clipped branch is active.
  double dpg_dlp = 0.0;
  policy::PolicyOutput out;
};

SampleTerms eval_sample(const policy::PolicyNet& net,
                        const std::vector<double>& state,
                        const envsim::Action& action, double lp_old,
                        double advantage, double ret,
                        const PPOConfig& config) {
  SampleTerms t;
  t.out = net.forward(state);
  const double lp_new = policy::dirichlet_log_density(t.out.alpha, action);
  t.ratio = std::exp(lp_new - lp_old);
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;
  const double unclipped = t.ratio * advantage;
  const double clipped = std::clamp(t.ratio, lo, hi) * advantage;
  t.pg_loss = -std::min(unclipped, clipped);
  t.dpg_dlp = (unclipped <= clipped) ? -unclipped : 0.0;
  t.clipped = t.ratio < lo || t.ratio > hi;
  t.value_err = t.out.value - ret;
  if (config.entropy_coef != 0.0) {
    t.entropy = policy::dirichlet_entropy(t.out.alpha);
  }
  return t;
}

}  // namespace

BatchEval evaluate_batch(const policy::PolicyNet& net, const SampleBatch& batch,
                         const PPOConfig& config) {
  BatchEval ev;
  const std::size_t n = batch.size();
  if (n == 0) return ev;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SampleTerms t =
        eval_sample(net, batch.states[i], batch.actions[i],
                    batch.log_probs_old[i], batch.advantages[i],
                    batch.returns[i], config);
    ev.surrogate += t.pg_loss;
    ev.value_loss += t.value_err * t.value_err;
    ev.entropy += policy::dirichlet_entropy(t.out.alpha);
    ev.approx_kl += (t.ratio - 1.0) - std::log(t.ratio);
    if (t.clipped) ++clipped;
  }
  const double inv = 1.0 / static_cast<double>(n);
  ev.surrogate *= inv;
  ev.value_loss *= inv;
  ev.entropy *= inv;
  ev.approx_kl *= inv;
  ev.clip_fraction = static_cast<double>(clipped) * inv;
  return ev;
}

TrainStats ppo_update(policy::PolicyNet& net, Adam& optimizer,
                      std::span<const Trajectory> trajectories,
                      const PPOConfig& config, Rng& rng) {
  config.validate();
  SampleBatch batch = flatten_trajectories(trajectories, config);
  const std::size_t n = batch.size();
  if (n == 0) throw LengthMismatch("ppo_update: empty batch");

  const std::size_t k_out = net.config().n_outputs;
  TrainStats stats;
  double reward_sum = 0.0;
  std::size_t reward_count = 0;
  for (const Trajectory& traj : trajectories) {
    reward_sum += kernels::sum(traj.rewards.data(), traj.rewards.size());
    reward_count += traj.length();
  }
  stats.mean_reward = reward_count ? reward_sum / reward_count : 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  double surrogate_acc = 0.0, value_acc = 0.0, clip_acc = 0.0;
  std::size_t minibatches = 0;

  std::vector<double> grad(net.param_count());
  std::vector<double> upstream(k_out + 1);
  std::vector<double> dlp_dalpha(k_out);
  std::vector<double> dent_dalpha(k_out);

  for (std::size_t epoch = 0; epoch < config.epochs_per_update; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += config.minibatch_size) {
      const std::size_t stop = std::min(n, start + config.minibatch_size);
      const double inv_mb = 1.0 / static_cast<double>(stop - start);

      std::fill(grad.begin(), grad.end(), 0.0);
      double mb_pg = 0.0, mb_value = 0.0, mb_entropy = 0.0;
      std::size_t mb_clipped = 0;

      for (std::size_t idx = start; idx < stop; ++idx) {
        const std::size_t i = order[idx];
        const SampleTerms t =
            eval_sample(net, batch.states[i], batch.actions[i],
                        batch.log_probs_old[i], batch.advantages[i],
                        batch.returns[i], config);
        mb_pg += t.pg_loss;
        mb_value += t.value_err * t.value_err;
        mb_entropy += t.entropy;
        if (t.clipped) ++mb_clipped;

        policy::dirichlet_log_density_grad_alpha(t.out.alpha,
                                                 batch.actions[i], dlp_dalpha);
        if (config.entropy_coef != 0.0) {
          policy::dirichlet_entropy_grad_alpha(t.out.alpha, dent_dalpha);
        }
        for (std::size_t j = 0; j < k_out; ++j) {
          double d = t.dpg_dlp * dlp_dalpha[j];
          if (config.entropy_coef != 0.0) {
            d -= config.entropy_coef * dent_dalpha[j];
          }
          upstream[j] = d * inv_mb;
        }
        upstream[k_out] =
            2.0 * config.value_coef * t.value_err * inv_mb;

        const std::vector<double> g = net.backward(batch.states[i], upstream);
        kernels::axpy(1.0, g.data(), grad.data(), grad.size());
      }

      const double mb_loss = mb_pg * inv_mb +
                             config.value_coef * mb_value * inv_mb -
                             config.entropy_coef * mb_entropy * inv_mb;
      if (!std::isfinite(mb_loss)) {
        throw NonFiniteLoss("ppo_update: non-finite loss in epoch " +
                            std::to_string(epoch) + ", minibatch at sample " +
                            std::to_string(start));
      }

      surrogate_acc += mb_pg * inv_mb;
      value_acc += mb_value * inv_mb;
      clip_acc += static_cast<double>(mb_clipped) * inv_mb;
      ++minibatches;

      optimizer.step(net.params_mut(), grad);
    }
  }

  if (minibatches > 0) {
    stats.surrogate_loss = surrogate_acc / static_cast<double>(minibatches);
    stats.value_loss = value_acc / static_cast<double>(minibatches);
    stats.clip_fraction = clip_acc / static_cast<double>(minibatches);
  } else {
    const BatchEval ev = evaluate_batch(net, batch, config);
    stats.surrogate_loss = ev.surrogate;
    stats.value_loss = ev.value_loss;
    stats.clip_fraction = ev.clip_fraction;
  }
  stats.approx_kl = evaluate_batch(net, batch, config).approx_kl;
  return stats;
}

Trajectory collect_rollout(envsim::PortfolioEnv& env,
                           const policy::PolicyNet& net, Rng& rng) {
  Trajectory traj;
  envsim::State s = env.reset();
  while (!env.done()) {
    const policy::PolicyOutput out = net.forward(s.features);
    envsim::Action action = policy::sample_dirichlet(out.alpha, rng);
    traj.states.push_back(s.features);
    traj.log_probs_old.push_back(
        policy::dirichlet_log_density(out.alpha, action));
    traj.values_old.push_back(out.value);
    envsim::StepResult r = env.step(action);
    traj.rewards.push_back(r.reward);
    traj.actions.push_back(std::move(action));
    s = std::move(r.next_state);
  }
  return traj;
}

std::pair<policy::PolicyNet, std::vector<TrainStats>> train(
    envsim::PortfolioEnv& env, policy::PolicyNet net, const PPOConfig& config) {
  config.validate();
  Adam optimizer(net.param_count(), config.learning_rate);
  std::vector<TrainStats> history;
  history.reserve(config.n_updates);

  for (std::size_t u = 0; u < config.n_updates; ++u) {
    Rng rollout_rng(derive_seed(config.seed, "ppo.rollout", u));
    Rng update_rng(derive_seed(config.seed, "ppo.update", u));
    Trajectory traj = collect_rollout(env, net, rollout_rng);
    const Trajectory trajs[1] = {std::move(traj)};
    TrainStats stats = ppo_update(net, optimizer, trajs, config, update_rng);
    stats.update = u;
    history.push_back(stats);
  }
  return {std::move(net), std::move(history)};
}

double estimate_q(const std::function<envsim::PortfolioEnv()>& env_factory,
                  const policy::PolicyNet& net, std::size_t state_index,
                  const envsim::Action& action, double gamma,
                  std::size_t n_rollouts, Rng& rng) {
  if (n_rollouts == 0) {
    throw std::invalid_argument("estimate_q: n_rollouts must be > 0");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < n_rollouts; ++r) {
    envsim::PortfolioEnv env = env_factory();
    envsim::State s = env.seek(state_index);
    double ret = 0.0;
    double discount = 1.0;
    envsim::StepResult first = env.step(action);
    ret += first.reward;
    s = std::move(first.next_state);
    while (!env.done()) {
      discount *= gamma;
      auto [a, lp] = net.sample_action(s.features, rng);
      (void)lp;
      envsim::StepResult sr = env.step(a);
      ret += discount * sr.reward;
      s = std::move(sr.next_state);
    }
    total += ret;
  }
  return total / static_cast<double>(n_rollouts);
}

}  // namespace xfolio::ppo
