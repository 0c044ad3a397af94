#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "xfolio/policy_net.hpp"
#include "xfolio/portfolio_env.hpp"
#include "xfolio/rng.hpp"

namespace xfolio::ppo {

struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  std::size_t epochs_per_update = 10;
  std::size_t minibatch_size = 64;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  std::size_t n_updates = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Trajectory {
  std::vector<std::vector<double>> states;
  std::vector<envsim::Action> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs_old;
  std::vector<double> values_old;

  std::size_t length() const { return rewards.size(); }
};

struct TrainStats {
  std::size_t update = 0;
  double mean_reward = 0.0;
  double surrogate_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Discounted suffix sums: R_t = r_t + gamma * R_{t+1}, R_K = 0.
std::vector<double> compute_returns(std::span<const double> rewards,
                                    double gamma);

// Generalized advantage estimation over TD residuals. values must have
// length K+1 (terminal bootstrap included). When normalize is set the
// advantages are shifted/scaled to zero mean and unit variance, skipped for
// K < 2 or vanishing variance.
std::vector<double> compute_gae(std::span<const double> rewards,
                                std::span<const double> values, double gamma,
                                double lambda, bool normalize = true);

// First-order adaptive optimizer state; one instance per training run.
class Adam {
 public:
  Adam(std::size_t n_params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

// Flattened per-sample training data for one update: normalized advantages
// and discounted-return targets computed from the trajectories.
struct SampleBatch {
  std::vector<std::vector<double>> states;
  std::vector<envsim::Action> actions;
  std::vector<double> log_probs_old;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return log_probs_old.size(); }
};

SampleBatch flatten_trajectories(std::span<const Trajectory> trajectories,
                                 const PPOConfig& config);

struct BatchEval {
  double surrogate = 0.0;   // -mean(min(rho*A, clip(rho)*A))
  double value_loss = 0.0;  // mean((v - R)^2), without value_coef
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;   // mean((rho - 1) - log rho), >= 0
};

BatchEval evaluate_batch(const policy::PolicyNet& net, const SampleBatch& batch,
                         const PPOConfig& config);

// One clipped-surrogate update: epochs_per_update passes of shuffled
// minibatches, each taking an Adam step on the combined policy/value
// (/entropy) loss. Throws NonFiniteLoss if any minibatch produces a
// non-finite loss term.
TrainStats ppo_update(policy::PolicyNet& net, Adam& optimizer,
                      std::span<const Trajectory> trajectories,
                      const PPOConfig& config, Rng& rng);

// One full episode under the stochastic policy, recording states, sampled
// actions, rewards, action log-probabilities and value estimates.
Trajectory collect_rollout(envsim::PortfolioEnv& env,
                           const policy::PolicyNet& net, Rng& rng);

// n_updates iterations of rollout + update on the given environment.
// Deterministic in config.seed.
std::pair<policy::PolicyNet, std::vector<TrainStats>> train(
    envsim::PortfolioEnv& env, policy::PolicyNet net, const PPOConfig& config);

// Monte-Carlo action value: force `action` at step state_index of a fresh
// environment, then follow the stochastic policy, discounting by gamma.
double estimate_q(const std::function<envsim::PortfolioEnv()>& env_factory,
                  const policy::PolicyNet& net, std::size_t state_index,
                  const envsim::Action& action, double gamma,
                  std::size_t n_rollouts, Rng& rng);

}  // namespace xfolio::ppo
