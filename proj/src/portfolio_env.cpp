#include "xfolio/portfolio_env.hpp"

#include <cmath>

namespace xfolio::envsim {

Action all_cash_action(std::size_t n_weights) {
  Action a(n_weights, 0.0);
  a[0] = 1.0;
  return a;
}

Action uniform_action(std::size_t n_weights) {
  return Action(n_weights, 1.0 / static_cast<double>(n_weights));
}

PortfolioEnv::PortfolioEnv(market::FeatureMatrix features, EnvConfig config)
    : fm_(std::move(features)), config_(config) {
  if (fm_.n_rows() < 2) {
    throw std::invalid_argument(
        "PortfolioEnv: need at least 2 feature rows, got " +
        std::to_string(fm_.n_rows()));
  }
  if (config_.cost_rate < 0.0 || config_.cost_rate > 0.1) {
    throw std::invalid_argument("PortfolioEnv: cost_rate outside [0, 0.1]");
  }
  prev_weights_ = all_cash_action(n_weights());
}

State PortfolioEnv::snapshot() const {
  State s;
  const auto row = fm_.row(t_);
  s.features.assign(row.begin(), row.end());
  s.prev_weights = prev_weights_;
  s.t = t_;
  return s;
}

State PortfolioEnv::reset() { return seek(0); }

State PortfolioEnv::seek(std::size_t t) {
  if (t >= fm_.n_rows()) {
    throw std::invalid_argument("seek: step " + std::to_string(t) +
                                " out of range");
  }
  t_ = t;
  prev_weights_ = all_cash_action(n_weights());
  pv_ = 1.0;
  return snapshot();
}

StepResult PortfolioEnv::step(const Action& action) {
  if (done()) throw EpisodeFinished("step after terminal state");

  const std::size_t k = n_weights();
  if (action.size() != k) {
    throw InvalidAction("expected " + std::to_string(k) + " weights, got " +
                        std::to_string(action.size()));
  }
  double total = 0.0;
  for (double w : action) {
    if (w < -1e-6) throw InvalidAction("negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-6) {
    throw InvalidAction("weights sum to " + std::to_string(total));
  }

  // Exact simplex projection of the (already near-valid) request.
  Action w(action);
  double norm = 0.0;
  for (double& v : w) {
    v = std::max(v, 0.0);
    norm += v;
  }
  for (double& v : w) v /= norm;

  const double turnover_cost = config_.cost_rate;
  double turnover = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    turnover += std::fabs(w[i] - prev_weights_[i]);
  }
  turnover *= 0.5;

  const double cash_growth = std::exp(config_.cash_rate);
  double gross = w[0] * cash_growth;
  const std::size_t n = fm_.n_assets();
  for (std::size_t a = 0; a < n; ++a) {
    gross += w[a + 1] * fm_.relative(t_ + 1, a);
  }

  const double net = gross * (1.0 - turnover_cost * turnover);
  const double reward = std::log(net);
  pv_ *= net;

  // Holdings drift with prices before the next decision.
  prev_weights_[0] = w[0] * cash_growth / gross;
  for (std::size_t a = 0; a < n; ++a) {
    prev_weights_[a + 1] = w[a + 1] * fm_.relative(t_ + 1, a) / gross;
  }
  ++t_;

  StepResult result;
  result.next_state = snapshot();
  result.reward = reward;
  result.portfolio_value = pv_;
  result.done = done();
  return result;
}

Episode run_episode(PortfolioEnv& env, const Policy& policy) {
  Episode ep;
  State s = env.reset();
  while (!env.done()) {
    const Action a = policy(s);
    ep.states.push_back(s.features);
    ep.actions.push_back(a);
    StepResult r = env.step(a);
    ep.rewards.push_back(r.reward);
    ep.portfolio_values.push_back(r.portfolio_value);
    ep.total_reward += r.reward;
    s = std::move(r.next_state);
  }
  ep.final_value = env.portfolio_value();
  return ep;
}

}  // namespace xfolio::envsim
