#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "xfolio/market_data.hpp"

namespace xfolio::envsim {

struct InvalidAction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EpisodeFinished : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Portfolio weights over cash (index 0) and N assets; non-negative, sums
// to 1 within 1e-6 at the step boundary.
using Action = std::vector<double>;

Action all_cash_action(std::size_t n_weights);
Action uniform_action(std::size_t n_weights);

struct EnvConfig {
  double cost_rate = 0.0;  // proportional cost per unit one-sided turnover
  double cash_rate = 0.0;  // per-step risk-free log-return
};

struct State {
  std::vector<double> features;  // one feature row
  Action prev_weights;           // post-drift holdings entering this step
  std::size_t t = 0;
};

struct StepResult {
  State next_state;
  double reward = 0.0;           // log-return of portfolio value
  double portfolio_value = 1.0;
  bool done = false;
};

struct Episode {
  std::vector<std::vector<double>> states;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> portfolio_values;  // after each step
  double total_reward = 0.0;
  double final_value = 1.0;
};

// Daily-rebalance simulator over a feature timeline. One episode spans the
// whole matrix: steps 0..T'-2, each growing the portfolio by the next row's
// price relatives. Self-financing accounting: holdings drift with prices
// before the new allocation is applied, and a proportional cost on
// one-sided turnover is charged against the gross growth.
//
// Single-owner mutable state; independent copies may run concurrently.
class PortfolioEnv {
 public:
  PortfolioEnv(market::FeatureMatrix features, EnvConfig config);

  const market::FeatureMatrix& features() const { return fm_; }
  const EnvConfig& config() const { return config_; }
  std::size_t n_weights() const { return fm_.n_assets() + 1; }
  std::size_t n_steps() const { return fm_.n_rows() - 1; }
  bool done() const { return t_ + 1 >= fm_.n_rows(); }
  double portfolio_value() const { return pv_; }
  Date current_date() const { return fm_.dates[t_]; }
  std::size_t current_step() const { return t_; }

  State reset();
  // Restart at step t with all-cash holdings and unit value.
  State seek(std::size_t t);
  StepResult step(const Action& action);

 private:
  State snapshot() const;

  market::FeatureMatrix fm_;
  EnvConfig config_;
  std::size_t t_ = 0;
  Action prev_weights_;
  double pv_ = 1.0;
};

using Policy = std::function<Action(const State&)>;

Episode run_episode(PortfolioEnv& env, const Policy& policy);

}  // namespace xfolio::envsim
