#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xfolio/date.hpp"
#include "xfolio/explain.hpp"
#include "xfolio/market_data.hpp"
#include "xfolio/portfolio_env.hpp"
#include "xfolio/ppo.hpp"

namespace xfolio::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Engine-wide run configuration, loaded from one JSON file with optional
// dotted-path overrides. The root seed feeds every derived stream (net
// init, training, background sampling, explainers).
struct RunConfig {
  std::string data_dir;
  std::vector<std::string> tickers;
  DateRange train_range;
  DateRange trade_range;
  market::FillPolicy fill = market::FillPolicy::forward_fill;
  envsim::EnvConfig env;
  std::vector<std::size_t> hidden = {64, 64};
  ppo::PPOConfig ppo;

  std::vector<std::size_t> explain_outputs;      // empty = all
  std::vector<std::string> explain_instances;    // ISO dates
  bool explain_all_instances = false;
  std::size_t background_size = 100;
  std::size_t shap_samples = 2048;
  bool shap_all = false;
  explain::LimeConfig lime;
  std::size_t importance_repeats = 10;

  std::string output_dir;
  std::uint64_t seed = 0;
  bool log_training = false;
  bool force_cash = false;
};

// Loads the file, applies the XFOLIO_SEED env var (if set), then each
// "key.path=value" override in order (overrides win).
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides);

}  // namespace xfolio::cli
