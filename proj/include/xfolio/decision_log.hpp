#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xfolio/date.hpp"
#include "xfolio/policy_net.hpp"
#include "xfolio/portfolio_env.hpp"

namespace xfolio::decisions {

struct SchemaViolation : std::runtime_error {
  std::size_t line;
  SchemaViolation(std::size_t line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
        line(line_no) {}
};

// One trading-time prediction: the deterministic allocation (mean weights)
// and value estimate recorded before execution.
struct DecisionRecord {
  Date date;
  std::vector<double> state;
  envsim::Action action;
  double value = 0.0;
};

struct DecisionLog {
  std::vector<DecisionRecord> records;  // date-ascending
  std::vector<std::string> feature_names;
  std::vector<std::string> tickers;

  std::size_t size() const { return records.size(); }
  std::size_t dim() const { return feature_names.size(); }
};

struct BacktestSummary {
  double final_value = 1.0;
  double total_log_return = 0.0;
  double max_drawdown = 0.0;
  std::vector<double> rewards;
  std::vector<Date> dates;
};

// Replays the deterministic policy over the environment's timeline,
// recording each decision before executing it. forced_action, when set,
// replaces the policy's allocation (the record reflects what ran).
std::pair<DecisionLog, BacktestSummary> run_trading(
    envsim::PortfolioEnv& env, const policy::PolicyNet& net,
    const std::optional<envsim::Action>& forced_action = std::nullopt);

// One JSON object per line: {"date": "...", "state": [...], "action":
// [...], "value": x}. Feature names and tickers go to a sidecar meta file
// (default: meta.json next to the log). Round-trips are lossless at double
// precision.
void export_jsonl(const DecisionLog& log, const std::string& path,
                  const std::string& meta_path = "");
DecisionLog import_jsonl(const std::string& path,
                         const std::string& meta_path = "");

}  // namespace xfolio::decisions
