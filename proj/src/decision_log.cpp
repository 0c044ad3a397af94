#include "xfolio/decision_log.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace xfolio::decisions {
namespace {

using nlohmann::json;

std::string default_meta_path(const std::string& path) {
  std::filesystem::path p(path);
  return (p.parent_path() / "meta.json").string();
}

}  // namespace

std::pair<DecisionLog, BacktestSummary> run_trading(
    envsim::PortfolioEnv& env, const policy::PolicyNet& net,
    const std::optional<envsim::Action>& forced_action) {
  DecisionLog log;
  log.feature_names = env.features().feature_names;
  log.tickers = env.features().tickers;

  BacktestSummary summary;
  double peak = 1.0;

  envsim::State s = env.reset();
  while (!env.done()) {
    const Date date = env.current_date();
    const policy::PolicyOutput out = net.forward(s.features);
    const envsim::Action action =
        forced_action ? *forced_action : out.mean_weights;

    DecisionRecord rec;
    rec.date = date;
    rec.state = s.features;
    rec.action = action;
    rec.value = out.value;
    log.records.push_back(std::move(rec));

    envsim::StepResult r = env.step(action);
    summary.rewards.push_back(r.reward);
    summary.dates.push_back(date);
    summary.total_log_return += r.reward;
    peak = std::max(peak, r.portfolio_value);
    summary.max_drawdown =
        std::max(summary.max_drawdown, 1.0 - r.portfolio_value / peak);
    s = std::move(r.next_state);
  }
  summary.final_value = env.portfolio_value();
  return {std::move(log), std::move(summary)};
}

void export_jsonl(const DecisionLog& log, const std::string& path,
                  const std::string& meta_path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("export_jsonl: cannot open " + path);
  for (const DecisionRecord& rec : log.records) {
    json obj;
    obj["date"] = rec.date.to_string();
    obj["state"] = rec.state;
    obj["action"] = rec.action;
    obj["value"] = rec.value;
    f << obj.dump() << '\n';
  }

  json meta;
  meta["feature_names"] = log.feature_names;
  meta["tickers"] = log.tickers;
  const std::string mp = meta_path.empty() ? default_meta_path(path)
                                           : meta_path;
  std::ofstream mf(mp, std::ios::trunc);
  if (!mf) throw std::runtime_error("export_jsonl: cannot open " + mp);
  mf << meta.dump(2) << '\n';
}

DecisionLog import_jsonl(const std::string& path,
                         const std::string& meta_path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("import_jsonl: cannot open " + path);

  DecisionLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaViolation(line_no, e.what());
    }
    if (!obj.is_object() || !obj.contains("date") || !obj.contains("state") ||
        !obj.contains("action") || !obj.contains("value")) {
      throw SchemaViolation(line_no,
                            "expected keys date, state, action, value");
    }
    DecisionRecord rec;
    try {
      rec.date = Date::parse(obj["date"].get<std::string>());
      rec.state = obj["state"].get<std::vector<double>>();
      rec.action = obj["action"].get<std::vector<double>>();
      rec.value = obj["value"].get<double>();
    } catch (const std::exception& e) {
      throw SchemaViolation(line_no, e.what());
    }
    if (!log.records.empty() && !(log.records.back().date < rec.date)) {
      throw SchemaViolation(line_no, "dates not strictly increasing");
    }
    log.records.push_back(std::move(rec));
  }

  const std::string mp = meta_path.empty() ? default_meta_path(path)
                                           : meta_path;
  if (std::filesystem::exists(mp)) {
    std::ifstream mf(mp);
    json meta = json::parse(mf, nullptr, /*allow_exceptions=*/true);
    log.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    log.tickers = meta.at("tickers").get<std::vector<std::string>>();
  } else if (!log.records.empty()) {
    throw SchemaViolation(0, "missing sidecar " + mp);
  }

  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (log.records[i].state.size() != log.dim() ||
        log.records[i].action.size() != log.tickers.size() + 1) {
      throw SchemaViolation(i + 1, "record shape does not match meta");
    }
  }
  return log;
}

}  // namespace xfolio::decisions
