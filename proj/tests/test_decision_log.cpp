#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xfolio/decision_log.hpp"

using namespace xfolio;
using namespace xfolio::decisions;

namespace {

policy::NetConfig net_config(std::size_t d, std::size_t k,
                             std::uint64_t seed) {
  policy::NetConfig nc;
  nc.input_dim = d;
  nc.hidden = {16};
  nc.n_outputs = k;
  nc.seed = seed;
  return nc;
}

}  // namespace

TEST_CASE("run_trading records one decision per step") {
  market::FeatureMatrix fm = test::drift_market(10, 1.002, 0.998);
  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  policy::PolicyNet net(net_config(fm.dim(), 3, 5));
  const auto [log, summary] = run_trading(env, net);
  CHECK(log.size() == 9);
  CHECK(summary.rewards.size() == 9);
  CHECK(log.feature_names == fm.feature_names);
  CHECK(log.tickers == fm.tickers);
  for (std::size_t i = 0; i + 1 < log.size(); ++i) {
    CHECK(log.records[i].date < log.records[i + 1].date);
  }
}

TEST_CASE("zero net records uniform allocations") {
  market::FeatureMatrix fm = test::drift_market(6, 1.01, 0.99);
  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  policy::PolicyNet net(net_config(fm.dim(), 3, 5));
  std::fill(net.params_mut().begin(), net.params_mut().end(), 0.0);
  const auto [log, summary] = run_trading(env, net);
  for (const auto& rec : log.records) {
    for (double w : rec.action) {
      CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    CHECK(rec.value == 0.0);
  }
}

TEST_CASE("summary value reconciles with summed rewards") {
  market::FeatureMatrix fm = test::drift_market(25, 1.004, 0.996);
  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  policy::PolicyNet net(net_config(fm.dim(), 3, 6));
  const auto [log, summary] = run_trading(env, net);
  double total = 0.0;
  for (double r : summary.rewards) total += r;
  CHECK(summary.final_value ==
        doctest::Approx(std::exp(total)).epsilon(1e-9));
  CHECK(summary.total_log_return == doctest::Approx(total));
  CHECK(summary.max_drawdown >= 0.0);
  CHECK(summary.max_drawdown < 1.0);
}

TEST_CASE("forced action overrides the policy and is recorded") {
  market::FeatureMatrix fm = test::drift_market(8, 1.02, 0.98);
  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  policy::PolicyNet net(net_config(fm.dim(), 3, 7));
  const envsim::Action cash = envsim::all_cash_action(3);
  const auto [log, summary] = run_trading(env, net, cash);
  CHECK(summary.final_value == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& rec : log.records) CHECK(rec.action == cash);
}

TEST_CASE("rerunning the same net reproduces the log exactly") {
  market::FeatureMatrix fm = test::drift_market(12, 1.003, 0.997);
  policy::PolicyNet net(net_config(fm.dim(), 3, 8));
  envsim::PortfolioEnv env1(fm, envsim::EnvConfig{});
  envsim::PortfolioEnv env2(fm, envsim::EnvConfig{});
  const auto [log1, s1] = run_trading(env1, net);
  const auto [log2, s2] = run_trading(env2, net);
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1.records[i].date == log2.records[i].date);
    CHECK(log1.records[i].state == log2.records[i].state);
    CHECK(log1.records[i].action == log2.records[i].action);
    CHECK(log1.records[i].value == log2.records[i].value);
  }
}

TEST_CASE("every logged action replays through the net") {
  market::FeatureMatrix fm = test::drift_market(15, 1.005, 0.995);
  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  policy::PolicyNet net(net_config(fm.dim(), 3, 9));
  const auto [log, summary] = run_trading(env, net);
  for (const auto& rec : log.records) {
    const auto out = net.forward(rec.state);
    for (std::size_t i = 0; i < rec.action.size(); ++i) {
      CHECK(rec.action[i] == out.mean_weights[i]);
    }
    CHECK(rec.value == out.value);
  }
}

TEST_CASE("jsonl round-trip is lossless") {
  test::TempDir tmp("xfolio_log");
  market::FeatureMatrix fm = test::drift_market(14, 1.007, 0.993);
  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  policy::PolicyNet net(net_config(fm.dim(), 3, 10));
  const auto [log, summary] = run_trading(env, net);

  const std::string path = tmp.file("decisions.jsonl");
  export_jsonl(log, path);
  const DecisionLog loaded = import_jsonl(path);

  CHECK(loaded.feature_names == log.feature_names);
  CHECK(loaded.tickers == log.tickers);
  REQUIRE(loaded.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(loaded.records[i].date == log.records[i].date);
    CHECK(loaded.records[i].state == log.records[i].state);   // bit-exact
    CHECK(loaded.records[i].action == log.records[i].action);
    CHECK(loaded.records[i].value == log.records[i].value);
  }
}

TEST_CASE("schema violations carry the line number") {
  test::TempDir tmp("xfolio_badlog");
  const std::string path = tmp.file("decisions.jsonl");
  test::write_text(tmp.file("meta.json"),
                   "{\"feature_names\": [\"A_open_L1\"], \"tickers\": "
                   "[\"A\"]}\n");

  test::write_text(path,
                   "{\"date\": \"2020-01-02\", \"state\": [1.0], \"action\": "
                   "[0.5, 0.5], \"value\": 0.1}\n"
                   "{\"date\": \"2020-01-03\", \"state\": [1.0], \"value\": "
                   "0.2}\n");
  try {
    import_jsonl(path);
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.line == 2);
  }

  test::write_text(path, "not json at all\n");
  CHECK_THROWS_AS(import_jsonl(path), SchemaViolation);

  // Dates must increase strictly.
  test::write_text(path,
                   "{\"date\": \"2020-01-03\", \"state\": [1.0], \"action\": "
                   "[0.5, 0.5], \"value\": 0.1}\n"
                   "{\"date\": \"2020-01-02\", \"state\": [1.0], \"action\": "
                   "[0.5, 0.5], \"value\": 0.1}\n");
  CHECK_THROWS_AS(import_jsonl(path), SchemaViolation);
}

TEST_CASE("empty file imports as an empty log") {
  test::TempDir tmp("xfolio_emptylog");
  const std::string path = tmp.file("decisions.jsonl");
  test::write_text(path, "");
  const DecisionLog log = import_jsonl(path);
  CHECK(log.size() == 0);
}
