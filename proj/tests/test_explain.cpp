#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "support.hpp"
#include "xfolio/explain.hpp"
#include "xfolio/linalg.hpp"
#include "xfolio/report.hpp"

using namespace xfolio;
using namespace xfolio::explain;

namespace {

Background make_background(Rng& rng, std::size_t rows, std::size_t dim,
                           double lo = 0.8, double hi = 1.2) {
  Background bg;
  bg.rows = rows;
  bg.dim = dim;
  bg.data.resize(rows * dim);
  for (double& v : bg.data) v = rng.uniform(lo, hi);
  return bg;
}

PredictFn linear_fn(std::vector<double> w, double b = 0.0) {
  return [w = std::move(w), b](std::span<const double> x) {
    double acc = b;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x[i];
    return acc;
  };
}

std::vector<double> random_weights(Rng& rng, std::size_t d, double scale) {
  std::vector<double> w(d);
  for (double& v : w) v = scale * (rng.uniform() * 2.0 - 1.0);
  return w;
}

}  // namespace

TEST_CASE("solve_dense flags singular systems") {
  CHECK_THROWS_AS(solve_dense({1.0, 2.0, 2.0, 4.0}, {1.0, 2.0}),
                  SingularMatrix);
  const auto x = solve_dense({2.0, 0.0, 0.0, 4.0}, {2.0, 8.0});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("permutation importance: ignored features score exactly zero") {
  Rng rng(1);
  const std::size_t rows = 50, dim = 4;
  std::vector<double> data(rows * dim);
  for (double& v : data) v = rng.uniform(-1.0, 1.0);

  const PredictFn f = linear_fn({1.0, 0.0, -2.0, 0.0});
  Rng perm_rng(2);
  const auto iv = permutation_importance(f, data, rows, dim, 5, perm_rng);
  CHECK(iv.importance[1] == 0.0);
  CHECK(iv.importance[3] == 0.0);
  CHECK(iv.importance[0] > 0.0);
  CHECK(iv.importance[2] > 0.0);
  CHECK(iv.n_repeats == 5);

  CHECK_THROWS_AS(
      permutation_importance(f, std::vector<double>(dim, 1.0), 1, dim, 5,
                             perm_rng),
      DegenerateData);
}

TEST_CASE("permutation importance: single dependence isolates one column") {
  Rng rng(3);
  const std::size_t rows = 30, dim = 5;
  std::vector<double> data(rows * dim);
  for (double& v : data) v = rng.uniform(0.0, 1.0);
  const PredictFn f = [](std::span<const double> x) { return x[2]; };
  Rng perm_rng(4);
  const auto iv = permutation_importance(f, data, rows, dim, 4, perm_rng);
  for (std::size_t j = 0; j < dim; ++j) {
    if (j == 2) {
      CHECK(iv.importance[j] > 0.0);
    } else {
      CHECK(iv.importance[j] == 0.0);
    }
  }
}

TEST_CASE("permutation importance ratio approaches the coefficient ratio") {
  // f = 3 x0 + x1 on standard-normal columns: mean |prediction change|
  // scales linearly with the coefficient, so the ratio tends to 3.
  Rng rng(5);
  const std::size_t rows = 4000, dim = 2;
  std::vector<double> data(rows * dim);
  for (double& v : data) v = rng.normal();
  const PredictFn f = linear_fn({3.0, 1.0});
  Rng perm_rng(6);
  const auto iv = permutation_importance(f, data, rows, dim, 8, perm_rng);
  const double ratio = iv.importance[0] / iv.importance[1];
  CHECK(ratio == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("aggregate importance groups by asset and indicator") {
  std::vector<std::string> names;
  for (const char* t : {"AAPL", "V", "BABA", "ADBE", "SNE"}) {
    for (int i = 0; i < market::kIndicators; ++i) {
      names.push_back(market::feature_name(t, i));
    }
  }
  ImportanceVector iv;
  iv.importance.assign(20, 0.5);

  auto by_asset = aggregate_importance(iv, names, GroupBy::asset);
  auto by_ind = aggregate_importance(iv, names, GroupBy::indicator);
  CHECK(by_asset.size() == 5);
  CHECK(by_ind.size() == 4);
  for (const auto& [name, v] : by_asset) CHECK(v == doctest::Approx(0.5));
  for (const auto& [name, v] : by_ind) CHECK(v == doctest::Approx(0.5));
  // Uniform values sort by name.
  CHECK(by_asset.front().first == "AAPL");

  // One spiked feature dominates both groupings.
  iv.importance.assign(20, 0.0);
  iv.importance[3] = 1.0;  // AAPL close
  by_asset = aggregate_importance(iv, names, GroupBy::asset);
  by_ind = aggregate_importance(iv, names, GroupBy::indicator);
  CHECK(by_asset.front().first == "AAPL");
  CHECK(by_asset.front().second == doctest::Approx(0.25));
  CHECK(by_ind.front().first == "close");
  CHECK(by_ind.front().second == doctest::Approx(0.2));

  const std::vector<std::string> bad = {"AAPL_close_L1", "garbage"};
  ImportanceVector small;
  small.importance = {1.0, 2.0};
  CHECK_THROWS_AS(aggregate_importance(small, bad, GroupBy::asset),
                  UnparsableName);
}

TEST_CASE("exact shapley: constant functions get zero attributions") {
  Rng rng(7);
  const auto bg = make_background(rng, 6, 5);
  const PredictFn f = [](std::span<const double>) { return 0.375; };
  const std::vector<double> x(5, 1.0);
  const auto sv = exact_shapley(f, x, bg);
  CHECK(sv.base_value == doctest::Approx(0.375));
  CHECK(sv.fx == doctest::Approx(0.375));
  for (double p : sv.phi) CHECK(p == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("exact shapley: linear closed form") {
  Rng rng(8);
  const std::size_t d = 7;
  const auto bg = make_background(rng, 9, d);
  const auto w = random_weights(rng, d, 2.0);
  const PredictFn f = linear_fn(w, 0.3);
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform(0.5, 1.5);

  const auto sv = exact_shapley(f, x, bg);
  for (std::size_t j = 0; j < d; ++j) {
    double mean_bj = 0.0;
    for (std::size_t r = 0; r < bg.rows; ++r) mean_bj += bg.row(r)[j];
    mean_bj /= static_cast<double>(bg.rows);
    CHECK(sv.phi[j] ==
          doctest::Approx(w[j] * (x[j] - mean_bj)).epsilon(1e-9));
  }
  double total = sv.base_value;
  for (double p : sv.phi) total += p;
  CHECK(std::fabs(total - sv.fx) < 1e-10);
}

TEST_CASE("exact shapley: exchangeable features share credit equally") {
  Rng rng(9);
  const std::size_t d = 6;
  Background bg = make_background(rng, 8, d);
  // Make features 1 and 4 indistinguishable in instance and background.
  for (std::size_t r = 0; r < bg.rows; ++r) {
    bg.data[r * d + 4] = bg.data[r * d + 1];
  }
  std::vector<double> x(d, 1.0);
  x[1] = x[4] = 1.37;
  const PredictFn f = [](std::span<const double> v) {
    return std::tanh(v[1] + v[4]) + 0.1 * v[0];
  };
  const auto sv = exact_shapley(f, x, bg);
  CHECK(sv.phi[1] == doctest::Approx(sv.phi[4]).epsilon(1e-12));
}

TEST_CASE("exact shapley is linear in the explained function") {
  Rng rng(10);
  const std::size_t d = 5;
  const auto bg = make_background(rng, 7, d);
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform(0.5, 1.5);

  const PredictFn g = [](std::span<const double> v) {
    return std::sin(v[0]) + v[1] * v[2];
  };
  const PredictFn h = [](std::span<const double> v) {
    return std::exp(0.3 * v[3]) - v[4];
  };
  const double a = 1.7, b = -0.6;
  const PredictFn combo = [&](std::span<const double> v) {
    return a * g(v) + b * h(v);
  };

  const auto sg = exact_shapley(g, x, bg);
  const auto sh = exact_shapley(h, x, bg);
  const auto sc = exact_shapley(combo, x, bg);
  for (std::size_t j = 0; j < d; ++j) {
    CHECK(sc.phi[j] ==
          doctest::Approx(a * sg.phi[j] + b * sh.phi[j]).epsilon(1e-10));
  }
}

TEST_CASE("exact shapley refuses wide inputs") {
  Rng rng(11);
  const std::size_t d = 16;
  const auto bg = make_background(rng, 3, d);
  const std::vector<double> x(d, 1.0);
  CHECK_THROWS_AS(exact_shapley(linear_fn(std::vector<double>(d, 1.0)), x, bg),
                  TooManyFeatures);
}

TEST_CASE("kernel shap with full enumeration matches the exact oracle") {
  Rng rng(12);
  const std::size_t d = 8;
  for (int trial = 0; trial < 5; ++trial) {
    policy::NetConfig nc;
    nc.input_dim = d;
    nc.hidden = {12};
    nc.n_outputs = 3;
    nc.seed = 700 + trial;
    policy::PolicyNet net(nc);
    const PredictFn f = make_weight_predictor(net, trial % 3);

    const auto bg = make_background(rng, 6, d);
    std::vector<double> x(d);
    for (double& v : x) v = rng.uniform(0.8, 1.2);

    const auto exact = exact_shapley(f, x, bg);
    Rng shap_rng(13);
    const auto kernel = kernel_shap(f, x, bg, kAllCoalitions, shap_rng);
    CHECK(kernel.method == "kernel");
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(std::fabs(kernel.phi[j] - exact.phi[j]) < 1e-6);
    }
    double total = kernel.base_value;
    for (double p : kernel.phi) total += p;
    CHECK(std::fabs(total - kernel.fx) < 1e-10);
  }
}

TEST_CASE("sampled kernel shap recovers linear attributions exactly") {
  // The masked value function of a linear model is affine in the coalition
  // vector, so the weighted regression has a zero-residual solution no
  // matter which coalitions were drawn.
  Rng rng(14);
  const std::size_t d = 12;
  const auto w = random_weights(rng, d, 1.5);
  const PredictFn f = linear_fn(w, -0.2);
  const auto bg = make_background(rng, 5, d);
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform(0.5, 1.5);

  Rng shap_rng(15);
  const auto sv = kernel_shap(f, x, bg, 400, shap_rng);
  CHECK(sv.n_samples <= 400);
  for (std::size_t j = 0; j < d; ++j) {
    double mean_bj = 0.0;
    for (std::size_t r = 0; r < bg.rows; ++r) mean_bj += bg.row(r)[j];
    mean_bj /= static_cast<double>(bg.rows);
    CHECK(sv.phi[j] ==
          doctest::Approx(w[j] * (x[j] - mean_bj)).epsilon(1e-7));
  }
}

TEST_CASE("kernel shap on a constant function attributes nothing") {
  Rng rng(15);
  const std::size_t d = 9;
  const auto bg = make_background(rng, 4, d);
  const std::vector<double> x(d, 1.0);
  const PredictFn f = [](std::span<const double>) { return -1.25; };
  Rng shap_rng(16);
  const auto sv = kernel_shap(f, x, bg, kAllCoalitions, shap_rng);
  CHECK(sv.base_value == doctest::Approx(-1.25));
  CHECK(sv.fx == doctest::Approx(-1.25));
  for (double p : sv.phi) CHECK(std::fabs(p) < 1e-12);
}

TEST_CASE("kernel shap validates its sampling budget") {
  Rng rng(16);
  const std::size_t d = 12;
  const auto bg = make_background(rng, 3, d);
  const std::vector<double> x(d, 1.0);
  Rng shap_rng(17);
  CHECK_THROWS_AS(kernel_shap(linear_fn(std::vector<double>(d, 1.0)), x, bg,
                              2 * d + 1, shap_rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(kernel_shap(linear_fn(std::vector<double>(16, 1.0)),
                              std::vector<double>(16, 1.0),
                              make_background(rng, 3, 16), kAllCoalitions,
                              shap_rng),
                  TooManyFeatures);
}

TEST_CASE("lime recovers a linear model's standardized coefficients") {
  Rng rng(18);
  const std::size_t d = 6;
  const auto w = random_weights(rng, d, 2.0);
  const PredictFn f = linear_fn(w, 0.8);

  FeatureStats stats;
  stats.mean.assign(d, 1.0);
  stats.std_dev.resize(d);
  for (double& s : stats.std_dev) s = rng.uniform(0.05, 0.3);

  std::vector<double> x(d, 1.0);
  LimeConfig cfg;
  cfg.n_samples = 5000;
  cfg.ridge = 1e-6;
  Rng lime_rng(19);
  const auto ex = lime_explain(f, x, stats, cfg, lime_rng);
  for (std::size_t j = 0; j < d; ++j) {
    const double expect = w[j] * stats.std_dev[j];
    CHECK(ex.coefficients[j] == doctest::Approx(expect).epsilon(0.05));
  }
  CHECK(ex.local_fidelity > 0.999);
  CHECK(ex.kernel_width ==
        doctest::Approx(0.75 * std::sqrt(static_cast<double>(d))));
}

TEST_CASE("lime on a constant function returns zero coefficients") {
  Rng rng(20);
  const std::size_t d = 4;
  const PredictFn f = [](std::span<const double>) { return 0.42; };
  FeatureStats stats;
  stats.mean.assign(d, 1.0);
  stats.std_dev.assign(d, 0.1);
  std::vector<double> x(d, 1.0);
  LimeConfig cfg;
  cfg.n_samples = 500;
  Rng lime_rng(21);
  const auto ex = lime_explain(f, x, stats, cfg, lime_rng);
  for (double c : ex.coefficients) CHECK(std::fabs(c) < 1e-8);
  CHECK(ex.local_fidelity == 0.0);
  CHECK(ex.intercept == doctest::Approx(0.42));
}

TEST_CASE("lime: constant columns are floored and zeroed") {
  Rng rng(22);
  const std::size_t d = 3;
  const PredictFn f = linear_fn({1.0, 1.0, 1.0});
  FeatureStats stats;
  stats.mean.assign(d, 1.0);
  stats.std_dev = {0.2, 0.0, 0.2};  // middle column constant
  std::vector<double> x(d, 1.0);
  LimeConfig cfg;
  cfg.n_samples = 800;
  Rng lime_rng(23);
  const auto ex = lime_explain(f, x, stats, cfg, lime_rng);
  CHECK(ex.coefficients[1] == 0.0);
  CHECK(ex.coefficients[0] > 0.0);
  CHECK(ex.coefficients[2] > 0.0);
}

TEST_CASE("lime top-k ranking is stable: magnitude then index") {
  Rng rng(24);
  const std::size_t d = 5;
  const PredictFn f = linear_fn({0.0, 2.0, -2.0, 0.5, 0.0});
  FeatureStats stats;
  stats.mean.assign(d, 1.0);
  stats.std_dev.assign(d, 0.1);  // equal stds keep |coef| ties honest
  std::vector<double> x(d, 1.0);
  LimeConfig cfg;
  cfg.n_samples = 6000;
  cfg.ridge = 1e-8;
  cfg.top_k = 3;
  Rng lime_rng(25);
  const auto ex = lime_explain(f, x, stats, cfg, lime_rng);
  REQUIRE(ex.top.size() == 3);
  // Features 1 and 2 share magnitude up to noise; both must precede 3.
  CHECK(((ex.top[0].first == 1 && ex.top[1].first == 2) ||
         (ex.top[0].first == 2 && ex.top[1].first == 1)));
  CHECK(ex.top[2].first == 3);
  CHECK(ex.top[1].second != 0.0);
}

TEST_CASE("lime degenerates loudly when every weight vanishes") {
  Rng rng(26);
  const std::size_t d = 4;
  const PredictFn f = linear_fn({1.0, 1.0, 1.0, 1.0});
  FeatureStats stats;
  stats.mean.assign(d, 1.0);
  stats.std_dev.assign(d, 0.1);
  std::vector<double> x(d, 1.0);
  LimeConfig cfg;
  cfg.n_samples = 50;
  cfg.kernel_width = 1e-9;
  Rng lime_rng(27);
  CHECK_THROWS_AS(lime_explain(f, x, stats, cfg, lime_rng), DegenerateSample);
}

TEST_CASE("wide kernels converge to the cloud's global least squares") {
  Rng rng(28);
  const std::size_t d = 3;
  const PredictFn f = [](std::span<const double> v) {
    return v[0] * v[0] + 0.5 * v[1] - 0.2 * v[2] * v[1];
  };
  FeatureStats stats;
  stats.mean.assign(d, 1.0);
  stats.std_dev.assign(d, 0.2);
  std::vector<double> x(d, 1.0);

  LimeConfig cfg;
  cfg.n_samples = 3000;
  cfg.kernel_width = 1e6;  // proximity weights become uniform
  cfg.ridge = 1e-10;
  Rng lime_rng(29);
  const auto ex = lime_explain(f, x, stats, cfg, lime_rng);

  // Rebuild the identical Gaussian cloud (same seed, same draw order) and
  // fit plain unweighted least squares.
  Rng clone(29);
  std::vector<double> design(cfg.n_samples * d), y(cfg.n_samples),
      w(cfg.n_samples, 1.0), z(d);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double g = clone.normal();
      design[i * d + j] = g;
      z[j] = x[j] + stats.std_dev[j] * g;
    }
    y[i] = f(z);
  }
  const auto beta = weighted_ridge(design, y, w, cfg.n_samples, d, 0.0);
  CHECK(ex.intercept == doctest::Approx(beta[0]).epsilon(1e-6));
  for (std::size_t j = 0; j < d; ++j) {
    CHECK(ex.coefficients[j] == doctest::Approx(beta[j + 1]).epsilon(1e-5));
  }
}

TEST_CASE("explain_log produces one group per output with provenance") {
  market::FeatureMatrix fm = test::drift_market(40, 1.004, 0.996);
  // Perturb features so the permutation baseline has variety.
  Rng noise(30);
  for (double& v : fm.rows) v += 0.01 * noise.normal();

  policy::NetConfig nc;
  nc.input_dim = fm.dim();
  nc.hidden = {10};
  nc.n_outputs = 3;
  nc.seed = 31;
  policy::PolicyNet net(nc);

  envsim::PortfolioEnv env(fm, envsim::EnvConfig{});
  auto [log, summary] = decisions::run_trading(env, net);

  ExplainConfig cfg;
  Rng bg_rng(32);
  cfg.background.rows = 8;
  cfg.background.dim = fm.dim();
  cfg.background.data.resize(8 * fm.dim());
  for (double& v : cfg.background.data) v = bg_rng.uniform(0.9, 1.1);
  cfg.stats.mean.assign(fm.dim(), 1.0);
  cfg.stats.std_dev.assign(fm.dim(), 0.05);
  cfg.shap_samples = kAllCoalitions;
  cfg.lime.n_samples = 300;
  cfg.importance_repeats = 3;
  cfg.seed = 33;
  cfg.instances = {log.records[2].date, log.records[5].date};

  const auto bundle = explain_log(log, net, cfg);
  CHECK(bundle.outputs.size() == 3);
  for (const auto& oe : bundle.outputs) {
    CHECK(oe.importance.importance.size() == fm.dim());
    CHECK(oe.by_asset.size() == 2);
    CHECK(oe.by_indicator.size() == 4);
    REQUIRE(oe.instances.size() == 2);
    for (const auto& ie : oe.instances) {
      double total = ie.shap.base_value;
      for (double p : ie.shap.phi) total += p;
      CHECK(std::fabs(total - ie.shap.fx) < 1e-10);
      CHECK(ie.lime.coefficients.size() == fm.dim());
    }
  }

  // Determinism: a second run is value-identical.
  const auto bundle2 = explain_log(log, net, cfg);
  for (std::size_t k = 0; k < bundle.outputs.size(); ++k) {
    CHECK(bundle.outputs[k].importance.importance ==
          bundle2.outputs[k].importance.importance);
    for (std::size_t i = 0; i < bundle.outputs[k].instances.size(); ++i) {
      CHECK(bundle.outputs[k].instances[i].shap.phi ==
            bundle2.outputs[k].instances[i].shap.phi);
      CHECK(bundle.outputs[k].instances[i].lime.coefficients ==
            bundle2.outputs[k].instances[i].lime.coefficients);
    }
  }

  // Empty instance list: global importance only.
  ExplainConfig importance_only = cfg;
  importance_only.instances.clear();
  const auto slim = explain_log(log, net, importance_only);
  for (const auto& oe : slim.outputs) CHECK(oe.instances.empty());

  // A tampered net no longer replays the log.
  policy::PolicyNet other(nc);
  other.params_mut()[0] += 0.5;
  CHECK_THROWS_AS(explain_log(log, other, cfg), LogModelMismatch);

  // Unknown instance dates are rejected.
  ExplainConfig bad = cfg;
  bad.instances = {Date(1999, 1, 1)};
  CHECK_THROWS_AS(explain_log(log, net, bad), std::invalid_argument);

  test::TempDir tmp("xfolio_bundle");
  write_bundle(bundle, tmp.file("explain"));
  namespace fs = std::filesystem;
  CHECK(fs::exists(tmp.path() / "explain" / "provenance.json"));
  CHECK(fs::exists(tmp.path() / "explain" / "importance_0.csv"));
  CHECK(fs::exists(tmp.path() / "explain" / "importance_2_by_asset.csv"));
  const std::string shap_name =
      "shap_1_" + log.records[2].date.to_string() + ".json";
  CHECK(fs::exists(tmp.path() / "explain" / shap_name));
  const std::string lime_name =
      "lime_2_" + log.records[5].date.to_string() + ".json";
  CHECK(fs::exists(tmp.path() / "explain" / lime_name));
}

TEST_CASE("background sampling is reproducible and bounded") {
  market::FeatureMatrix fm = test::drift_market(30, 1.01, 0.99);
  Rng noise(40);
  for (double& v : fm.rows) v += 0.05 * noise.uniform();
  const auto a = sample_background(fm, 10, 77);
  const auto b = sample_background(fm, 10, 77);
  CHECK(a.rows == 10);
  CHECK(a.data == b.data);
  const auto all = sample_background(fm, 1000, 78);
  CHECK(all.rows == fm.n_rows());
  CHECK(a.seed == 77);
}

TEST_CASE("force plot data partitions phi by sign and reconciles") {
  explain::ShapValues sv;
  sv.base_value = 0.2;
  sv.phi = {0.05, -0.02, 0.0, 0.11, -0.07};
  sv.fx = sv.base_value;
  for (double p : sv.phi) sv.fx += p;
  const std::vector<std::string> names = {"a", "b", "c", "d", "e"};

  const auto data = report::make_force_plot(sv, names);
  REQUIRE(data.positive.size() == 2);
  REQUIRE(data.negative.size() == 2);  // zero phi excluded
  CHECK(data.positive[0].first == "d");  // sorted by magnitude
  CHECK(data.negative[0].first == "e");
  double signed_sum = 0.0;
  for (const auto& [n, v] : data.positive) signed_sum += v;
  for (const auto& [n, v] : data.negative) signed_sum += v;
  CHECK(signed_sum == doctest::Approx(data.fx - data.base_value)
                          .epsilon(1e-12));

  const auto only = report::make_force_plot(sv, names, "b");
  CHECK(only.positive.empty());
  REQUIRE(only.negative.size() == 1);
  CHECK(only.negative[0].second == doctest::Approx(-0.02));
  CHECK(only.feature_filter == "b");
  CHECK_THROWS_AS(report::make_force_plot(sv, names, "nope"),
                  std::invalid_argument);

  const std::string svg = report::render_force_plot_svg("t", data);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
