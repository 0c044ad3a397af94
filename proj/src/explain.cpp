#include "xfolio/explain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "xfolio/kernels.hpp"
#include "xfolio/linalg.hpp"
#include "xfolio/text.hpp"

namespace xfolio::explain {
namespace {

using nlohmann::json;

constexpr std::size_t kExactLimit = 15;

double eval_masked(const PredictFn& f, std::span<const double> x,
                   const Background& bg, std::uint64_t mask,
                   std::vector<double>& scratch) {
  const std::size_t d = bg.dim;
  double acc = 0.0;
  for (std::size_t r = 0; r < bg.rows; ++r) {
    const auto row = bg.row(r);
    scratch.assign(row.begin(), row.end());
    for (std::size_t j = 0; j < d; ++j) {
      if (mask & (std::uint64_t{1} << j)) scratch[j] = x[j];
    }
    acc += f(scratch);
  }
  return acc / static_cast<double>(bg.rows);
}

double binomial(std::size_t n, std::size_t k) {
  double result = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    result *= static_cast<double>(n - i + 1) / static_cast<double>(i);
  }
  return result;
}

}  // namespace

PredictFn make_weight_predictor(const policy::PolicyNet& net,
                                std::size_t output_index) {
  if (output_index >= net.config().n_outputs) {
    throw std::invalid_argument("make_weight_predictor: output out of range");
  }
  return [&net, output_index](std::span<const double> x) {
    return net.forward(x).mean_weights[output_index];
  };
}

Background sample_background(const market::FeatureMatrix& fm,
                             std::size_t max_rows, std::uint64_t seed) {
  if (fm.n_rows() == 0) {
    throw DegenerateData("sample_background: empty feature matrix");
  }
  Background bg;
  bg.dim = fm.dim();
  bg.seed = seed;
  bg.source = "feature_matrix[" + fm.dates.front().to_string() + ".." +
              fm.dates.back().to_string() + "]";

  std::vector<std::size_t> idx(fm.n_rows());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  bg.rows = std::min(max_rows, fm.n_rows());
  idx.resize(bg.rows);
  std::sort(idx.begin(), idx.end());
  for (std::size_t r : idx) {
    const auto row = fm.row(r);
    bg.data.insert(bg.data.end(), row.begin(), row.end());
  }
  return bg;
}

ImportanceVector permutation_importance(const PredictFn& f,
                                        const std::vector<double>& data,
                                        std::size_t rows, std::size_t dim,
                                        std::size_t n_repeats, Rng& rng) {
  if (rows < 2) {
    throw DegenerateData("permutation_importance: need at least 2 rows");
  }
  if (data.size() != rows * dim) {
    throw std::invalid_argument("permutation_importance: shape");
  }
  ImportanceVector iv;
  iv.n_repeats = n_repeats;
  iv.importance.assign(dim, 0.0);

  std::vector<double> base_pred(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    base_pred[r] = f(std::span<const double>(data.data() + r * dim, dim));
  }
  iv.baseline = kernels::sum(base_pred.data(), rows) /
                static_cast<double>(rows);

  std::vector<std::size_t> perm(rows);
  std::vector<double> work(rows * dim);
  std::copy(data.begin(), data.end(), work.begin());

  for (std::size_t j = 0; j < dim; ++j) {
    double acc = 0.0;
    for (std::size_t rep = 0; rep < n_repeats; ++rep) {
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      for (std::size_t r = 0; r < rows; ++r) {
        work[r * dim + j] = data[perm[r] * dim + j];
      }
      double change = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double p =
            f(std::span<const double>(work.data() + r * dim, dim));
        change += std::fabs(p - base_pred[r]);
      }
      acc += change / static_cast<double>(rows);
    }
    // Restore the column before moving on.
    for (std::size_t r = 0; r < rows; ++r) {
      work[r * dim + j] = data[r * dim + j];
    }
    iv.importance[j] = acc / static_cast<double>(n_repeats);
  }
  return iv;
}

std::vector<std::pair<std::string, double>> aggregate_importance(
    const ImportanceVector& iv, std::span<const std::string> names,
    GroupBy by) {
  if (names.size() != iv.importance.size()) {
    throw std::invalid_argument("aggregate_importance: name count mismatch");
  }
  std::map<std::string, std::pair<double, std::size_t>> groups;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const std::string& name = names[j];
    std::string ticker, indicator;
    bool ok = false;
    if (name.size() > 3 && name.ends_with("_L1")) {
      const std::string stem = name.substr(0, name.size() - 3);
      for (int i = 0; i < market::kIndicators; ++i) {
        const std::string suffix = std::string("_") +
                                   market::kIndicatorNames[i];
        if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
          ticker = stem.substr(0, stem.size() - suffix.size());
          indicator = market::kIndicatorNames[i];
          ok = true;
          break;
        }
      }
    }
    if (!ok) {
      throw UnparsableName("aggregate_importance: '" + name +
                           "' is not <TICKER>_<indicator>_L1");
    }
    auto& slot = groups[by == GroupBy::asset ? ticker : indicator];
    slot.first += iv.importance[j];
    slot.second += 1;
  }

  std::vector<std::pair<std::string, double>> out;
  out.reserve(groups.size());
  for (const auto& [name, acc] : groups) {
    out.emplace_back(name, acc.first / static_cast<double>(acc.second));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

ShapValues exact_shapley(const PredictFn& f, std::span<const double> x,
                         const Background& bg) {
  const std::size_t d = x.size();
  if (d != bg.dim) throw std::invalid_argument("exact_shapley: dim mismatch");
  if (d > kExactLimit) {
    throw TooManyFeatures("exact_shapley: " + std::to_string(d) +
                          " features exceeds enumeration limit " +
                          std::to_string(kExactLimit));
  }

  const std::uint64_t n_masks = std::uint64_t{1} << d;
  std::vector<double> value(n_masks);
  std::vector<double> scratch(d);
  for (std::uint64_t m = 0; m < n_masks; ++m) {
    value[m] = eval_masked(f, x, bg, m, scratch);
  }

  // w(s) = s! (d-s-1)! / d!, exact in double for d <= 15.
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) {
    fact[i] = fact[i - 1] * static_cast<double>(i);
  }
  std::vector<double> weight(d, 0.0);
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = fact[s] * fact[d - s - 1] / fact[d];
  }

  ShapValues sv;
  sv.method = "exact";
  sv.n_samples = n_masks;
  sv.base_value = value[0];
  sv.fx = value[n_masks - 1];
  sv.phi.assign(d, 0.0);
  for (std::uint64_t m = 0; m < n_masks; ++m) {
    const int s = std::popcount(m);
    for (std::size_t j = 0; j < d; ++j) {
      const std::uint64_t bit = std::uint64_t{1} << j;
      if (m & bit) continue;
      sv.phi[j] += weight[static_cast<std::size_t>(s)] *
                   (value[m | bit] - value[m]);
    }
  }
  return sv;
}

ShapValues kernel_shap(const PredictFn& f, std::span<const double> x,
                       const Background& bg, std::size_t n_samples, Rng& rng) {
  const std::size_t d = x.size();
  if (d != bg.dim) throw std::invalid_argument("kernel_shap: dim mismatch");
  if (d < 2) throw std::invalid_argument("kernel_shap: need >= 2 features");
  if (d > 63) {
    throw TooManyFeatures("kernel_shap: mask width limited to 63 features");
  }

  std::vector<double> scratch(d);
  ShapValues sv;
  sv.method = "kernel";
  sv.base_value = eval_masked(f, x, bg, 0, scratch);
  std::vector<double> xcopy(x.begin(), x.end());
  sv.fx = f(xcopy);

  // Distinct coalitions with accumulated regression weights.
  std::vector<std::uint64_t> masks;
  std::vector<double> weights;

  const bool enumerate_all =
      n_samples == kAllCoalitions ||
      (d <= kExactLimit &&
       n_samples >= (std::uint64_t{1} << d) - 2);
  if (n_samples == kAllCoalitions && d > kExactLimit) {
    throw TooManyFeatures("kernel_shap: full enumeration needs <= " +
                          std::to_string(kExactLimit) + " features");
  }

  if (enumerate_all) {
    const std::uint64_t n_masks = std::uint64_t{1} << d;
    for (std::uint64_t m = 1; m + 1 < n_masks; ++m) {
      const auto s = static_cast<std::size_t>(std::popcount(m));
      masks.push_back(m);
      weights.push_back(static_cast<double>(d - 1) /
                        (binomial(d, s) * static_cast<double>(s) *
                         static_cast<double>(d - s)));
    }
  } else {
    if (n_samples < 2 * d + 2) {
      throw std::invalid_argument(
          "kernel_shap: n_samples must be >= 2*dim + 2");
    }
    // Kernel mass per coalition size.
    std::vector<double> mass(d, 0.0);  // index = size, 1..d-1 used
    for (std::size_t s = 1; s < d; ++s) {
      mass[s] = static_cast<double>(d - 1) /
                (static_cast<double>(s) * static_cast<double>(d - s));
    }

    std::size_t budget = n_samples;
    std::vector<bool> enumerated(d, false);
    // Enumerate complete size pairs (s, d-s) while they fit.
    for (std::size_t s = 1; s <= d / 2; ++s) {
      const std::size_t other = d - s;
      double count = binomial(d, s);
      if (other != s) count += binomial(d, other);
      if (count > static_cast<double>(budget)) break;
      for (std::size_t size : {s, other}) {
        if (enumerated[size]) continue;
        enumerated[size] = true;
        const double w = static_cast<double>(d - 1) /
                         (binomial(d, size) * static_cast<double>(size) *
                          static_cast<double>(d - size));
        // All masks of the given popcount (Gosper's hack).
        std::uint64_t m = (std::uint64_t{1} << size) - 1;
        const std::uint64_t limit = std::uint64_t{1} << d;
        while (m < limit) {
          masks.push_back(m);
          weights.push_back(w);
          const std::uint64_t c = m & (~m + 1);
          const std::uint64_t r = m + c;
          m = (((r ^ m) >> 2) / c) | r;
        }
        budget -= static_cast<std::size_t>(binomial(d, size));
      }
    }

    double leftover_mass = 0.0;
    std::vector<std::size_t> open_sizes;
    for (std::size_t s = 1; s < d; ++s) {
      if (!enumerated[s]) {
        open_sizes.push_back(s);
        leftover_mass += mass[s];
      }
    }
    if (!open_sizes.empty() && budget > 0) {
      std::unordered_map<std::uint64_t, std::size_t> counts;
      std::vector<double> cdf;
      double acc = 0.0;
      for (std::size_t s : open_sizes) {
        acc += mass[s];
        cdf.push_back(acc);
      }
      std::vector<std::size_t> cols(d);
      const std::size_t draws = budget;
      for (std::size_t it = 0; it < draws; ++it) {
        const double u = rng.uniform() * acc;
        std::size_t pick = open_sizes.size() - 1;
        for (std::size_t c = 0; c < cdf.size(); ++c) {
          if (u < cdf[c]) {
            pick = c;
            break;
          }
        }
        const std::size_t s = open_sizes[pick];
        std::iota(cols.begin(), cols.end(), 0);
        // Partial Fisher-Yates: first s entries form the subset.
        for (std::size_t i = 0; i < s; ++i) {
          const std::size_t swap_with =
              i + static_cast<std::size_t>(rng.below(d - i));
          std::swap(cols[i], cols[swap_with]);
        }
        std::uint64_t m = 0;
        for (std::size_t i = 0; i < s; ++i) m |= std::uint64_t{1} << cols[i];
        ++counts[m];
      }
      const double per_draw = leftover_mass / static_cast<double>(draws);
      for (const auto& [m, c] : counts) {
        masks.push_back(m);
        weights.push_back(per_draw * static_cast<double>(c));
      }
    }
  }

  sv.n_samples = masks.size();
  if (masks.size() < d) {
    throw SingularSystem("kernel_shap: only " + std::to_string(masks.size()) +
                         " distinct coalitions; raise n_samples");
  }

  // Weighted least squares with feature d-1 eliminated through the
  // additivity constraint sum(phi) = fx - base.
  const double gap = sv.fx - sv.base_value;
  const std::size_t p = d - 1;
  std::vector<double> G(p * p, 0.0);
  std::vector<double> rhs(p, 0.0);
  std::vector<double> u(p);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const std::uint64_t m = masks[i];
    const double w = weights[i];
    const double z_last = (m >> (d - 1)) & 1 ? 1.0 : 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double z = (m >> j) & 1 ? 1.0 : 0.0;
      u[j] = z - z_last;
    }
    const double y = eval_masked(f, x, bg, m, scratch) - sv.base_value -
                     z_last * gap;
    for (std::size_t a = 0; a < p; ++a) {
      if (u[a] == 0.0) continue;
      rhs[a] += w * u[a] * y;
      for (std::size_t b = a; b < p; ++b) {
        G[a * p + b] += w * u[a] * u[b];
      }
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) G[b * p + a] = G[a * p + b];
  }

  std::vector<double> beta;
  try {
    beta = solve_dense(std::move(G), std::move(rhs));
  } catch (const SingularMatrix& e) {
    throw SingularSystem(std::string("kernel_shap: ") + e.what() +
                         "; raise n_samples");
  }

  sv.phi.assign(d, 0.0);
  double partial = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    sv.phi[j] = beta[j];
    partial += beta[j];
  }
  sv.phi[d - 1] = gap - partial;
  return sv;
}

FeatureStats compute_feature_stats(const market::FeatureMatrix& fm) {
  const std::size_t rows = fm.n_rows();
  const std::size_t d = fm.dim();
  if (rows == 0) throw DegenerateData("compute_feature_stats: empty matrix");
  FeatureStats st;
  st.mean.assign(d, 0.0);
  st.std_dev.assign(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = fm.row(r);
    for (std::size_t j = 0; j < d; ++j) st.mean[j] += row[j];
  }
  for (double& m : st.mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = fm.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - st.mean[j];
      st.std_dev[j] += diff * diff;
    }
  }
  for (double& s : st.std_dev) {
    s = std::sqrt(s / static_cast<double>(rows));
  }
  return st;
}

LimeExplanation lime_explain(const PredictFn& f, std::span<const double> x,
                             const FeatureStats& stats, const LimeConfig& cfg,
                             Rng& rng) {
  const std::size_t d = x.size();
  if (stats.mean.size() != d || stats.std_dev.size() != d) {
    throw std::invalid_argument("lime_explain: stats dim mismatch");
  }
  if (cfg.n_samples < d + 2) {
    throw std::invalid_argument("lime_explain: too few samples");
  }
  const double width =
      cfg.kernel_width > 0.0 ? cfg.kernel_width
                             : 0.75 * std::sqrt(static_cast<double>(d));

  std::vector<double> sigma(d);
  std::vector<bool> floored(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    if (stats.std_dev[j] < 1e-9) {
      sigma[j] = 1e-9;
      floored[j] = true;
    } else {
      sigma[j] = stats.std_dev[j];
    }
  }

  const std::size_t n = cfg.n_samples;
  std::vector<double> design(n * d);   // standardized offsets g
  std::vector<double> y(n);
  std::vector<double> w(n);
  std::vector<double> z(d);
  bool any_weight = false;
  for (std::size_t i = 0; i < n; ++i) {
    double dist2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = cfg.sampler == LimeSampler::gaussian
                           ? rng.normal()
                           : rng.uniform(-2.0, 2.0);
      design[i * d + j] = g;
      z[j] = x[j] + sigma[j] * g;
      dist2 += g * g;
    }
    y[i] = f(z);
    w[i] = std::exp(-dist2 / (width * width));
    if (w[i] >= 1e-12) any_weight = true;
  }
  if (!any_weight) {
    throw DegenerateSample("lime_explain: all proximity weights below 1e-12");
  }

  std::vector<double> solution =
      weighted_ridge(design, y, w, n, d, cfg.ridge);

  LimeExplanation ex;
  ex.kernel_width = width;
  ex.intercept = solution[0];
  ex.coefficients.assign(solution.begin() + 1, solution.end());
  for (std::size_t j = 0; j < d; ++j) {
    if (floored[j]) ex.coefficients[j] = 0.0;
  }

  // Weighted R^2 of the surrogate on its own sample.
  const double wsum = kernels::sum(w.data(), n);
  double ybar = 0.0;
  for (std::size_t i = 0; i < n; ++i) ybar += w[i] * y[i];
  ybar /= wsum;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = ex.intercept;
    pred += kernels::dot(design.data() + i * d, ex.coefficients.data(), d);
    ss_res += w[i] * (y[i] - pred) * (y[i] - pred);
    ss_tot += w[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  ex.local_fidelity = ss_tot < 1e-18 ? 0.0 : 1.0 - ss_res / ss_tot;

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = std::fabs(ex.coefficients[a]);
    const double fb = std::fabs(ex.coefficients[b]);
    if (fa != fb) return fa > fb;
    return a < b;
  });
  const std::size_t k = std::min(cfg.top_k, d);
  for (std::size_t i = 0; i < k; ++i) {
    ex.top.emplace_back(order[i], ex.coefficients[order[i]]);
  }
  return ex;
}

ExplanationBundle explain_log(const decisions::DecisionLog& log,
                              const policy::PolicyNet& net,
                              const ExplainConfig& cfg) {
  if (log.records.empty()) {
    throw DegenerateData("explain_log: empty decision log");
  }
  const std::size_t d = log.dim();
  const std::size_t n_out = log.tickers.size() + 1;
  if (net.config().input_dim != d || net.config().n_outputs != n_out) {
    throw LogModelMismatch("explain_log: net shape does not match log");
  }

  // Replay check: logged actions must be the net's deterministic output.
  for (const auto& rec : log.records) {
    const policy::PolicyOutput out = net.forward(rec.state);
    for (std::size_t i = 0; i < n_out; ++i) {
      if (std::fabs(out.mean_weights[i] - rec.action[i]) > 1e-9) {
        throw LogModelMismatch("explain_log: replay mismatch at " +
                               rec.date.to_string());
      }
    }
  }

  std::vector<std::size_t> outputs = cfg.outputs;
  if (outputs.empty()) {
    outputs.resize(n_out);
    std::iota(outputs.begin(), outputs.end(), 0);
  }
  for (std::size_t k : outputs) {
    if (k >= n_out) {
      throw std::invalid_argument("explain_log: output index out of range");
    }
  }

  // Resolve requested instance dates to record indexes.
  std::vector<std::size_t> instance_idx;
  for (const Date& date : cfg.instances) {
    bool found = false;
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      if (log.records[i].date == date) {
        instance_idx.push_back(i);
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("explain_log: no decision on " +
                                  date.to_string());
    }
  }

  std::vector<double> data(log.size() * d);
  for (std::size_t r = 0; r < log.size(); ++r) {
    std::copy(log.records[r].state.begin(), log.records[r].state.end(),
              data.begin() + r * d);
  }

  ExplanationBundle bundle;
  bundle.feature_names = log.feature_names;
  bundle.tickers = log.tickers;
  bundle.seed = cfg.seed;
  bundle.shap_samples = cfg.shap_samples;
  bundle.background_rows = cfg.background.rows;
  bundle.background_seed = cfg.background.seed;
  bundle.background_source = cfg.background.source;
  bundle.lime_samples = cfg.lime.n_samples;
  bundle.importance_repeats = cfg.importance_repeats;

  for (std::size_t k : outputs) {
    OutputExplanations oe;
    oe.output = k;
    const PredictFn f = make_weight_predictor(net, k);

    Rng perm_rng(derive_seed(cfg.seed, "perm", k));
    oe.importance = permutation_importance(f, data, log.size(), d,
                                           cfg.importance_repeats, perm_rng);
    oe.by_asset =
        aggregate_importance(oe.importance, log.feature_names, GroupBy::asset);
    oe.by_indicator = aggregate_importance(oe.importance, log.feature_names,
                                           GroupBy::indicator);

    for (std::size_t pos = 0; pos < instance_idx.size(); ++pos) {
      const std::size_t rec_idx = instance_idx[pos];
      const auto& rec = log.records[rec_idx];
      InstanceExplanations ie;
      ie.date = rec.date;

      Rng shap_rng(derive_seed(cfg.seed, "shap", k, rec_idx));
      ie.shap =
          kernel_shap(f, rec.state, cfg.background, cfg.shap_samples, shap_rng);

      Rng lime_rng(derive_seed(cfg.seed, "lime", k, rec_idx));
      ie.lime = lime_explain(f, rec.state, cfg.stats, cfg.lime, lime_rng);

      oe.instances.push_back(std::move(ie));
    }
    bundle.outputs.push_back(std::move(oe));
  }
  return bundle;
}

void write_bundle(const ExplanationBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  auto csv_pairs = [&](const std::string& path,
                       const std::vector<std::pair<std::string, double>>& rows,
                       const char* key) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_bundle: cannot open " + path);
    f << key << ",importance\n";
    for (const auto& [name, v] : rows) {
      f << name << ',' << fmt_double(v) << '\n';
    }
  };

  for (const OutputExplanations& oe : bundle.outputs) {
    const std::string k = std::to_string(oe.output);
    {
      std::ofstream f(fs::path(dir) / ("importance_" + k + ".csv"),
                      std::ios::trunc);
      if (!f) throw std::runtime_error("write_bundle: cannot open importance");
      f << "feature,importance\n";
      for (std::size_t j = 0; j < bundle.feature_names.size(); ++j) {
        f << bundle.feature_names[j] << ','
          << fmt_double(oe.importance.importance[j]) << '\n';
      }
    }
    csv_pairs((fs::path(dir) / ("importance_" + k + "_by_asset.csv")).string(),
              oe.by_asset, "asset");
    csv_pairs(
        (fs::path(dir) / ("importance_" + k + "_by_indicator.csv")).string(),
        oe.by_indicator, "indicator");

    for (const InstanceExplanations& ie : oe.instances) {
      const std::string stamp = ie.date.to_string();
      {
        json obj;
        obj["base"] = ie.shap.base_value;
        obj["fx"] = ie.shap.fx;
        json phi = json::object();
        for (std::size_t j = 0; j < bundle.feature_names.size(); ++j) {
          phi[bundle.feature_names[j]] = ie.shap.phi[j];
        }
        obj["phi"] = phi;
        obj["method"] = ie.shap.method;
        obj["n_samples"] = ie.shap.n_samples;
        obj["seed"] = bundle.seed;
        std::ofstream f(fs::path(dir) / ("shap_" + k + "_" + stamp + ".json"),
                        std::ios::trunc);
        f << obj.dump(2) << '\n';
      }
      {
        json obj;
        obj["intercept"] = ie.lime.intercept;
        json coeffs = json::object();
        for (std::size_t j = 0; j < bundle.feature_names.size(); ++j) {
          coeffs[bundle.feature_names[j]] = ie.lime.coefficients[j];
        }
        obj["coefficients"] = coeffs;
        obj["local_fidelity"] = ie.lime.local_fidelity;
        obj["kernel_width"] = ie.lime.kernel_width;
        json top = json::array();
        for (const auto& [idx, weight] : ie.lime.top) {
          top.push_back({{"feature", bundle.feature_names[idx]},
                         {"weight", weight}});
        }
        obj["top_k"] = top;
        std::ofstream f(fs::path(dir) / ("lime_" + k + "_" + stamp + ".json"),
                        std::ios::trunc);
        f << obj.dump(2) << '\n';
      }
    }
  }

  json prov;
  prov["seed"] = bundle.seed;
  prov["shap_samples"] = bundle.shap_samples == kAllCoalitions
                             ? json("all")
                             : json(bundle.shap_samples);
  prov["background"] = {{"rows", bundle.background_rows},
                        {"seed", bundle.background_seed},
                        {"source", bundle.background_source}};
  prov["lime_samples"] = bundle.lime_samples;
  prov["importance_repeats"] = bundle.importance_repeats;
  prov["feature_names"] = bundle.feature_names;
  prov["tickers"] = bundle.tickers;
  json outs = json::array();
  for (const auto& oe : bundle.outputs) outs.push_back(oe.output);
  prov["outputs"] = outs;
  json dates = json::array();
  if (!bundle.outputs.empty()) {
    for (const auto& ie : bundle.outputs.front().instances) {
      dates.push_back(ie.date.to_string());
    }
  }
  prov["instances"] = dates;
  std::ofstream f(fs::path(dir) / "provenance.json", std::ios::trunc);
  f << prov.dump(2) << '\n';
}

}  // namespace xfolio::explain
