#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xfolio/date.hpp"
#include "xfolio/decision_log.hpp"
#include "xfolio/market_data.hpp"
#include "xfolio/policy_net.hpp"
#include "xfolio/rng.hpp"

namespace xfolio::explain {

struct DegenerateData : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnparsableName : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooManyFeatures : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LogModelMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalar function under explanation. Must be pure and deterministic.
using PredictFn = std::function<double(std::span<const double>)>;

// f_k(x) = weight the policy assigns to output k at features x.
PredictFn make_weight_predictor(const policy::PolicyNet& net,
                                std::size_t output_index);

// Reference rows standing in for "feature absent" in Shapley value
// functions.
struct Background {
  std::vector<double> data;  // rows x dim, row-major
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;    // provenance
  std::string source;

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * dim, dim};
  }
};

// Uniform sample without replacement of up to max_rows feature rows.
Background sample_background(const market::FeatureMatrix& fm,
                             std::size_t max_rows, std::uint64_t seed);

struct ShapValues {
  std::vector<double> phi;
  double base_value = 0.0;
  double fx = 0.0;
  std::string method;        // "exact" or "kernel"
  std::size_t n_samples = 0; // coalitions evaluated
};

struct ImportanceVector {
  std::vector<double> importance;  // mean |prediction change| per feature
  std::size_t n_repeats = 0;
  std::string metric = "mean_abs_prediction_change";
  double baseline = 0.0;           // mean prediction over the data
};

// Mean absolute prediction change when one column is shuffled; columns are
// restored between repeats. data is rows x dim row-major, rows >= 2.
ImportanceVector permutation_importance(const PredictFn& f,
                                        const std::vector<double>& data,
                                        std::size_t rows, std::size_t dim,
                                        std::size_t n_repeats, Rng& rng);

enum class GroupBy { asset, indicator };

// Groups "<TICKER>_<indicator>_L1" importances and returns group means
// sorted descending (ties by name).
std::vector<std::pair<std::string, double>> aggregate_importance(
    const ImportanceVector& iv, std::span<const std::string> names,
    GroupBy by);

// Exact Shapley values by coalition enumeration (2^D value-function
// evaluations, each averaged over the background). dim must be <= 15.
ShapValues exact_shapley(const PredictFn& f, std::span<const double> x,
                         const Background& bg);

inline constexpr std::size_t kAllCoalitions =
    std::numeric_limits<std::size_t>::max();

// Shapley-kernel weighted least squares over sampled coalitions, with the
// additivity constraint eliminated by substitution. n_samples =
// kAllCoalitions enumerates every proper coalition (dim <= 15); otherwise
// n_samples >= 2*dim + 2 coalitions are drawn: sizes are enumerated
// outright while the budget allows and sampled by kernel mass afterwards.
ShapValues kernel_shap(const PredictFn& f, std::span<const double> x,
                       const Background& bg, std::size_t n_samples, Rng& rng);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

FeatureStats compute_feature_stats(const market::FeatureMatrix& fm);

enum class LimeSampler { gaussian, uniform };

struct LimeConfig {
  std::size_t n_samples = 5000;
  double kernel_width = 0.0;  // <= 0 selects 0.75 * sqrt(dim)
  std::size_t top_k = 6;
  double ridge = 1e-3;
  LimeSampler sampler = LimeSampler::gaussian;
};

struct LimeExplanation {
  double intercept = 0.0;
  std::vector<double> coefficients;  // standardized units
  std::vector<std::pair<std::size_t, double>> top;  // (feature, weight)
  double local_fidelity = 0.0;       // weighted R^2, 0 when undefined
  double kernel_width = 0.0;
};

// Local linear surrogate: perturb around x in standardized space, weight by
// exp(-d^2 / width^2) with d the standardized Euclidean distance, fit a
// weighted ridge regression. Constant columns (std below 1e-9) are floored
// and their coefficients forced to zero.
LimeExplanation lime_explain(const PredictFn& f, std::span<const double> x,
                             const FeatureStats& stats, const LimeConfig& cfg,
                             Rng& rng);

struct ExplainConfig {
  std::vector<std::size_t> outputs;  // empty = all outputs
  std::vector<Date> instances;       // empty = global importance only
  Background background;
  FeatureStats stats;
  std::size_t shap_samples = 2048;   // or kAllCoalitions
  LimeConfig lime;
  std::size_t importance_repeats = 10;
  std::uint64_t seed = 0;
};

struct InstanceExplanations {
  Date date;
  ShapValues shap;
  LimeExplanation lime;
};

struct OutputExplanations {
  std::size_t output = 0;
  ImportanceVector importance;
  std::vector<std::pair<std::string, double>> by_asset;
  std::vector<std::pair<std::string, double>> by_indicator;
  std::vector<InstanceExplanations> instances;
};

struct ExplanationBundle {
  std::vector<std::string> feature_names;
  std::vector<std::string> tickers;
  std::vector<OutputExplanations> outputs;
  std::uint64_t seed = 0;
  std::size_t shap_samples = 0;
  std::size_t background_rows = 0;
  std::uint64_t background_seed = 0;
  std::string background_source;
  std::size_t lime_samples = 0;
  std::size_t importance_repeats = 0;
};

// Explains every requested output of the logged decision function. Verifies
// first that the log replays against the net (LogModelMismatch otherwise).
// Deterministic: every sub-task derives its RNG from (seed, output,
// instance).
ExplanationBundle explain_log(const decisions::DecisionLog& log,
                              const policy::PolicyNet& net,
                              const ExplainConfig& cfg);

// Directory serialization: importance_<k>.csv, importance_<k>_by_asset.csv,
// importance_<k>_by_indicator.csv, shap_<k>_<date>.json,
// lime_<k>_<date>.json, provenance.json.
void write_bundle(const ExplanationBundle& bundle, const std::string& dir);

}  // namespace xfolio::explain
