#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xfolio/rng.hpp"

namespace xfolio::policy {

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BoundaryAction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NetConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t n_outputs = 0;  // cash + assets
  std::uint64_t seed = 0;
};

struct PolicyOutput {
  std::vector<double> alpha;         // concentrations, each >= 1
  std::vector<double> mean_weights;  // alpha / sum(alpha), on the simplex
  double value = 0.0;
};

// Dirichlet helpers shared by the net and the trainer. x must be strictly
// positive and sum to 1.
double dirichlet_log_density(std::span<const double> alpha,
                             std::span<const double> x);
void dirichlet_log_density_grad_alpha(std::span<const double> alpha,
                                      std::span<const double> x,
                                      std::span<double> out);
double dirichlet_entropy(std::span<const double> alpha);
void dirichlet_entropy_grad_alpha(std::span<const double> alpha,
                                  std::span<double> out);

// Normalized Gamma draws, clamped to >= 1e-8 and renormalized onto the
// simplex.
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

// Feed-forward policy/value network: tanh trunk, concentration head
// (softplus + 1, so the Dirichlet density stays bounded) and a scalar value
// head. Parameters live in one flat vector; gradients are computed by
// hand-rolled reverse mode. Immutable during inference; training mutates
// parameters and needs exclusive access.
class PolicyNet {
 public:
  explicit PolicyNet(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  std::size_t param_count() const { return theta_.size(); }
  std::span<const double> params() const { return theta_; }
  std::span<double> params_mut() { return theta_; }

  PolicyOutput forward(std::span<const double> features) const;

  // upstream = [dL/d alpha (n_outputs entries), dL/d value]; returns dL/d
  // theta with the same layout as params().
  std::vector<double> backward(std::span<const double> features,
                               std::span<const double> upstream) const;

  // Dirichlet(alpha) draw via normalized Gamma variates. Components are
  // clamped to >= 1e-8 and renormalized; the returned log-probability is
  // the density at the returned point.
  std::pair<std::vector<double>, double> sample_action(
      std::span<const double> features, Rng& rng) const;

  double log_prob(std::span<const double> features,
                  std::span<const double> action) const;

  void save(const std::string& path) const;
  static PolicyNet load(const std::string& path);

 private:
  struct Layer {
    std::size_t in, out;
    std::size_t w_off, b_off;
  };

  void check_features(std::span<const double> features) const;

  NetConfig config_;
  std::vector<Layer> trunk_;
  Layer alpha_head_{};
  Layer value_head_{};
  std::vector<double> theta_;
};

// Loss over raw network outputs [alpha..., value] with its analytic output
// gradient; used to drive gradient verification.
struct OutputLoss {
  std::function<double(std::span<const double>)> eval;
  std::function<std::vector<double>(std::span<const double>)> grad;
};

// Central finite differences of loss(forward(theta)) w.r.t. theta.
std::vector<double> numeric_gradient(const PolicyNet& net,
                                     std::span<const double> features,
                                     const OutputLoss& loss,
                                     double eps = 1e-5);

// max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|)
double max_rel_error(std::span<const double> analytic,
                     std::span<const double> numeric);

// Compares backward() against numeric_gradient for the given loss.
double grad_check(const PolicyNet& net, std::span<const double> features,
                  const OutputLoss& loss, double eps = 1e-5);

}  // namespace xfolio::policy
