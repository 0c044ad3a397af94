#include "xfolio/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "xfolio/kernels.hpp"
#include "xfolio/special.hpp"

namespace xfolio::policy {
namespace {

constexpr char kMagic[10] = {'X', 'F', 'O', 'L', 'I', 'O', 'N', 'E', 'T', '1'};
constexpr double kActionFloor = 1e-8;

}  // namespace

double dirichlet_log_density(std::span<const double> alpha,
                             std::span<const double> x) {
  double lp = -log_beta(alpha.data(), static_cast<int>(alpha.size()));
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    lp += (alpha[i] - 1.0) * std::log(x[i]);
  }
  return lp;
}

void dirichlet_log_density_grad_alpha(std::span<const double> alpha,
                                      std::span<const double> x,
                                      std::span<double> out) {
  const double a0 = kernels::sum(alpha.data(), alpha.size());
  const double psi_a0 = digamma(a0);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out[i] = std::log(x[i]) - digamma(alpha[i]) + psi_a0;
  }
}

double dirichlet_entropy(std::span<const double> alpha) {
  const int k = static_cast<int>(alpha.size());
  const double a0 = kernels::sum(alpha.data(), alpha.size());
  double h = log_beta(alpha.data(), k) + (a0 - k) * digamma(a0);
  for (int i = 0; i < k; ++i) h -= (alpha[i] - 1.0) * digamma(alpha[i]);
  return h;
}

void dirichlet_entropy_grad_alpha(std::span<const double> alpha,
                                  std::span<double> out) {
  const int k = static_cast<int>(alpha.size());
  const double a0 = kernels::sum(alpha.data(), alpha.size());
  const double t0 = (a0 - k) * trigamma(a0);
  for (int i = 0; i < k; ++i) {
    out[i] = t0 - (alpha[i] - 1.0) * trigamma(alpha[i]);
  }
}

PolicyNet::PolicyNet(const NetConfig& config) : config_(config) {
  if (config.input_dim < 1) {
    throw std::invalid_argument("NetConfig: input_dim must be >= 1");
  }
  if (config.n_outputs < 2) {
    throw std::invalid_argument("NetConfig: n_outputs must be >= 2");
  }
  for (std::size_t w : config.hidden) {
    if (w < 1) throw std::invalid_argument("NetConfig: hidden width 0");
  }

  std::size_t off = 0;
  auto add_layer = [&](std::size_t in, std::size_t out) {
    Layer layer{in, out, off, off + in * out};
    off += (in + 1) * out;
    return layer;
  };
  std::size_t width = config.input_dim;
  for (std::size_t h : config.hidden) {
    trunk_.push_back(add_layer(width, h));
    width = h;
  }
  alpha_head_ = add_layer(width, config.n_outputs);
  value_head_ = add_layer(width, 1);
  theta_.assign(off, 0.0);

  // Xavier-uniform weights, zero biases.
  Rng rng(config.seed);
  auto init_layer = [&](const Layer& layer) {
    const double a =
        std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      theta_[layer.w_off + i] = rng.uniform(-a, a);
    }
  };
  for (const Layer& layer : trunk_) init_layer(layer);
  init_layer(alpha_head_);
  init_layer(value_head_);
}

void PolicyNet::check_features(std::span<const double> features) const {
  if (features.size() != config_.input_dim) {
    throw DimensionMismatch("expected " + std::to_string(config_.input_dim) +
                            " features, got " +
                            std::to_string(features.size()));
  }
}

PolicyOutput PolicyNet::forward(std::span<const double> features) const {
  check_features(features);

  std::vector<double> h(features.begin(), features.end());
  std::vector<double> z;
  for (const Layer& layer : trunk_) {
    z.resize(layer.out);
    kernels::matvec(theta_.data() + layer.w_off, h.data(),
                    theta_.data() + layer.b_off, z.data(), layer.out,
                    layer.in);
    h.resize(layer.out);
    for (std::size_t i = 0; i < layer.out; ++i) h[i] = std::tanh(z[i]);
  }

  PolicyOutput out;
  out.alpha.resize(config_.n_outputs);
  kernels::matvec(theta_.data() + alpha_head_.w_off, h.data(),
                  theta_.data() + alpha_head_.b_off, out.alpha.data(),
                  alpha_head_.out, alpha_head_.in);
  for (double& a : out.alpha) a = softplus(a) + 1.0;

  double v = 0.0;
  kernels::matvec(theta_.data() + value_head_.w_off, h.data(),
                  theta_.data() + value_head_.b_off, &v, 1, value_head_.in);
  out.value = v;

  out.mean_weights.resize(config_.n_outputs);
  const double total = kernels::sum(out.alpha.data(), out.alpha.size());
  for (std::size_t i = 0; i < out.alpha.size(); ++i) {
    out.mean_weights[i] = out.alpha[i] / total;
  }
  return out;
}

std::vector<double> PolicyNet::backward(
    std::span<const double> features, std::span<const double> upstream) const {
  check_features(features);
  if (upstream.size() != config_.n_outputs + 1) {
    throw DimensionMismatch("upstream must cover alpha head + value head (" +
                            std::to_string(config_.n_outputs + 1) +
                            " entries), got " +
                            std::to_string(upstream.size()));
  }

  // Forward pass keeping per-layer activations.
  std::vector<std::vector<double>> acts;  // acts[0] = input, then tanh layers
  acts.emplace_back(features.begin(), features.end());
  for (const Layer& layer : trunk_) {
    std::vector<double> z(layer.out);
    kernels::matvec(theta_.data() + layer.w_off, acts.back().data(),
                    theta_.data() + layer.b_off, z.data(), layer.out,
                    layer.in);
    for (double& v : z) v = std::tanh(v);
    acts.push_back(std::move(z));
  }
  const std::vector<double>& top = acts.back();

  std::vector<double> alpha_logits(config_.n_outputs);
  kernels::matvec(theta_.data() + alpha_head_.w_off, top.data(),
                  theta_.data() + alpha_head_.b_off, alpha_logits.data(),
                  alpha_head_.out, alpha_head_.in);

  std::vector<double> grad(theta_.size(), 0.0);

  // Heads. d alpha / d logit = sigmoid(logit).
  std::vector<double> dz_alpha(config_.n_outputs);
  for (std::size_t i = 0; i < config_.n_outputs; ++i) {
    dz_alpha[i] = upstream[i] * sigmoid(alpha_logits[i]);
  }
  const double dvalue = upstream[config_.n_outputs];

  kernels::ger(grad.data() + alpha_head_.w_off, dz_alpha.data(), top.data(),
               1.0, alpha_head_.out, alpha_head_.in);
  kernels::axpy(1.0, dz_alpha.data(), grad.data() + alpha_head_.b_off,
                alpha_head_.out);
  kernels::axpy(dvalue, top.data(), grad.data() + value_head_.w_off,
                value_head_.in);
  grad[value_head_.b_off] += dvalue;

  std::vector<double> dh(top.size(), 0.0);
  kernels::matvec_t(theta_.data() + alpha_head_.w_off, dz_alpha.data(),
                    dh.data(), alpha_head_.out, alpha_head_.in);
  kernels::axpy(dvalue, theta_.data() + value_head_.w_off, dh.data(),
                value_head_.in);

  // Trunk, reversed. acts[l+1] = tanh output of trunk_[l].
  for (std::size_t l = trunk_.size(); l-- > 0;) {
    const Layer& layer = trunk_[l];
    const std::vector<double>& out_act = acts[l + 1];
    const std::vector<double>& in_act = acts[l];
    std::vector<double> dz(layer.out);
    for (std::size_t i = 0; i < layer.out; ++i) {
      dz[i] = dh[i] * (1.0 - out_act[i] * out_act[i]);
    }
    kernels::ger(grad.data() + layer.w_off, dz.data(), in_act.data(), 1.0,
                 layer.out, layer.in);
    kernels::axpy(1.0, dz.data(), grad.data() + layer.b_off, layer.out);
    dh.assign(layer.in, 0.0);
    kernels::matvec_t(theta_.data() + layer.w_off, dz.data(), dh.data(),
                      layer.out, layer.in);
  }
  return grad;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  const std::size_t k = alpha.size();
  std::vector<double> w(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    w[i] = rng.gamma(alpha[i]);
    total += w[i];
  }
  for (double& v : w) v /= total;

  double renorm = 0.0;
  for (double& v : w) {
    v = std::max(v, kActionFloor);
    renorm += v;
  }
  for (double& v : w) v /= renorm;
  return w;
}

std::pair<std::vector<double>, double> PolicyNet::sample_action(
    std::span<const double> features, Rng& rng) const {
  const PolicyOutput out = forward(features);
  std::vector<double> w = sample_dirichlet(out.alpha, rng);
  const double lp = dirichlet_log_density(out.alpha, w);
  return {std::move(w), lp};
}

double PolicyNet::log_prob(std::span<const double> features,
                           std::span<const double> action) const {
  if (action.size() != config_.n_outputs) {
    throw DimensionMismatch("action size " + std::to_string(action.size()) +
                            " vs n_outputs " +
                            std::to_string(config_.n_outputs));
  }
  for (double a : action) {
    if (a < 1e-12) {
      throw BoundaryAction("action component below 1e-12");
    }
  }
  const PolicyOutput out = forward(features);
  return dirichlet_log_density(out.alpha, action);
}

void PolicyNet::save(const std::string& path) const {
  std::string blob(kMagic, sizeof(kMagic));
  auto put_u32 = [&](std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    blob.append(b, 4);
  };
  std::vector<std::uint32_t> dims;
  dims.push_back(static_cast<std::uint32_t>(config_.input_dim));
  for (std::size_t h : config_.hidden)
    dims.push_back(static_cast<std::uint32_t>(h));
  dims.push_back(static_cast<std::uint32_t>(config_.n_outputs));
  put_u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(d);

  std::uint64_t count = theta_.size();
  char b8[8];
  std::memcpy(b8, &count, 8);
  blob.append(b8, 8);
  const char* raw = reinterpret_cast<const char*>(theta_.data());
  blob.append(raw, theta_.size() * sizeof(double));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save: cannot open " + path);
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

PolicyNet PolicyNet::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptCheckpoint("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());

  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (data.size() - off < n) {
      throw CorruptCheckpoint(path + ": truncated at byte " +
                              std::to_string(off));
    }
  };
  need(sizeof(kMagic));
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic) - 1) != 0) {
    throw CorruptCheckpoint(path + ": bad magic");
  }
  if (data[sizeof(kMagic) - 1] != kMagic[sizeof(kMagic) - 1]) {
    throw CorruptCheckpoint(path + ": unsupported version '" +
                            std::string(1, data[sizeof(kMagic) - 1]) + "'");
  }
  off = sizeof(kMagic);

  auto get_u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data.data() + off, 4);
    off += 4;
    return v;
  };
  const std::uint32_t n_dims = get_u32();
  if (n_dims < 2) throw CorruptCheckpoint(path + ": manifest too short");
  std::vector<std::uint32_t> dims(n_dims);
  for (auto& d : dims) d = get_u32();

  need(8);
  std::uint64_t count;
  std::memcpy(&count, data.data() + off, 8);
  off += 8;

  NetConfig config;
  config.input_dim = dims.front();
  config.n_outputs = dims.back();
  config.hidden.assign(dims.begin() + 1, dims.end() - 1);
  PolicyNet net(config);
  if (count != net.param_count()) {
    throw CorruptCheckpoint(path + ": parameter count mismatch");
  }
  need(count * sizeof(double));
  std::memcpy(net.theta_.data(), data.data() + off, count * sizeof(double));
  off += count * sizeof(double);
  if (off != data.size()) throw CorruptCheckpoint(path + ": trailing bytes");

  for (double v : net.theta_) {
    if (!std::isfinite(v)) {
      throw CorruptCheckpoint(path + ": non-finite parameter");
    }
  }
  return net;
}

std::vector<double> numeric_gradient(const PolicyNet& net,
                                     std::span<const double> features,
                                     const OutputLoss& loss, double eps) {
  PolicyNet probe = net;
  auto eval = [&]() {
    const PolicyOutput out = probe.forward(features);
    std::vector<double> flat = out.alpha;
    flat.push_back(out.value);
    return loss.eval(flat);
  };
  std::vector<double> grad(net.param_count(), 0.0);
  auto params = probe.params_mut();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double plus = eval();
    params[i] = saved - eps;
    const double minus = eval();
    params[i] = saved;
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

double max_rel_error(std::span<const double> analytic,
                     std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max(1e-8, std::fabs(analytic[i]) + std::fabs(numeric[i]));
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double grad_check(const PolicyNet& net, std::span<const double> features,
                  const OutputLoss& loss, double eps) {
  const PolicyOutput out = net.forward(features);
  std::vector<double> flat = out.alpha;
  flat.push_back(out.value);
  const std::vector<double> upstream = loss.grad(flat);
  const std::vector<double> analytic = net.backward(features, upstream);
  const std::vector<double> numeric = numeric_gradient(net, features, loss,
                                                       eps);
  return max_rel_error(analytic, numeric);
}

}  // namespace xfolio::policy
