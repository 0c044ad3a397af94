// Scalar reference kernels. These define the semantics the vector variants
// are tested against.

#include <cmath>
#include <cstddef>

#include "kernel_table.hpp"

namespace xfolio::kernels::detail {
namespace {

void matvec_scalar(const double* A, const double* x, const double* bias,
                   double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = A + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = bias ? acc + bias[i] : acc;
  }
}

void matvec_t_scalar(const double* A, const double* x, double* y,
                     std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = A + i * n;
    const double xi = x[i];
    for (std::size_t j = 0; j < n; ++j) y[j] += xi * row[j];
  }
}

void ger_scalar(double* A, const double* u, const double* v, double alpha,
                std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = A + i * n;
    const double ui = alpha * u[i];
    for (std::size_t j = 0; j < n; ++j) row[j] += ui * v[j];
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double sum_abs_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i]);
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void hadamard_scalar(const double* a, const double* b, double* out,
                     std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void adam_step_scalar(double* params, const double* grad, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (grad[i] * grad[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const KernelTable scalar_table = {
    matvec_scalar, matvec_t_scalar, ger_scalar,      dot_scalar,
    sum_scalar,    sum_abs_scalar,  axpy_scalar,     scale_scalar,
    hadamard_scalar, adam_step_scalar,
};

}  // namespace xfolio::kernels::detail
