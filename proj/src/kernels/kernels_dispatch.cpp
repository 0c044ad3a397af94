#include "xfolio/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kernel_table.hpp"

namespace xfolio::kernels {
namespace {

using detail::KernelTable;

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable* resolve() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (t) return t;

  Backend want = detail::cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  if (const char* env = std::getenv("XFOLIO_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) want = Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && detail::cpu_has_avx2())
      want = Backend::avx2;
  }
  t = (want == Backend::avx2) ? detail::avx2_table() : &detail::scalar_table;
  g_backend.store(want, std::memory_order_relaxed);
  g_table.store(t, std::memory_order_release);
  return t;
}

}  // namespace

Backend active_backend() {
  resolve();
  return g_backend.load(std::memory_order_relaxed);
}

bool set_backend(Backend b) {
  if (b == Backend::avx2) {
    const KernelTable* t = detail::avx2_table();
    if (!t || !detail::cpu_has_avx2()) return false;
    g_backend.store(Backend::avx2, std::memory_order_relaxed);
    g_table.store(t, std::memory_order_release);
    return true;
  }
  g_backend.store(Backend::scalar, std::memory_order_relaxed);
  g_table.store(&detail::scalar_table, std::memory_order_release);
  return true;
}

std::string_view backend_name() {
  return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void matvec(const double* A, const double* x, const double* bias, double* y,
            std::size_t m, std::size_t n) {
  resolve()->matvec(A, x, bias, y, m, n);
}

void matvec_t(const double* A, const double* x, double* y, std::size_t m,
              std::size_t n) {
  resolve()->matvec_t(A, x, y, m, n);
}

void ger(double* A, const double* u, const double* v, double alpha,
         std::size_t m, std::size_t n) {
  resolve()->ger(A, u, v, alpha, m, n);
}

double dot(const double* a, const double* b, std::size_t n) {
  return resolve()->dot(a, b, n);
}

double sum(const double* a, std::size_t n) { return resolve()->sum(a, n); }

double sum_abs(const double* a, std::size_t n) {
  return resolve()->sum_abs(a, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  resolve()->axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, std::size_t n) {
  resolve()->scale(alpha, x, n);
}

void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  resolve()->hadamard(a, b, out, n);
}

void adam_step(double* params, const double* grad, double* m, double* v,
               std::size_t n, double lr, double beta1, double beta2, double eps,
               double bias1, double bias2) {
  resolve()->adam_step(params, grad, m, v, n, lr, beta1, beta2, eps, bias1,
                       bias2);
}

}  // namespace xfolio::kernels
