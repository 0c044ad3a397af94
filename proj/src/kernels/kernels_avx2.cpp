// AVX2+FMA kernel variants. Compiled via per-function target attributes so
// the TU needs no global ISA flags; dispatch checks CPU support at runtime.
//
// Elementwise kernels (axpy, scale, hadamard, ger, adam_step) use separate
// mul/add so they round exactly like the scalar reference and stay
// bit-identical to it. Reductions (dot, sum, matvec) use FMA and wide
// accumulators and only agree up to reassociation error.

#include "kernel_table.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

#define XF_AVX2 __attribute__((target("avx2,fma")))

namespace xfolio::kernels::detail {
namespace {

XF_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, swap));
}

XF_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

XF_AVX2 double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i];
  return total;
}

XF_AVX2 double sum_abs_avx2(const double* a, std::size_t n) {
  const __m256d mask = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(mask, _mm256_loadu_pd(a + i)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += std::fabs(a[i]);
  return total;
}

XF_AVX2 void matvec_avx2(const double* A, const double* x, const double* bias,
                         double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double acc = dot_avx2(A + i * n, x, n);
    y[i] = bias ? acc + bias[i] : acc;
  }
}

XF_AVX2 void matvec_t_avx2(const double* A, const double* x, double* y,
                           std::size_t m, std::size_t n) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) _mm256_storeu_pd(y + j, _mm256_setzero_pd());
  for (; j < n; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = A + i * n;
    const __m256d xi = _mm256_set1_pd(x[i]);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
      __m256d acc = _mm256_loadu_pd(y + k);
      acc = _mm256_fmadd_pd(xi, _mm256_loadu_pd(row + k), acc);
      _mm256_storeu_pd(y + k, acc);
    }
    for (; k < n; ++k) y[k] += x[i] * row[k];
  }
}

XF_AVX2 void ger_avx2(double* A, const double* u, const double* v,
                      double alpha, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = A + i * n;
    const double ui = alpha * u[i];
    const __m256d vui = _mm256_set1_pd(ui);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
      __m256d prod = _mm256_mul_pd(vui, _mm256_loadu_pd(v + k));
      _mm256_storeu_pd(row + k, _mm256_add_pd(_mm256_loadu_pd(row + k), prod));
    }
    for (; k < n; ++k) row[k] += ui * v[k];
  }
}

XF_AVX2 void axpy_avx2(double alpha, const double* x, double* y,
                       std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

XF_AVX2 void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

XF_AVX2 void hadamard_avx2(const double* a, const double* b, double* out,
                           std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

XF_AVX2 void adam_step_avx2(double* params, const double* grad, double* m,
                            double* v, std::size_t n, double lr, double beta1,
                            double beta2, double eps, double bias1,
                            double bias2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vc1 = _mm256_set1_pd(bias1);
  const __m256d vc2 = _mm256_set1_pd(bias2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(v1mb1, g));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(v1mb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, vc1);
    const __m256d vhat = _mm256_div_pd(vi, vc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
    _mm256_storeu_pd(params + i,
                     _mm256_sub_pd(_mm256_loadu_pd(params + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (grad[i] * grad[i]);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

const KernelTable avx2_impl = {
    matvec_avx2, matvec_t_avx2, ger_avx2,      dot_avx2,
    sum_avx2,    sum_abs_avx2,  axpy_avx2,     scale_avx2,
    hadamard_avx2, adam_step_avx2,
};

}  // namespace

const KernelTable* avx2_table() { return &avx2_impl; }

bool cpu_has_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace xfolio::kernels::detail

#else  // non-x86: scalar only

namespace xfolio::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
bool cpu_has_avx2() { return false; }
}  // namespace xfolio::kernels::detail

#endif
