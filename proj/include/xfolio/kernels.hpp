#pragma once

// Dense double-precision kernels behind the numeric hot loops (network
// forward/backward, optimizer steps, reductions). Every kernel has a scalar
// reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant selected once at startup. The scalar path is the semantic
// reference; vector variants must agree with it (bit-exact for elementwise
// ops, within reassociation error for reductions).

#include <cstddef>
#include <string_view>

namespace xfolio::kernels {

enum class Backend { scalar, avx2 };

// Backend active for all subsequent kernel calls. Resolution order:
// XFOLIO_KERNELS env var ("scalar"/"avx2") if set, else the widest ISA the
// CPU supports. set_backend returns false if the CPU lacks the request.
Backend active_backend();
bool set_backend(Backend b);
std::string_view backend_name();

// y[i] = dot(A row i, x) + bias[i]; A is m x n row-major, bias may be null.
void matvec(const double* A, const double* x, const double* bias, double* y,
            std::size_t m, std::size_t n);

// y = A^T x; A is m x n row-major, x has length m, y length n.
void matvec_t(const double* A, const double* x, double* y, std::size_t m,
              std::size_t n);

// A += alpha * u v^T (rank-1 update); A is m x n row-major.
void ger(double* A, const double* u, const double* v, double alpha,
         std::size_t m, std::size_t n);

double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_abs(const double* a, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
// out = a .* b
void hadamard(const double* a, const double* b, double* out, std::size_t n);

// Fused Adam update: m/v are first/second moment buffers, bias1/bias2 the
// 1-beta^t corrections. Uses only IEEE-exact elementwise ops, so scalar and
// vector variants are bit-identical.
void adam_step(double* params, const double* grad, double* m, double* v,
               std::size_t n, double lr, double beta1, double beta2,
               double eps, double bias1, double bias2);

}  // namespace xfolio::kernels
