#include "xfolio/linalg.hpp"

#include <cmath>
#include <cstddef>

namespace xfolio {

std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b) {
  const std::size_t n = b.size();
  if (A.size() != n * n) throw std::invalid_argument("solve_dense: shape");

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(A[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::fabs(A[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-12) {
      throw SingularMatrix("solve_dense: singular system at column " +
                           std::to_string(col));
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j)
        std::swap(A[col * n + j], A[pivot * n + j]);
      std::swap(b[col], b[pivot]);
    }
    const double inv = 1.0 / A[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) A[r * n + j] -= f * A[col * n + j];
      b[r] -= f * b[col];
    }
  }

  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t j = ri + 1; j < n; ++j) acc -= A[ri * n + j] * x[j];
    x[ri] = acc / A[ri * n + ri];
  }
  return x;
}

std::vector<double> weighted_ridge(const std::vector<double>& X,
                                   const std::vector<double>& y,
                                   const std::vector<double>& w,
                                   std::size_t rows, std::size_t dim,
                                   double ridge) {
  if (X.size() != rows * dim || y.size() != rows || w.size() != rows) {
    throw std::invalid_argument("weighted_ridge: shape");
  }
  const std::size_t n = dim + 1;  // intercept + coefficients
  std::vector<double> G(n * n, 0.0);
  std::vector<double> rhs(n, 0.0);

  // Accumulate the upper triangle of the augmented Gram matrix, row 0 being
  // the intercept.
  for (std::size_t i = 0; i < rows; ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    const double* xi = X.data() + i * dim;
    G[0] += wi;
    rhs[0] += wi * y[i];
    for (std::size_t a = 0; a < dim; ++a) {
      G[0 * n + (a + 1)] += wi * xi[a];
      rhs[a + 1] += wi * xi[a] * y[i];
      for (std::size_t c = a; c < dim; ++c) {
        G[(a + 1) * n + (c + 1)] += wi * xi[a] * xi[c];
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t c = a + 1; c < n; ++c) G[c * n + a] = G[a * n + c];
  }
  // Ridge on coefficients only; the intercept stays unpenalized.
  for (std::size_t a = 1; a < n; ++a) G[a * n + a] += ridge;

  return solve_dense(std::move(G), std::move(rhs));
}

}  // namespace xfolio
