#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace xfolio {

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solves A x = b in place (A n x n row-major, overwritten); returns x.
// Gaussian elimination with partial pivoting; throws SingularMatrix when a
// pivot underflows the scale of its column.
std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b);

// Weighted ridge regression with unpenalized intercept:
//   minimize sum_i w_i (y_i - b0 - x_i . beta)^2 + ridge * |beta|^2
// X is rows x dim row-major. Returns [b0, beta...], size dim+1.
std::vector<double> weighted_ridge(const std::vector<double>& X,
                                   const std::vector<double>& y,
                                   const std::vector<double>& w,
                                   std::size_t rows, std::size_t dim,
                                   double ridge);

}  // namespace xfolio
