#pragma once

#include <cstddef>

namespace xfolio::kernels::detail {

struct KernelTable {
  void (*matvec)(const double*, const double*, const double*, double*,
                 std::size_t, std::size_t);
  void (*matvec_t)(const double*, const double*, double*, std::size_t,
                   std::size_t);
  void (*ger)(double*, const double*, const double*, double, std::size_t,
              std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sum_abs)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*hadamard)(const double*, const double*, double*, std::size_t);
  void (*adam_step)(double*, const double*, double*, double*, std::size_t,
                    double, double, double, double, double, double);
};

extern const KernelTable scalar_table;

// Null on targets without an AVX2 build.
const KernelTable* avx2_table();
bool cpu_has_avx2();

}  // namespace xfolio::kernels::detail
