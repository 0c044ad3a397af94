#pragma once

namespace xfolio {

// Digamma (psi) for x > 0, ~1e-12 accurate: recurrence up to x >= 6, then
// asymptotic series.
double digamma(double x);

// Trigamma (psi') for x > 0, same scheme.
double trigamma(double x);

// log Gamma(sum a_i) terms of the Dirichlet normalizer: log B(alpha).
double log_beta(const double* alpha, int n);

// Numerically stable log(1 + e^x) and its derivative (logistic sigmoid).
double softplus(double x);
double sigmoid(double x);

}  // namespace xfolio
