#pragma once
#include <cstddef>

namespace critfield::detail {

// Sum of a_i cos(phase_i + t.V_i) and its first two derivatives, d <= 8.
// Outputs that are null are skipped; hess gets the upper triangle only.
void spectral_sum(int d, std::size_t n, const double* amp, const double* phase, const double* freq,
                  const double* t, double* value, double* grad, double* hess);

// Gradient and Hessian sums at the centres of a regular grid, first axis fastest.
// Accumulates into grad (N x d) and, if given, hess (N x d x d).
void spectral_grid(int d, std::size_t n, const double* amp, const double* phase, const double* freq,
                   const double* lower, const double* step, const int* counts, double* grad, double* hess);

}  // namespace critfield::detail
