#pragma once

namespace critfield {

// Modified Bessel K_nu(x), x > 0, any real order (K_{-nu} = K_nu).
double bessel_k(double nu, double x);
// Bessel J_nu(x), x >= 0, any real order.
double bessel_j(double nu, double x);

// f_nu(r) = r^{-nu/2} J_nu(sqrt r), entire in r; f_nu' = -f_{nu+1}/2.
double scaled_bessel_j(double nu, double r);
// g_nu(r) = r^{nu/2} K_{|nu|}(sqrt r), r > 0; g_nu' = -g_{nu-1}/2.
double scaled_bessel_k(double nu, double r);

// 2^{-nu}/Gamma(nu+1), the value f_nu(0).
double scaled_bessel_j_at_zero(double nu);

}  // namespace critfield
