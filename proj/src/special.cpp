#include "critfield/special.hpp"

#include <cmath>
#include <numbers>

namespace critfield {

double bessel_k(double nu, double x) { return std::cyl_bessel_k(std::abs(nu), x); }

double bessel_j(double nu, double x) {
  if (nu >= 0) return std::cyl_bessel_j(nu, x);
  double n = std::round(nu);
  if (n == nu) {
    double v = std::cyl_bessel_j(-nu, x);
    return (static_cast<long>(-n) % 2 == 0) ? v : -v;
  }
  double a = -nu * std::numbers::pi;
  return std::cos(a) * std::cyl_bessel_j(-nu, x) - std::sin(a) * std::cyl_neumann(-nu, x);
}

double scaled_bessel_j_at_zero(double nu) { return std::exp(-nu * std::numbers::ln2 - std::lgamma(nu + 1.0)); }

double scaled_bessel_j(double nu, double r) {
  // Power series (z/2)^{-nu} J_nu(z) = sum_k (-z^2/4)^k / (k! Gamma(nu+k+1)),
  // times 2^{-nu}. Used while the terms stay well below 1e3 in size.
  if (r < 16.0) {
    double q = -r / 4.0;
    double term = 1.0 / std::tgamma(nu + 1.0);
    double sum = term;
    for (int k = 1; k < 200; ++k) {
      term *= q / (k * (nu + k));
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum) && k > 2) break;
    }
    return sum * std::exp2(-nu);
  }
  double z = std::sqrt(r);
  return std::pow(z, -nu) * bessel_j(nu, z);
}

double scaled_bessel_k(double nu, double r) {
  double z = std::sqrt(r);
  return std::pow(z, nu) * bessel_k(nu, z);
}

}  // namespace critfield
