#pragma once
#include <span>
#include <string>
#include <vector>

namespace critfield {

enum class Family { Matern, GaussianLimit, RandomWave };

std::string family_name(Family f);
Family parse_family(const std::string& s);  // "matern", "gauss", "rwm" (and long forms)

// Isotropic unit-variance correlation model in R^d.
//   Matern:        c1(r) = 2^{1-nu}/Gamma(nu) z^nu K_nu(z),  z = sqrt(2 nu) r / phi
//   GaussianLimit: c1(r) = exp(-r^2 / (2 phi^2))  (nu -> infinity limit of the above)
//   RandomWave:    c1(r) = 2^{d/2-1} Gamma(d/2) z^{1-d/2} J_{d/2-1}(z),  z = sqrt(d) r / phi
// c2 denotes the same function of s = r^2.
class CovarianceModel {
 public:
  static CovarianceModel matern(int d, double nu, double phi);
  static CovarianceModel gaussian(int d, double phi);
  static CovarianceModel random_wave(int d, double phi);
  static CovarianceModel make(Family f, int d, double nu, double phi);

  Family family() const { return family_; }
  int dim() const { return d_; }
  // +inf for GaussianLimit and RandomWave (entire correlation functions).
  double nu() const { return nu_; }
  double phi() const { return phi_; }
  // The sine-cosine process: X'(t) and X'(t + pi phi) are collinear.
  bool second_order_degenerate() const { return family_ == Family::RandomWave && d_ == 1; }
  // Largest p for which c2^{(p)}(0) exists (very large for smooth families).
  int max_derivative_at_zero() const;
  std::string describe() const;

 private:
  CovarianceModel(Family f, int d, double nu, double phi) : family_(f), d_(d), nu_(nu), phi_(phi) {}
  Family family_;
  int d_;
  double nu_;
  double phi_;
};

double c1(const CovarianceModel& m, double r);
// p-th derivative of c2 at s >= 0, p in 0..6.
double c2_deriv(const CovarianceModel& m, int p, double s);
// c2^{(p)}(0) from the small-argument limits of the Bessel forms
// ((z/2)^mu K_mu(z) -> Gamma(mu)/2 and the J power series), independent of
// the spectral-moment products.
double c2_deriv_zero_limit(const CovarianceModel& m, int p);
// Second derivative of c1 at r: 4 r^2 c2''(r^2) + 2 c2'(r^2).
double c1_second(const CovarianceModel& m, double r);

// lambda_{2p}, the 2p-th moment of the spectral measure along one axis.
double spectral_moment(const CovarianceModel& m, int p);
// lambda_4 / (3 lambda_2).
double moment_ratio(const CovarianceModel& m);

// d^alpha c(t) for a multi-index with |alpha| <= 6 (alpha.size() == d).
double partial_c(const CovarianceModel& m, std::span<const int> alpha, std::span<const double> t);

struct NondegeneracyCheck {
  bool ok;
  double margin1;  // c2'(0)^2 - c2'(r^2)^2
  double margin2;  // c1''(0)^2 - c1''(r)^2
  double tolerance;  // margin2 threshold; margin1 uses a quarter of it
};
NondegeneracyCheck check_pairwise_nondegeneracy(const CovarianceModel& m, double r);

// max_{p=1..4} r^p |c2^{(p)}(r^2)|
double xi_envelope(const CovarianceModel& m, double r);

struct IntegrabilityCheck {
  bool ok;
  double tail_integral;  // integral of r^{d-1} Xi(r) over (0, inf), +inf when divergent
  double decay_exponent;  // fitted log-log slope of the running-max envelope on [R/5, R]
  std::string verdict;
};
IntegrabilityCheck check_integrability(const CovarianceModel& m);

}  // namespace critfield
