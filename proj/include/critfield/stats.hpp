#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "critfield/critpoints.hpp"
#include "critfield/kacrice.hpp"
#include "critfield/rng.hpp"
#include "json.hpp"

namespace critfield {

// ---- estimators on a pattern ----

double rho_hat(const PointPattern& p, const IndexSet& L);

// |W cap (W + h)| for a box window
double translation_overlap(const Window& w, const double* h);

// Translation edge corrected estimate of K_{eta,L}(r), ordered pairs. Each r in
// r_list must satisfy eta < r < min window side.
std::vector<double> k_hat_eta(const PointPattern& p, const IndexSet& L, double eta, const std::vector<double>& r_list);
double k_hat_eta(const PointPattern& p, const IndexSet& L, double eta, double r);

// eta default 0.05 rho^{-1/d}
double default_eta(double rho, int d);

// ---- Hermite machinery ----

using MultiIndex = std::vector<int>;

// probabilists' Hermite polynomials: He_{n+1} = x He_n - n He_{n-1}
double hermite_poly(int n, double x);
double hermite_tensor(std::span<const int> a, std::span<const double> y);
double multi_factorial(std::span<const int> a);
// all a in N^D with |a| = q, lexicographic
std::vector<MultiIndex> multi_indices(int D, int q);

// Sigma(0) = Var of (grad, half-vectorized Hessian) at one point, D x D
Eigen::MatrixXd sigma_single(const CovarianceModel& m);
// bar Sigma(r) for (check X(0), check X(r e_1)), per-point blocks (grad, hess), 2D x 2D
Eigen::MatrixXd sigma_pair(const CovarianceModel& m, double r);
// Cov(check Y(0), check Y(lag)) with Y = Sigma(0)^{-1/2} X, symmetric inverse square root
Eigen::MatrixXd standardized_cross_cov(const CovarianceModel& m, const Eigen::VectorXd& lag);

struct HermiteOptions {
  McOptions mc;
  // pair each Hessian draw with its negative; makes odd orders vanish exactly for symmetric L
  bool antithetic = false;
};

// d_a for a in N^D; several multi-indices share one set of draws.
std::vector<McEstimate> hermite_coeffs_da(const CovarianceModel& m, const IndexSet& L,
                                          const std::vector<MultiIndex>& a, const HermiteOptions& opt = {});
McEstimate hermite_coeff_da(const CovarianceModel& m, const IndexSet& L, const MultiIndex& a,
                            const HermiteOptions& opt = {});

// d_a(r) for a in N^{2D}
std::vector<McEstimate> hermite_coeffs_da_r(const CovarianceModel& m, const IndexSet& L,
                                            const std::vector<MultiIndex>& a, double r, const HermiteOptions& opt = {});
McEstimate hermite_coeff_da_r(const CovarianceModel& m, const IndexSet& L, const MultiIndex& a, double r,
                              const HermiteOptions& opt = {});

// E[H_a(Y) H_b(Y')] for standard vectors with cross-covariance R, |a| = |b|:
// a! b! sum over nonnegative integer matrices k with row sums a, column sums b of prod R_ij^k_ij / k_ij!
double mehler_sum(const Eigen::MatrixXd& R, std::span<const int> a, std::span<const int> b);
// gamma_{a,b}(lag) = E[H_a(check Y(0)) H_b(check Y(lag))], |a| = |b| <= 4
double mehler_gamma(const CovarianceModel& m, const MultiIndex& a, const MultiIndex& b, const Eigen::VectorXd& lag);

struct VarianceResult {
  double value = 0.0;
  int q_max = 0;
  double r_max = 0.0;
  std::vector<int> orders;               // q in N*_L, q <= q_max
  std::vector<double> contribution;      // per order
  double last_contribution = 0.0;        // truncation proxy
  std::vector<std::pair<MultiIndex, McEstimate>> coefficients;
};

// Truncated V(phi_1) for the counting statistic (||phi_1|| = 1), d = 1 or 2.
VarianceResult asymptotic_variance_phi1(const CovarianceModel& m, const IndexSet& L, int q_max, double r_max,
                                        const HermiteOptions& opt = {});

// ---- normality ----

struct AndersonDarling {
  double a2 = 0.0;       // statistic with estimated mean and variance
  double a2_star = 0.0;  // small-sample modification A2 (1 + 0.75/n + 2.25/n^2)
  double p_value = 0.0;
  long n = 0;
};
AndersonDarling anderson_darling_normal(std::vector<double> x);

// ---- replication harness ----

struct CltConfig {
  CovarianceModel model = CovarianceModel::gaussian(1, 1.0);
  IndexSet L = IndexSet::all(1);
  double eta = 0.0;  // 0: default_eta
  std::vector<double> r_list;
  std::vector<double> n_list;  // window W_n = [0, n]^d
  int replicates = 500;
  int n_terms = 4096;
  std::uint64_t seed = 1;
  int threads = 0;
  long pcf_mc = 200000;  // per abscissa, for K_{eta,L}
};

struct CltStatistic {
  std::string name;
  double target = 0.0;      // rho_L or K_{eta,L}(r)
  double mean = 0.0;
  double std_error = 0.0;   // of the mean
  double scaled_var = 0.0;  // n^d Var
  double ad_p_value = 0.0;
};

struct CltRow {
  double n = 0.0;
  int replicates = 0;
  std::vector<CltStatistic> stats;
  Eigen::MatrixXd scaled_cov;  // n^d Cov of (rho_hat, k_hat(r_1), ...)
  double half_window_var_ratio = 0.0;  // Var N(left half) / Var N(W_n)
  std::vector<double> mean_count;
};

struct CltReport {
  CltConfig config;
  double rho = 0.0;
  std::vector<double> k_target;
  std::vector<CltRow> rows;
  // scaled variance ratio between consecutive n, per statistic
  std::vector<std::vector<double>> stabilization;
  nlohmann::json to_json() const;
};

CltReport clt_experiment(const CltConfig& cfg);

}  // namespace critfield
