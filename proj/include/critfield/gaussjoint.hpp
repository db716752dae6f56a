#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "critfield/covmodels.hpp"
#include "critfield/rng.hpp"

namespace critfield {

// Joint law of [grad(t_1..t_k), hess(t_1..t_k)], Hessians half-vectorized.
struct JointDerivativeGaussian {
  int d = 0;
  std::vector<Eigen::VectorXd> points;
  Eigen::MatrixXd cov;

  int k() const { return static_cast<int>(points.size()); }
  int D() const { return d + d * (d + 1) / 2; }
  int grad_row(int point, int i) const { return point * d + i; }
  int hess_row(int point, int i, int j) const;
  // multi-index (length d) and point of a row
  std::vector<int> row_alpha(int row) const;
  int row_point(int row) const;
};

JointDerivativeGaussian assemble_joint(const CovarianceModel& m, const std::vector<Eigen::VectorXd>& points);

struct ConditionalGaussian {
  Eigen::MatrixXd cov;
  std::string context;
};

ConditionalGaussian condition_hessians_on_zero_gradients(const JointDerivativeGaussian& joint);

// f_{V(r)}(0,0) for the gradients at two points a distance r apart.
double density_at_zero_gradients(const CovarianceModel& m, double r);
// Generic N(0, Sigma_GG) density at the origin for the stacked gradients.
double gradient_density_at_zero(const JointDerivativeGaussian& joint);

// Symmetric square root; negative eigenvalues within -1e-10 trace are clamped.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& A);
// Symmetric inverse square root of a positive definite matrix.
Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& A);

class MvnSampler {
 public:
  explicit MvnSampler(const Eigen::MatrixXd& cov);
  int dim() const { return n_; }
  // out = A z with A = cov^{1/2} and z standard normal; z may be null.
  void draw(Rng& rng, double* out, double* z = nullptr) const;
  const Eigen::MatrixXd& factor() const { return A_; }

 private:
  int n_;
  Eigen::MatrixXd A_;
  std::vector<double> a_;  // row-major copy of A_
};

// n draws as rows
Eigen::MatrixXd sample_mvn(const Eigen::MatrixXd& cov, long n, Rng& rng);

struct GOESample {
  int m = 0;
  std::vector<double> eigenvalues;  // ascending
};

GOESample sample_goe(int m, Rng& rng);
// Allocation-free variant used in Monte Carlo loops; writes m sorted eigenvalues.
void goe_eigenvalues(int m, Rng& rng, double* out);

}  // namespace critfield
