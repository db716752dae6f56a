#pragma once
#include <Eigen/Dense>
#include <vector>

namespace critfield {

// Half-vectorization: row-major upper triangle h11, h12, ..., h1d, h22, ..., hdd.
inline int hess_size(int d) { return d * (d + 1) / 2; }
int hess_index(int d, int i, int j);
std::vector<std::pair<int, int>> hess_entries(int d);

Eigen::MatrixXd unpack_hessian(int d, const double* h);
void pack_hessian(const Eigen::MatrixXd& H, double* out);

struct HessianClass {
  double det = 0.0;
  int index = 0;       // number of negative eigenvalues
  bool morse = true;   // every |eigenvalue| > rel_tol * ||H||_F
};

HessianClass classify_hessian(int d, const double* h, double rel_tol = 1e-10);

}  // namespace critfield
