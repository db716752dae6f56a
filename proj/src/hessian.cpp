#include "critfield/hessian.hpp"

#include <cmath>

namespace critfield {

int hess_index(int d, int i, int j) {
  if (i > j) std::swap(i, j);
  return i * d - i * (i - 1) / 2 + (j - i);
}

std::vector<std::pair<int, int>> hess_entries(int d) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) e.emplace_back(i, j);
  return e;
}

Eigen::MatrixXd unpack_hessian(int d, const double* h) {
  Eigen::MatrixXd H(d, d);
  int m = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j, ++m) H(i, j) = H(j, i) = h[m];
  return H;
}

void pack_hessian(const Eigen::MatrixXd& H, double* out) {
  const int d = static_cast<int>(H.rows());
  int m = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j, ++m) out[m] = 0.5 * (H(i, j) + H(j, i));
}

namespace {

template <int N>
HessianClass classify_fixed(const double* h, double rel_tol) {
  Eigen::Matrix<double, N, N> H;
  int m = 0;
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j, ++m) H(i, j) = H(j, i) = h[m];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es;
  if constexpr (N == 3)
    es.computeDirect(H, Eigen::EigenvaluesOnly);
  else
    es.compute(H, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  double thr = rel_tol * H.norm();
  HessianClass c;
  c.det = 1.0;
  for (int i = 0; i < N; ++i) {
    c.det *= ev[i];
    if (ev[i] < 0) ++c.index;
    if (std::abs(ev[i]) <= thr) c.morse = false;
  }
  return c;
}

}  // namespace

HessianClass classify_hessian(int d, const double* h, double rel_tol) {
  HessianClass c;
  switch (d) {
    case 1:
      c.det = h[0];
      c.index = h[0] < 0;
      c.morse = h[0] != 0.0;
      return c;
    case 2: {
      double a = h[0], b = h[1], e = h[2];
      double half_tr = 0.5 * (a + e);
      double rad = std::hypot(0.5 * (a - e), b);
      double l1 = half_tr - rad, l2 = half_tr + rad;
      c.det = a * e - b * b;
      c.index = (l1 < 0) + (l2 < 0);
      double thr = rel_tol * std::sqrt(a * a + 2 * b * b + e * e);
      c.morse = std::abs(l1) > thr && std::abs(l2) > thr;
      return c;
    }
    case 3: return classify_fixed<3>(h, rel_tol);
    case 4: return classify_fixed<4>(h, rel_tol);
    default: {
      Eigen::MatrixXd H = unpack_hessian(d, h);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
      double thr = rel_tol * H.norm();
      c.det = 1.0;
      for (int i = 0; i < d; ++i) {
        double v = es.eigenvalues()[i];
        c.det *= v;
        if (v < 0) ++c.index;
        if (std::abs(v) <= thr) c.morse = false;
      }
      return c;
    }
  }
}

}  // namespace critfield
