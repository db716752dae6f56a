#include "critfield/gaussjoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "critfield/errors.hpp"
#include "critfield/hessian.hpp"

namespace critfield {

int JointDerivativeGaussian::hess_row(int point, int i, int j) const {
  return k() * d + point * hess_size(d) + hess_index(d, i, j);
}

int JointDerivativeGaussian::row_point(int row) const {
  if (row < k() * d) return row / d;
  return (row - k() * d) / hess_size(d);
}

std::vector<int> JointDerivativeGaussian::row_alpha(int row) const {
  std::vector<int> a(d, 0);
  if (row < k() * d) {
    a[row % d] = 1;
    return a;
  }
  auto e = hess_entries(d)[(row - k() * d) % hess_size(d)];
  a[e.first] += 1;
  a[e.second] += 1;
  return a;
}

JointDerivativeGaussian assemble_joint(const CovarianceModel& m, const std::vector<Eigen::VectorXd>& points) {
  JointDerivativeGaussian J;
  J.d = m.dim();
  J.points = points;
  const int k = J.k();
  if (k < 1) throw InvalidArgument("assemble_joint needs at least one point");
  for (const auto& p : points)
    if (p.size() != J.d) throw InvalidArgument("assemble_joint: point dimension mismatch");
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if ((points[a] - points[b]).norm() == 0.0) throw InvalidArgument("assemble_joint: points must be distinct");

  const int n = k * J.D();
  J.cov.resize(n, n);
  std::vector<std::vector<int>> alpha(n);
  std::vector<int> pt(n);
  for (int r = 0; r < n; ++r) {
    alpha[r] = J.row_alpha(r);
    pt[r] = J.row_point(r);
  }
  std::vector<int> ab(J.d);
  for (int r = 0; r < n; ++r) {
    for (int c = r; c < n; ++c) {
      // Cov(d^a X(s), d^b X(t)) = (-1)^{|a|} d^{a+b} c(t - s)
      int na = 0;
      for (int i = 0; i < J.d; ++i) {
        ab[i] = alpha[r][i] + alpha[c][i];
        na += alpha[r][i];
      }
      Eigen::VectorXd lag = points[pt[c]] - points[pt[r]];
      double v = partial_c(m, ab, std::span<const double>(lag.data(), J.d));
      if (na % 2) v = -v;
      J.cov(r, c) = J.cov(c, r) = v;
    }
  }
  return J;
}

namespace {

void require_nondegenerate(const Eigen::MatrixXd& S, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  double tr = S.trace();
  double thr = 1e-10 * tr / S.rows();
  if (!(es.eigenvalues().minCoeff() > thr))
    throw DegenerateJoint(what + " is singular (min eigenvalue " + std::to_string(es.eigenvalues().minCoeff()) +
                          ", threshold " + std::to_string(thr) + ")");
}

}  // namespace

ConditionalGaussian condition_hessians_on_zero_gradients(const JointDerivativeGaussian& J) {
  const int g = J.k() * J.d;
  const int h = J.k() * hess_size(J.d);
  const Eigen::MatrixXd Sgg = J.cov.topLeftCorner(g, g);
  require_nondegenerate(Sgg, "gradient covariance");
  const Eigen::MatrixXd Shg = J.cov.bottomLeftCorner(h, g);
  Eigen::LLT<Eigen::MatrixXd> llt(Sgg);
  Eigen::MatrixXd S = J.cov.bottomRightCorner(h, h) - Shg * llt.solve(Shg.transpose());
  S = 0.5 * (S + S.transpose());
  // Near the coincident-point limit the Schur complement loses digits to
  // cancellation; small negative eigenvalues are roundoff and are clipped.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  double floor = -1e-8 * J.cov.bottomRightCorner(h, h).trace();
  if (es.eigenvalues().minCoeff() < floor)
    throw DegenerateJoint("conditional Hessian covariance is not positive semidefinite");
  if (es.eigenvalues().minCoeff() < 0) {
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    S = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    S = 0.5 * (S + S.transpose());
  }
  ConditionalGaussian out;
  out.cov = S;
  out.context = "Hessians at " + std::to_string(J.k()) + " point(s) given zero gradients";
  return out;
}

double density_at_zero_gradients(const CovarianceModel& m, double r) {
  auto chk = check_pairwise_nondegeneracy(m, r);
  if (!chk.ok) throw DegenerateJoint("two-point gradient law degenerate at r=" + std::to_string(r));
  const int d = m.dim();
  return std::pow(2.0 * std::numbers::pi, -d) * std::pow(2.0, 1 - d) * std::pow(chk.margin1, 0.5 * (1 - d)) /
         std::sqrt(chk.margin2);
}

double gradient_density_at_zero(const JointDerivativeGaussian& J) {
  const int g = J.k() * J.d;
  const Eigen::MatrixXd Sgg = J.cov.topLeftCorner(g, g);
  require_nondegenerate(Sgg, "gradient covariance");
  Eigen::LLT<Eigen::MatrixXd> llt(Sgg);
  double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return std::exp(-0.5 * g * std::log(2.0 * std::numbers::pi) - 0.5 * logdet);
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  double tol = 1e-10 * std::max(std::abs(A.trace()), 1e-300);
  if (ev.minCoeff() < -tol)
    throw DegenerateJoint("covariance not positive semidefinite (min eigenvalue " + std::to_string(ev.minCoeff()) + ")");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-14 * std::abs(ev.maxCoeff()))) throw DegenerateJoint("matrix not positive definite");
  ev = ev.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

MvnSampler::MvnSampler(const Eigen::MatrixXd& cov) : n_(static_cast<int>(cov.rows())), A_(sym_sqrt(cov)) {
  a_.resize(static_cast<size_t>(n_) * n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) a_[static_cast<size_t>(i) * n_ + j] = A_(i, j);
}

void MvnSampler::draw(Rng& rng, double* out, double* z) const {
  double buf[64];
  std::vector<double> big;
  double* zz = z;
  if (!zz) {
    if (n_ <= 64) {
      zz = buf;
    } else {
      big.resize(n_);
      zz = big.data();
    }
  }
  for (int i = 0; i < n_; ++i) zz[i] = rng.normal();
  const double* a = a_.data();
  for (int i = 0; i < n_; ++i, a += n_) {
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += a[j] * zz[j];
    out[i] = s;
  }
}

Eigen::MatrixXd sample_mvn(const Eigen::MatrixXd& cov, long n, Rng& rng) {
  MvnSampler s(cov);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, s.dim());
  for (long i = 0; i < n; ++i) s.draw(rng, out.row(i).data());
  return out;
}

void goe_eigenvalues(int m, Rng& rng, double* out) {
  static const double off = std::sqrt(0.5);
  if (m == 1) {
    out[0] = rng.normal();
    return;
  }
  if (m == 2) {
    double a = rng.normal(), c = rng.normal(), b = off * rng.normal();
    double mid = 0.5 * (a + c), rad = std::hypot(0.5 * (a - c), b);
    out[0] = mid - rad;
    out[1] = mid + rad;
    return;
  }
  if (m == 3) {
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i) M(i, i) = rng.normal();
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) M(i, j) = M(j, i) = off * rng.normal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(M, Eigen::EigenvaluesOnly);
    for (int i = 0; i < 3; ++i) out[i] = es.eigenvalues()[i];
    return;
  }
  Eigen::MatrixXd M(m, m);
  for (int i = 0; i < m; ++i) M(i, i) = rng.normal();
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) M(i, j) = M(j, i) = off * rng.normal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  for (int i = 0; i < m; ++i) out[i] = es.eigenvalues()[i];
}

GOESample sample_goe(int m, Rng& rng) {
  if (m < 1) throw InvalidArgument("sample_goe needs m >= 1");
  GOESample s;
  s.m = m;
  s.eigenvalues.resize(m);
  goe_eigenvalues(m, rng, s.eigenvalues.data());
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end());
  return s;
}

}  // namespace critfield
