#include "critfield/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "critfield/errors.hpp"
#include "critfield/gaussjoint.hpp"
#include "critfield/hessian.hpp"

namespace critfield {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// joint rows reordered to (grad(p), hess(p)) blocks per point
std::vector<int> per_point_order(const JointDerivativeGaussian& J) {
  std::vector<int> order;
  auto entries = hess_entries(J.d);
  for (int p = 0; p < J.k(); ++p) {
    for (int i = 0; i < J.d; ++i) order.push_back(J.grad_row(p, i));
    for (auto [i, j] : entries) order.push_back(J.hess_row(p, i, j));
  }
  return order;
}

Eigen::MatrixXd permuted(const Eigen::MatrixXd& A, const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = A(order[i], order[j]);
  return B;
}

Eigen::VectorXd unit_e1(int d, double r) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[0] = r;
  return v;
}

int max_order(const std::vector<MultiIndex>& a) {
  int q = 0;
  for (auto& x : a)
    for (int k : x) q = std::max(q, k);
  return q;
}

void check_nonnegative(const MultiIndex& a, int len) {
  if (static_cast<int>(a.size()) != len)
    throw InvalidArgument("multi-index has length " + std::to_string(a.size()) + ", expected " + std::to_string(len));
  for (int k : a)
    if (k < 0) throw InvalidArgument("multi-index entries must be nonnegative");
}

}  // namespace

// ---------------------------------------------------------------- estimators

double rho_hat(const PointPattern& p, const IndexSet& L) {
  long n = 0;
  for (auto& x : p.points) n += L.contains(x.index);
  return n / p.window.volume();
}

double translation_overlap(const Window& w, const double* h) {
  double v = 1.0;
  for (int i = 0; i < w.dim(); ++i) v *= std::max(0.0, w.side(i) - std::abs(h[i]));
  return v;
}

double default_eta(double rho, int d) { return 0.05 * std::pow(rho, -1.0 / d); }

std::vector<double> k_hat_eta(const PointPattern& p, const IndexSet& L, double eta, const std::vector<double>& r_list) {
  if (r_list.empty()) return {};
  if (!(eta > 0)) throw InvalidArgument("eta must be positive");
  for (size_t i = 0; i < r_list.size(); ++i) {
    if (!(r_list[i] > eta)) throw InvalidArgument("every r must exceed eta");
    if (!(r_list[i] < p.window.min_side())) throw InvalidArgument("r must be below the smallest window side");
    if (i && !(r_list[i] > r_list[i - 1])) throw InvalidArgument("r list must be increasing");
  }
  double rho = rho_hat(p, L);
  if (rho == 0.0) throw EmptyPattern("no points with index in " + L.str());
  const int d = p.d;
  const double rmax = r_list.back();
  std::vector<Eigen::VectorXd> x;
  for (auto& c : p.points)
    if (L.contains(c.index)) x.push_back(c.location);
  std::sort(x.begin(), x.end(), [](auto& a, auto& b) { return a[0] < b[0]; });
  // sums per shell [r_{k-1}, r_k], then cumulated
  std::vector<double> shell(r_list.size(), 0.0);
  std::vector<double> h(d);
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = i + 1; j < x.size() && x[j][0] - x[i][0] <= rmax; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        h[k] = x[j][k] - x[i][k];
        s += h[k] * h[k];
      }
      double dist = std::sqrt(s);
      if (dist < eta || dist > rmax) continue;
      size_t bin = std::lower_bound(r_list.begin(), r_list.end(), dist) - r_list.begin();
      shell[bin] += 2.0 / translation_overlap(p.window, h.data());  // both orders
    }
  std::vector<double> out(r_list.size());
  double acc = 0.0;
  for (size_t k = 0; k < r_list.size(); ++k) {
    acc += shell[k];
    out[k] = acc / (rho * rho);
  }
  return out;
}

double k_hat_eta(const PointPattern& p, const IndexSet& L, double eta, double r) {
  return k_hat_eta(p, L, eta, std::vector<double>{r})[0];
}

// ---------------------------------------------------------------- Hermite

double hermite_poly(int n, double x) {
  if (n < 0) throw InvalidArgument("Hermite degree must be nonnegative");
  if (n == 0) return 1.0;
  double h0 = 1.0, h1 = x;
  for (int k = 1; k < n; ++k) {
    double h2 = x * h1 - k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

double hermite_tensor(std::span<const int> a, std::span<const double> y) {
  if (a.size() != y.size()) throw InvalidArgument("multi-index and point differ in length");
  double v = 1.0;
  for (size_t i = 0; i < a.size(); ++i) v *= hermite_poly(a[i], y[i]);
  return v;
}

double multi_factorial(std::span<const int> a) {
  double f = 1.0;
  for (int k : a) f *= std::tgamma(k + 1.0);
  return f;
}

std::vector<MultiIndex> multi_indices(int D, int q) {
  std::vector<MultiIndex> out;
  MultiIndex a(D, 0);
  auto rec = [&](auto&& self, int i, int left) -> void {
    if (i == D - 1) {
      a[i] = left;
      out.push_back(a);
      return;
    }
    for (int k = left; k >= 0; --k) {
      a[i] = k;
      self(self, i + 1, left - k);
    }
  };
  if (D > 0 && q >= 0) rec(rec, 0, q);
  return out;
}

Eigen::MatrixXd sigma_single(const CovarianceModel& m) {
  auto J = assemble_joint(m, {Eigen::VectorXd::Zero(m.dim())});
  return permuted(J.cov, per_point_order(J));
}

Eigen::MatrixXd sigma_pair(const CovarianceModel& m, double r) {
  auto J = assemble_joint(m, {Eigen::VectorXd::Zero(m.dim()), unit_e1(m.dim(), r)});
  return permuted(J.cov, per_point_order(J));
}

Eigen::MatrixXd standardized_cross_cov(const CovarianceModel& m, const Eigen::VectorXd& lag) {
  const int d = m.dim(), D = d + hess_size(d);
  if (lag.size() != d) throw InvalidArgument("lag dimension differs from model dimension");
  if (lag.norm() == 0.0) return Eigen::MatrixXd::Identity(D, D);
  auto J = assemble_joint(m, {Eigen::VectorXd::Zero(d), lag});
  Eigen::MatrixXd S = permuted(J.cov, per_point_order(J));
  Eigen::MatrixXd W = sym_inv_sqrt(S.topLeftCorner(D, D));
  return W * S.topRightCorner(D, D) * W;
}

std::vector<McEstimate> hermite_coeffs_da(const CovarianceModel& m, const IndexSet& L,
                                          const std::vector<MultiIndex>& a, const HermiteOptions& opt) {
  const int d = m.dim(), H = hess_size(d), D = d + H;
  if (L.dim() != d) throw InvalidArgument("index set dimension differs from model dimension");
  spectral_moment(m, 3);  // (C1)[3]: lambda_6 finite
  for (auto& x : a) check_nonnegative(x, D);
  const double lambda2 = spectral_moment(m, 1);
  Eigen::MatrixXd S2 = sigma_single(m).bottomRightCorner(H, H);
  MvnSampler sampler(S2);  // symmetric root, so Sigma_2^{-1/2} X'' is the driving z

  const int K = static_cast<int>(a.size());
  std::vector<double> pre(K);
  std::vector<int> live;
  for (int k = 0; k < K; ++k) {
    double hz = 1.0;
    for (int i = 0; i < d; ++i) hz *= hermite_poly(a[k][i], 0.0);
    pre[k] = hz / (multi_factorial(a[k]) * std::pow(2.0 * kPi * lambda2, 0.5 * d));
    if (hz != 0.0) live.push_back(k);
  }
  const int q = max_order(a);
  auto est = run_mc_vec(opt.mc, static_cast<int>(live.size()), [&](Rng& rng, long n, long& disc, double* sums) {
    std::vector<double> h(H), z(H), hz(static_cast<size_t>(H) * (q + 1));
    auto accumulate = [&](double sign) {
      for (int i = 0; i < H; ++i) h[i] *= sign;
      HessianClass c = classify_hessian(d, h.data());
      if (!c.morse) return false;
      if (!L.contains(c.index)) return true;
      const double w = std::abs(c.det);
      for (int i = 0; i < H; ++i) {
        const double y = sign * z[i];
        double h0 = 1.0, h1 = y;
        hz[i * (q + 1)] = 1.0;
        if (q >= 1) hz[i * (q + 1) + 1] = y;
        for (int k = 1; k < q; ++k) {
          double h2 = y * h1 - k * h0;
          h0 = h1;
          h1 = h2;
          hz[i * (q + 1) + k + 1] = h2;
        }
      }
      for (size_t s = 0; s < live.size(); ++s) {
        const MultiIndex& ak = a[live[s]];
        double v = w;
        for (int i = 0; i < H; ++i) v *= hz[i * (q + 1) + ak[d + i]];
        sums[s] += opt.antithetic ? 0.5 * v : v;
      }
      return true;
    };
    for (long i = 0; i < n; ++i) {
      sampler.draw(rng, h.data(), z.data());
      bool ok = accumulate(1.0);
      if (ok && opt.antithetic) ok = accumulate(-1.0);
      if (!ok) ++disc;
    }
  });
  std::vector<McEstimate> out(K);
  for (size_t s = 0; s < live.size(); ++s) out[live[s]] = est[s];
  for (int k = 0; k < K; ++k) {
    out[k].value *= pre[k];
    out[k].std_error *= std::abs(pre[k]);
    if (out[k].n_used == 0) out[k].n_used = opt.mc.n_samples;  // exact zero from H_odd(0)
  }
  return out;
}

McEstimate hermite_coeff_da(const CovarianceModel& m, const IndexSet& L, const MultiIndex& a,
                            const HermiteOptions& opt) {
  return hermite_coeffs_da(m, L, {a}, opt)[0];
}

std::vector<McEstimate> hermite_coeffs_da_r(const CovarianceModel& m, const IndexSet& L,
                                            const std::vector<MultiIndex>& a, double r, const HermiteOptions& opt) {
  const int d = m.dim(), H = hess_size(d), D = d + H;
  if (L.dim() != d) throw InvalidArgument("index set dimension differs from model dimension");
  if (m.family() == Family::Matern && !(m.nu() > 5.0))
    throw InsufficientSmoothness("two-point Hermite coefficients need nu > 5");
  if (m.family() == Family::RandomWave)
    throw DegenerateJoint("random wave: (grad, Hessian) at two points is degenerate");
  for (auto& x : a) check_nonnegative(x, 2 * D);
  TwoPointLaw law = two_point_law(m, r);
  Eigen::MatrixXd W = sym_inv_sqrt(permuted(law.joint.cov, per_point_order(law.joint)));
  // columns of W acting on the Hessian slots of (0, H1, 0, H2)
  Eigen::MatrixXd P(2 * D, 2 * H);
  for (int p = 0; p < 2; ++p)
    for (int i = 0; i < H; ++i) P.col(p * H + i) = W.col(p * D + d + i);
  MvnSampler sampler(law.conditional.cov);

  const int K = static_cast<int>(a.size());
  const int q = max_order(a);
  auto est = run_mc_vec(opt.mc, K, [&](Rng& rng, long n, long& disc, double* sums) {
    Eigen::VectorXd h(2 * H), y(2 * D);
    std::vector<double> hz(static_cast<size_t>(2 * D) * (q + 1));
    auto accumulate = [&](double sign) {
      Eigen::VectorXd hs = sign * h;
      HessianClass c0 = classify_hessian(d, hs.data()), c1 = classify_hessian(d, hs.data() + H);
      if (!c0.morse || !c1.morse) return false;
      if (!L.contains(c0.index) || !L.contains(c1.index)) return true;
      const double w = std::abs(c0.det * c1.det);
      y.noalias() = P * hs;
      for (int i = 0; i < 2 * D; ++i) {
        double h0 = 1.0, h1 = y[i];
        hz[i * (q + 1)] = 1.0;
        if (q >= 1) hz[i * (q + 1) + 1] = h1;
        for (int k = 1; k < q; ++k) {
          double h2 = y[i] * h1 - k * h0;
          h0 = h1;
          h1 = h2;
          hz[i * (q + 1) + k + 1] = h2;
        }
      }
      for (int k = 0; k < K; ++k) {
        double v = w;
        for (int i = 0; i < 2 * D; ++i) v *= hz[i * (q + 1) + a[k][i]];
        sums[k] += opt.antithetic ? 0.5 * v : v;
      }
      return true;
    };
    for (long i = 0; i < n; ++i) {
      sampler.draw(rng, h.data());
      bool ok = accumulate(1.0);
      if (ok && opt.antithetic) ok = accumulate(-1.0);
      if (!ok) ++disc;
    }
  });
  for (int k = 0; k < K; ++k) {
    double pre = law.density / multi_factorial(a[k]);
    est[k].value *= pre;
    est[k].std_error *= pre;
  }
  return est;
}

McEstimate hermite_coeff_da_r(const CovarianceModel& m, const IndexSet& L, const MultiIndex& a, double r,
                              const HermiteOptions& opt) {
  return hermite_coeffs_da_r(m, L, {a}, r, opt)[0];
}

double mehler_sum(const Eigen::MatrixXd& R, std::span<const int> a, std::span<const int> b) {
  const int p = static_cast<int>(a.size()), pp = static_cast<int>(b.size());
  if (R.rows() != p || R.cols() != pp) throw InvalidArgument("cross-covariance shape differs from multi-indices");
  int sa = 0, sb = 0;
  for (int k : a) sa += k;
  for (int k : b) sb += k;
  if (sa != sb) return 0.0;
  std::vector<int> colleft(b.begin(), b.end());
  std::vector<double> inv_fact(sa + 1, 1.0);
  for (int k = 1; k <= sa; ++k) inv_fact[k] = inv_fact[k - 1] / k;
  // row i distributes a_i over the columns; j walks the columns
  auto rec = [&](auto&& self, int i, int j, int left, double prod) -> double {
    if (i == p) return prod;
    if (j == pp - 1) {
      if (left > colleft[j]) return 0.0;
      double f = left ? std::pow(R(i, j), left) * inv_fact[left] : 1.0;
      colleft[j] -= left;
      double v = (f == 0.0) ? 0.0 : self(self, i + 1, 0, i + 1 < p ? a[i + 1] : 0, prod * f);
      colleft[j] += left;
      return v;
    }
    double total = 0.0;
    const int top = std::min(left, colleft[j]);
    for (int k = 0; k <= top; ++k) {
      double f = k ? std::pow(R(i, j), k) * inv_fact[k] : 1.0;
      if (f == 0.0) continue;
      colleft[j] -= k;
      total += self(self, i, j + 1, left - k, prod * f);
      colleft[j] += k;
    }
    return total;
  };
  double s = p ? rec(rec, 0, 0, a[0], 1.0) : 1.0;
  return s * multi_factorial(a) * multi_factorial(b);
}

double mehler_gamma(const CovarianceModel& m, const MultiIndex& a, const MultiIndex& b, const Eigen::VectorXd& lag) {
  const int D = m.dim() + hess_size(m.dim());
  check_nonnegative(a, D);
  check_nonnegative(b, D);
  int qa = 0, qb = 0;
  for (int k : a) qa += k;
  for (int k : b) qb += k;
  if (qa != qb) throw InvalidArgument("mehler_gamma needs |a| = |b|");
  if (qa > 4) throw InvalidArgument("mehler_gamma supports |a| <= 4");
  return mehler_sum(standardized_cross_cov(m, lag), a, b);
}

VarianceResult asymptotic_variance_phi1(const CovarianceModel& m, const IndexSet& L, int q_max, double r_max,
                                        const HermiteOptions& opt) {
  const int d = m.dim(), D = d + hess_size(d);
  if (d > 2) throw UnsupportedDimension("asymptotic variance is implemented for d <= 2");
  if (q_max < 1) throw InvalidArgument("q_max must be >= 1");
  if (!(r_max > 0)) throw InvalidArgument("r_max must be positive");
  if (m.family() == Family::RandomWave)
    throw IntegrabilityViolation("random wave correlations are not integrable (condition C4 fails)");
  auto integ = check_integrability(m);
  if (!integ.ok) throw IntegrabilityViolation(integ.verdict);

  VarianceResult res;
  res.q_max = q_max;
  res.r_max = r_max;
  std::vector<MultiIndex> all;
  for (int q = 1; q <= q_max; ++q) {
    if (L.is_symmetric() && q % 2) continue;
    res.orders.push_back(q);
    for (auto& a : multi_indices(D, q)) all.push_back(a);
  }
  auto coef = hermite_coeffs_da(m, L, all, opt);
  for (size_t k = 0; k < all.size(); ++k) res.coefficients.emplace_back(all[k], coef[k]);

  // quadrature nodes over the ball of radius r_max: Gauss-Legendre panels of width phi/4
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> weights;
  const int panels = std::max(4, static_cast<int>(std::ceil(r_max / (0.25 * m.phi()))));
  const double hpan = r_max / panels;
  for (int pnl = 0; pnl < panels; ++pnl)
    for (int g = 0; g < 8; ++g) {
      double r = (pnl + 0.5 * (gx[g] + 1.0)) * hpan, wr = 0.5 * hpan * gw[g];
      if (d == 1) {
        nodes.push_back(unit_e1(1, r));
        weights.push_back(wr);
        nodes.push_back(unit_e1(1, -r));
        weights.push_back(wr);
      } else {
        const int M = 48;
        for (int k = 0; k < M; ++k) {
          double th = 2.0 * kPi * k / M;
          Eigen::VectorXd t(2);
          t << r * std::cos(th), r * std::sin(th);
          nodes.push_back(t);
          weights.push_back(wr * r * 2.0 * kPi / M);
        }
      }
    }
  std::vector<Eigen::MatrixXd> R(nodes.size());
  for (size_t k = 0; k < nodes.size(); ++k) R[k] = standardized_cross_cov(m, nodes[k]);

  size_t off = 0;
  for (int q : res.orders) {
    auto idx = multi_indices(D, q);
    std::vector<std::pair<const MultiIndex*, double>> live;
    for (size_t k = 0; k < idx.size(); ++k)
      if (coef[off + k].value != 0.0) live.push_back({&all[off + k], coef[off + k].value});
    off += idx.size();
    double s = 0.0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      double g = 0.0;
      for (auto& [a, da] : live)
        for (auto& [b, db] : live) g += da * db * mehler_sum(R[k], *a, *b);
      s += weights[k] * g;
    }
    res.contribution.push_back(s);
    res.value += s;
  }
  res.last_contribution = res.contribution.empty() ? 0.0 : res.contribution.back();
  return res;
}

// ---------------------------------------------------------------- normality

AndersonDarling anderson_darling_normal(std::vector<double> x) {
  AndersonDarling r;
  const long n = static_cast<long>(x.size());
  r.n = n;
  if (n < 8) throw InvalidArgument("Anderson-Darling needs at least 8 observations");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  if (!(sd > 0)) {
    r.a2 = r.a2_star = INFINITY;
    r.p_value = 0.0;
    return r;
  }
  std::sort(x.begin(), x.end());
  auto logcdf = [](double z) { return std::log(std::max(0.5 * std::erfc(-z / std::sqrt(2.0)), 1e-300)); };
  auto logsf = [](double z) { return std::log(std::max(0.5 * std::erfc(z / std::sqrt(2.0)), 1e-300)); };
  double s = 0.0;
  for (long i = 0; i < n; ++i) {
    double zi = (x[i] - mean) / sd, zr = (x[n - 1 - i] - mean) / sd;
    s += (2.0 * i + 1.0) * (logcdf(zi) + logsf(zr));
  }
  r.a2 = -n - s / n;
  const double a = r.a2 * (1.0 + 0.75 / n + 2.25 / (double(n) * n));
  r.a2_star = a;
  double p;
  if (a >= 0.6)
    p = std::exp(1.2937 - 5.709 * a + 0.0186 * a * a);
  else if (a >= 0.34)
    p = std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
  else if (a >= 0.2)
    p = 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
  else
    p = 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------- harness

json CltReport::to_json() const {
  json rows_j = json::array();
  for (auto& row : rows) {
    json st = json::array();
    for (auto& s : row.stats)
      st.push_back({{"name", s.name},
                    {"target", s.target},
                    {"mean", s.mean},
                    {"std_error", s.std_error},
                    {"scaled_var", s.scaled_var},
                    {"ad_p_value", s.ad_p_value}});
    std::vector<std::vector<double>> cov(row.scaled_cov.rows(), std::vector<double>(row.scaled_cov.cols()));
    for (int i = 0; i < row.scaled_cov.rows(); ++i)
      for (int j = 0; j < row.scaled_cov.cols(); ++j) cov[i][j] = row.scaled_cov(i, j);
    rows_j.push_back({{"n", row.n},
                      {"replicates", row.replicates},
                      {"stats", st},
                      {"scaled_cov", cov},
                      {"half_window_var_ratio", row.half_window_var_ratio}});
  }
  return {{"model", config.model.describe()},
          {"L", config.L.str()},
          {"eta", config.eta},
          {"r", config.r_list},
          {"n", config.n_list},
          {"replicates", config.replicates},
          {"n_terms", config.n_terms},
          {"seed", config.seed},
          {"rho", rho},
          {"k_target", k_target},
          {"rows", rows_j},
          {"stabilization", stabilization}};
}

CltReport clt_experiment(const CltConfig& cfg_in) {
  CltReport rep;
  rep.config = cfg_in;
  CltConfig& cfg = rep.config;
  const CovarianceModel& m = cfg.model;
  const int d = m.dim();
  if (cfg.L.dim() != d) throw InvalidArgument("index set dimension differs from model dimension");
  if (m.family() == Family::RandomWave)
    throw IntegrabilityViolation("random wave correlations are not integrable (condition C4 fails)");
  if (cfg.replicates < 100) throw InvalidArgument("the CLT harness needs at least 100 replicates");
  if (cfg.n_list.empty()) throw InvalidArgument("n list is empty");
  rep.rho = intensity(m, cfg.L);
  if (cfg.eta <= 0) cfg.eta = default_eta(rep.rho, d);
  std::sort(cfg.r_list.begin(), cfg.r_list.end());
  for (double r : cfg.r_list)
    if (!(r > cfg.eta)) throw InvalidArgument("every r must exceed eta");

  if (!cfg.r_list.empty()) {
    // pcf on a geometric grid over [eta, max r]
    const double lo = std::max(cfg.eta, pcf_cutoff(m)), hi = cfg.r_list.back();
    std::vector<double> grid;
    const int G = 60;
    for (int i = 0; i < G; ++i) grid.push_back(lo * std::pow(hi / lo, double(i) / (G - 1)));
    McOptions o;
    o.n_samples = cfg.pcf_mc;
    o.seed = derive_seed(cfg.seed, 77);
    o.threads = cfg.threads;
    SummaryCurve g = pcf_curve(m, cfg.L, cfg.L, grid, o);
    auto expo = small_r_exponent(d, cfg.L, cfg.L);
    for (double r : cfg.r_list) rep.k_target.push_back(kfun_eta(g, d, cfg.eta, r, expo));
  }

  const int S = 1 + static_cast<int>(cfg.r_list.size());
  for (size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    const double n = cfg.n_list[ni];
    Window w = Window::cube(d, 0.0, n);
    std::vector<std::vector<double>> vals(cfg.replicates, std::vector<double>(S));
    std::vector<double> half(cfg.replicates), full(cfg.replicates);
    std::vector<std::vector<long>> counts(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](int r) {
      auto f = simulate_spectral(m, cfg.n_terms, w, derive_seed(cfg.seed, 1000 * ni + r + 1));
      ExtractionConfig ec;
      ec.threads = 1;
      PointPattern p = extract(f, w, ec);
      vals[r][0] = rho_hat(p, cfg.L);
      if (S > 1) {
        auto k = vals[r][0] > 0 ? k_hat_eta(p, cfg.L, cfg.eta, cfg.r_list) : std::vector<double>(S - 1, 0.0);
        for (int s = 1; s < S; ++s) vals[r][s] = k[s - 1];
      }
      long nh = 0, nf = 0;
      for (auto& c : p.points)
        if (cfg.L.contains(c.index)) {
          ++nf;
          nh += c.location[0] < 0.5 * n;
        }
      half[r] = static_cast<double>(nh);
      full[r] = static_cast<double>(nf);
      counts[r] = counts_by_index(p);
    });

    CltRow row;
    row.n = n;
    row.replicates = cfg.replicates;
    const double R = cfg.replicates, scale = std::pow(n, d);
    Eigen::MatrixXd X(cfg.replicates, S);
    for (int r = 0; r < cfg.replicates; ++r)
      for (int s = 0; s < S; ++s) X(r, s) = vals[r][s];
    Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd C = X.rowwise() - mean;
    Eigen::MatrixXd cov = (C.transpose() * C) / (R - 1.0);
    row.scaled_cov = scale * cov;
    for (int s = 0; s < S; ++s) {
      CltStatistic st;
      st.name = s == 0 ? "rho_hat" : "k_hat(" + std::to_string(cfg.r_list[s - 1]) + ")";
      st.target = s == 0 ? rep.rho : rep.k_target[s - 1];
      st.mean = mean[s];
      st.std_error = std::sqrt(cov(s, s) / R);
      st.scaled_var = scale * cov(s, s);
      std::vector<double> col(X.col(s).data(), X.col(s).data() + cfg.replicates);
      st.ad_p_value = anderson_darling_normal(col).p_value;
      row.stats.push_back(st);
    }
    auto var = [&](const std::vector<double>& v) {
      double mu = 0.0, ss = 0.0;
      for (double x : v) mu += x;
      mu /= v.size();
      for (double x : v) ss += (x - mu) * (x - mu);
      return ss / (v.size() - 1.0);
    };
    row.half_window_var_ratio = var(half) / var(full);
    row.mean_count.assign(d + 1, 0.0);
    for (auto& c : counts)
      for (int l = 0; l <= d; ++l) row.mean_count[l] += c[l] / R;
    rep.rows.push_back(std::move(row));
  }
  rep.stabilization.assign(S, {});
  for (size_t k = 1; k < rep.rows.size(); ++k)
    for (int s = 0; s < S; ++s)
      rep.stabilization[s].push_back(rep.rows[k].stats[s].scaled_var / rep.rows[k - 1].stats[s].scaled_var);
  return rep;
}

}  // namespace critfield
