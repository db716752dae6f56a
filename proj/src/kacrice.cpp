#include "critfield/kacrice.hpp"

#include <algorithm>
#include <math.h>  // boost 1.74 pchip calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "critfield/errors.hpp"
#include "critfield/hessian.hpp"

namespace critfield {

namespace {

constexpr double kPi = std::numbers::pi;

// Exact fractions for d <= 3; the d = 4 values come from deterministic
// quadrature over ordered GOE eigenvalues (rho_0 + rho_1 = 1/2 by symmetry).
constexpr double kD4MinFraction = 0.059885777990;

double unit_total(int d) {
  switch (d) {
    case 1: return std::sqrt(3.0) / kPi;
    case 2: return 2.0 / (kPi * std::sqrt(3.0));
    case 3: return 29.0 / (6.0 * kPi * kPi * std::sqrt(3.0));
    case 4: return 25.0 / (6.0 * kPi * kPi * std::sqrt(3.0));
  }
  throw UnsupportedDimension("closed-form intensities exist for d <= 4 only (d=" + std::to_string(d) +
                             "); use intensity_goe_mc");
}

double log_kappa(int m) {
  double v = -0.5 * m * std::log(2.0 * kPi) + m * std::lgamma(1.5);
  for (int q = 1; q <= m; ++q) v -= std::lgamma(1.0 + 0.5 * q);
  return v;
}

double goe_prefactor(int d, double mratio) {
  return std::exp(log_kappa(d) - log_kappa(d + 1)) / ((d + 1) * std::pow(kPi, 0.5 * (d + 1))) *
         std::pow(mratio, 0.5 * d);
}

double unit_intensity(int d, const IndexSet& L) {
  double f = 0.0;
  for (int l : L.members()) f += intensity_fraction(d, l);
  return unit_total(d) * f;
}

}  // namespace

IndexSet::IndexSet(int d, std::vector<int> members) : d_(d) {
  if (d < 1) throw InvalidArgument("index set dimension must be >= 1");
  for (int l : members) {
    if (l < 0 || l > d) throw InvalidArgument("index " + std::to_string(l) + " outside 0.." + std::to_string(d));
    mask_ |= 1u << l;
  }
  if (mask_ == 0) throw InvalidArgument("index set must be nonempty");
  for (int l = 0; l <= d; ++l)
    if ((mask_ >> l) & 1u) members_.push_back(l);
}

IndexSet IndexSet::all(int d) {
  std::vector<int> v(d + 1);
  for (int l = 0; l <= d; ++l) v[l] = l;
  return IndexSet(d, v);
}

IndexSet IndexSet::parse(int d, const std::string& spec) {
  if (spec == "all") return all(d);
  if (spec == "extrema") return IndexSet(d, {0, d});
  if (spec == "maxima") return IndexSet(d, {d});
  if (spec == "minima") return IndexSet(d, {0});
  if (spec == "saddles") {
    std::vector<int> v;
    for (int l = 1; l < d; ++l) v.push_back(l);
    return IndexSet(d, v);
  }
  std::vector<int> v;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t pos = 0;
      int l = std::stoi(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      v.push_back(l);
    } catch (const std::exception&) {
      throw InvalidArgument("cannot parse index set '" + spec + "'");
    }
  }
  return IndexSet(d, v);
}

bool IndexSet::is_symmetric() const {
  for (int l : members_)
    if (!contains(d_ - l)) return false;
  return true;
}

std::string IndexSet::str() const {
  std::string s = "{";
  for (size_t i = 0; i < members_.size(); ++i) s += (i ? "," : "") + std::to_string(members_[i]);
  return s + "}";
}

double intensity_fraction(int d, int l) {
  if (l < 0 || l > d) throw InvalidArgument("index outside 0..d");
  switch (d) {
    case 1: return 0.5;
    case 2: return l == 1 ? 0.5 : 0.25;
    case 3: {
      double a = (29.0 - 6.0 * std::sqrt(6.0)) / 116.0;
      return (l == 0 || l == 3) ? a : 0.5 - a;
    }
    case 4:
      if (l == 0 || l == 4) return kD4MinFraction;
      if (l == 1 || l == 3) return 0.25;
      return 0.5 - 2.0 * kD4MinFraction;
  }
  throw UnsupportedDimension("closed-form intensity fractions exist for d <= 4 only");
}

double intensity_closed_form(const CovarianceModel& m, const IndexSet& L) {
  const int d = m.dim();
  if (L.dim() != d) throw InvalidArgument("index set dimension differs from model dimension");
  if (d > 4) unit_total(d);
  return unit_intensity(d, L) * std::pow(moment_ratio(m), 0.5 * d);
}

std::vector<McEstimate> intensity_goe_mc_all(const CovarianceModel& m, const McOptions& opt) {
  const int d = m.dim();
  const double pre = goe_prefactor(d, moment_ratio(m));
  std::vector<McEstimate> out(d + 1);
  // one pass per index keeps run_mc simple; the streams coincide, so all
  // indices see the same GOE draws
  for (int l = 0; l <= d; ++l) {
    McEstimate e = run_mc(opt, [&](Rng& rng, long n, long&) {
      double ev[16];
      std::vector<double> big;
      double* buf = ev;
      if (d + 1 > 16) {
        big.resize(d + 1);
        buf = big.data();
      }
      double s = 0.0;
      for (long i = 0; i < n; ++i) {
        goe_eigenvalues(d + 1, rng, buf);
        std::nth_element(buf, buf + l, buf + d + 1);
        s += std::exp(-0.5 * buf[l] * buf[l]);
      }
      return s;
    });
    e.value *= pre;
    e.std_error *= pre;
    out[l] = e;
  }
  return out;
}

McEstimate intensity_goe_mc(const CovarianceModel& m, int ell, const McOptions& opt) {
  const int d = m.dim();
  if (ell < 0 || ell > d) throw InvalidArgument("index outside 0..d");
  const double pre = goe_prefactor(d, moment_ratio(m));
  McEstimate e = run_mc(opt, [&](Rng& rng, long n, long&) {
    std::vector<double> buf(d + 1);
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
      goe_eigenvalues(d + 1, rng, buf.data());
      std::nth_element(buf.begin(), buf.begin() + ell, buf.end());
      s += std::exp(-0.5 * buf[ell] * buf[ell]);
    }
    return s;
  });
  e.value *= pre;
  e.std_error *= pre;
  return e;
}

double intensity(const CovarianceModel& m, const IndexSet& L) {
  if (m.dim() <= 4) return intensity_closed_form(m, L);
  McOptions opt;
  opt.seed = 0x5eed;
  auto all = intensity_goe_mc_all(m, opt);
  double s = 0.0;
  for (int l : L.members()) s += all[l].value;
  return s;
}

double scale_for_intensity(Family f, int d, double nu, const IndexSet& L, double target_rho) {
  if (!(target_rho > 0)) throw InvalidArgument("target intensity must be positive");
  if (L.dim() != d) throw InvalidArgument("index set dimension differs from model dimension");
  if (d > 4) unit_total(d);
  CovarianceModel unit = CovarianceModel::make(f, d, nu, 1.0);
  double kappa = moment_ratio(unit);  // moment ratio scales as phi^{-2}
  return std::sqrt(kappa) * std::pow(unit_intensity(d, L) / target_rho, 1.0 / d);
}

std::optional<double> small_r_exponent(int d, const IndexSet& L, const IndexSet& Lp) {
  if (L.dim() != d || Lp.dim() != d) return std::nullopt;
  const auto& a = L.members();
  const auto& b = Lp.members();
  if (L == Lp) {
    if (L.is_all()) return 2.0 - d;
    if (a.size() == 2 && a[0] == 0 && a[1] == d) return std::min(2.0 * d - 1.0, 5.0 - d);
    if (a.size() == 1 && (a[0] == 0 || a[0] == d)) return 5.0 - d;
    if (a.size() == 1 && d == 2) return 3.0;
    return std::nullopt;
  }
  if (a.size() == 1 && b.size() == 1) {
    int lo = std::min(a[0], b[0]), hi = std::max(a[0], b[0]);
    if (hi == lo + 1) return 2.0 - d;
    if (lo == 0 && hi == d) return 2.0 * d - 1.0;
  }
  return std::nullopt;
}

TwoPointLaw two_point_law(const CovarianceModel& m, double r, const Eigen::VectorXd* direction) {
  if (!(r > 0)) throw InvalidArgument("pair separation must be positive");
  const int d = m.dim();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  if (direction) {
    if (direction->size() != d || !(direction->norm() > 0)) throw InvalidArgument("bad layout direction");
    e = *direction / direction->norm();
  } else {
    e[0] = 1.0;
  }
  TwoPointLaw law;
  law.r = r;
  law.joint = assemble_joint(m, {Eigen::VectorXd::Zero(d), Eigen::VectorXd(r * e)});
  law.conditional = condition_hessians_on_zero_gradients(law.joint);
  law.density = density_at_zero_gradients(m, r);
  return law;
}

namespace {

// MC mean of prod_i |det H_i| 1{index(H_i) in L_i} over the conditional law.
McEstimate hessian_product_mc(int d, const Eigen::MatrixXd& cov, const std::vector<const IndexSet*>& sets,
                              const McOptions& opt) {
  const int H = hess_size(d);
  const int k = static_cast<int>(sets.size());
  MvnSampler sampler(cov);
  return run_mc(opt, [&](Rng& rng, long n, long& discarded) {
    std::vector<double> h(static_cast<size_t>(k) * H);
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
      sampler.draw(rng, h.data());
      double prod = 1.0;
      bool bad = false;
      for (int p = 0; p < k; ++p) {
        HessianClass c = classify_hessian(d, h.data() + p * H);
        if (!c.morse) {
          bad = true;
          break;
        }
        if (prod != 0.0) prod = sets[p]->contains(c.index) ? prod * std::abs(c.det) : 0.0;
      }
      if (bad) {
        ++discarded;
        continue;
      }
      s += prod;
    }
    return s;
  });
}

void warn_discards(const McEstimate& e, const char* what) {
  if (e.n_discarded > 1e-4 * (e.n_used + e.n_discarded))
    std::cerr << "warning: " << what << ": " << e.n_discarded << " non-Morse Hessian draws discarded\n";
}

}  // namespace

McEstimate pcf_mc(const CovarianceModel& m, const IndexSet& L, const IndexSet& Lp, double r, const McOptions& opt,
                  const Eigen::VectorXd* direction) {
  TwoPointLaw law = two_point_law(m, r, direction);
  double rl = intensity(m, L), rlp = intensity(m, Lp);
  McEstimate e = hessian_product_mc(m.dim(), law.conditional.cov, {&L, &Lp}, opt);
  warn_discards(e, "pcf_mc");
  double scale = law.density / (rl * rlp);
  e.value *= scale;
  e.std_error *= scale;
  return e;
}

SummaryCurve pcf_curve(const CovarianceModel& m, const IndexSet& L, const IndexSet& Lp,
                       const std::vector<double>& r_grid, const McOptions& opt) {
  SummaryCurve c;
  for (size_t i = 0; i < r_grid.size(); ++i) {
    if (i > 0 && !(r_grid[i] > r_grid[i - 1])) throw InvalidArgument("r grid must be increasing");
    McOptions o = opt;
    o.seed = derive_seed(opt.seed, 1000003 + i);
    McEstimate e = pcf_mc(m, L, Lp, r_grid[i], o);
    c.r.push_back(r_grid[i]);
    c.value.push_back(e.value);
    c.std_error.push_back(e.std_error);
  }
  c.meta = {{"quantity", "pcf"}, {"model", m.describe()}, {"L", L.str()}, {"Lp", Lp.str()},
            {"n_mc", opt.n_samples}, {"seed", opt.seed}};
  return c;
}

double sphere_surface(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }
double ball_volume(int d) { return sphere_surface(d) / d; }

struct PcfIntegrator::Impl {
  std::optional<boost::math::interpolators::pchip<std::vector<double>>> spline;
};

PcfIntegrator::PcfIntegrator(const SummaryCurve& g, int d, std::optional<double> exponent)
    : d_(d), x_(g.r), y_(g.value) {
  if (x_.size() != y_.size() || x_.size() < 2) throw InvalidArgument("pcf curve needs at least two points");
  for (size_t i = 1; i < x_.size(); ++i)
    if (!(x_[i] > x_[i - 1])) throw InvalidArgument("pcf abscissae must be increasing");
  if (!(x_[0] > 0)) throw InvalidArgument("pcf abscissae must be positive");
  if (exponent) {
    exponent_ = *exponent;
  } else {
    // slope of log g on the first few abscissae, 0 when g is not positive there
    SummaryCurve head;
    size_t n = std::min<size_t>(5, x_.size());
    bool pos = true;
    for (size_t i = 0; i < n; ++i) {
      head.r.push_back(x_[i]);
      head.value.push_back(y_[i]);
      head.std_error.push_back(0.0);
      pos = pos && y_[i] > 0;
    }
    exponent_ = pos ? smallr_slope(head, x_[0], x_[n - 1]).slope : 0.0;
  }
  if (!(d_ + exponent_ > 0)) throw InvalidArgument("power-law extension of the pcf is not integrable at 0");
  auto impl = std::make_shared<Impl>();
  if (x_.size() >= 4) impl->spline.emplace(std::vector<double>(x_), std::vector<double>(y_));
  impl_ = impl;
}

double PcfIntegrator::g(double z) const {
  if (z <= x_[0]) return y_[0] * std::pow(z / x_[0], exponent_);
  if (z >= x_.back()) return y_.back();
  if (impl_->spline) return (*impl_->spline)(z);
  size_t i = std::upper_bound(x_.begin(), x_.end(), z) - x_.begin() - 1;
  double t = (z - x_[i]) / (x_[i + 1] - x_[i]);
  return (1 - t) * y_[i] + t * y_[i + 1];
}

double PcfIntegrator::integrate(double a, double b, double shift) const {
  if (!(a >= 0) || !(b >= a)) throw InvalidArgument("integration bounds must satisfy 0 <= a <= b");
  if (b > x_.back() * (1 + 1e-12)) throw InvalidArgument("integration beyond the last pcf abscissa");
  b = std::min(b, x_.back());
  double total = 0.0;
  // power-law segment below the first abscissa
  if (a < x_[0]) {
    double hi = std::min(b, x_[0]);
    double e = d_ + exponent_;
    total += y_[0] * std::pow(x_[0], -exponent_) * (std::pow(hi, e) - std::pow(a, e)) / e;
    total -= shift * (std::pow(hi, d_) - std::pow(a, d_)) / d_;
    a = hi;
  }
  // Piecewise cubic times z^{d-1}: a 4-node Gauss rule per knot interval is
  // exact up to degree 7, so this is the exact integral of the interpolant for d <= 5.
  using GL = boost::math::quadrature::gauss<double, 4>;
  auto f = [&](double z) { return std::pow(z, d_ - 1) * (g(z) - shift); };
  size_t i = std::upper_bound(x_.begin(), x_.end(), a) - x_.begin();
  double lo = a;
  while (lo < b) {
    double hi = (i < x_.size()) ? std::min(b, x_[i]) : b;
    if (hi > lo) total += GL::integrate(f, lo, hi);
    lo = hi;
    ++i;
  }
  return total;
}

double kfun_eta(const SummaryCurve& g, int d, double eta, double r, std::optional<double> exponent) {
  if (!(eta >= 0) || !(r > eta)) throw InvalidArgument("kfun_eta needs 0 <= eta < r");
  PcfIntegrator I(g, d, exponent);
  return sphere_surface(d) * I.integrate(eta, r);
}

double repulsion_index(const SummaryCurve& g, int d, double rho, double r, std::optional<double> exponent) {
  if (!(rho > 0)) throw InvalidArgument("intensity must be positive");
  if (!(r > 0)) throw InvalidArgument("r must be positive");
  PcfIntegrator I(g, d, exponent);
  return 1.0 + sphere_surface(d) / rho * I.integrate(0.0, r, 1.0);
}

SlopeFit smallr_slope(const SummaryCurve& curve, double r_lo, double r_hi) {
  std::vector<double> x, y;
  for (size_t i = 0; i < curve.r.size(); ++i) {
    if (curve.r[i] < r_lo || curve.r[i] > r_hi) continue;
    if (!(curve.value[i] > 0) || !(curve.r[i] > 0))
      throw NonPositiveValues("log-log fit needs positive values; r=" + std::to_string(curve.r[i]));
    x.push_back(std::log(curve.r[i]));
    y.push_back(std::log(curve.value[i]));
  }
  const int n = static_cast<int>(x.size());
  if (n < 2) throw InvalidArgument("slope fit needs at least two points in the window");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  SlopeFit f;
  f.n_points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (int i = 0; i < n; ++i) {
      double e = y[i] - f.intercept - f.slope * x[i];
      rss += e * e;
    }
    f.std_error = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

McEstimate intensity_k_mc(const CovarianceModel& m, const IndexSet& L, const std::vector<Eigen::VectorXd>& points,
                          const McOptions& opt) {
  JointDerivativeGaussian J = assemble_joint(m, points);
  ConditionalGaussian C = condition_hessians_on_zero_gradients(J);
  double f = gradient_density_at_zero(J);
  std::vector<const IndexSet*> sets(points.size(), &L);
  McEstimate e = hessian_product_mc(m.dim(), C.cov, sets, opt);
  warn_discards(e, "intensity_k_mc");
  e.value *= f;
  e.std_error *= f;
  return e;
}

}  // namespace critfield
