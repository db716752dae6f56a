#include "critfield/covmodels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "critfield/errors.hpp"
#include "critfield/special.hpp"

namespace critfield {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double factorial(int n) { return std::tgamma(n + 1.0); }

// (2p)! / (2^p p!)
double double_factorial_odd(int p) {
  double v = 1.0;
  for (int q = 1; q <= p; ++q) v *= 2.0 * q - 1.0;
  return v;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::Matern: return "matern";
    case Family::GaussianLimit: return "gauss";
    case Family::RandomWave: return "rwm";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  if (s == "matern") return Family::Matern;
  if (s == "gauss" || s == "gaussian" || s == "bargmann-fock") return Family::GaussianLimit;
  if (s == "rwm" || s == "random-wave" || s == "randomwave") return Family::RandomWave;
  throw InvalidArgument("unknown covariance family '" + s + "'");
}

CovarianceModel CovarianceModel::matern(int d, double nu, double phi) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  if (!(nu > 0) || !std::isfinite(nu)) throw InvalidArgument("Matern nu must be positive and finite");
  if (!(phi > 0) || !std::isfinite(phi)) throw InvalidArgument("phi must be positive");
  return CovarianceModel(Family::Matern, d, nu, phi);
}

CovarianceModel CovarianceModel::gaussian(int d, double phi) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  if (!(phi > 0) || !std::isfinite(phi)) throw InvalidArgument("phi must be positive");
  return CovarianceModel(Family::GaussianLimit, d, kInf, phi);
}

CovarianceModel CovarianceModel::random_wave(int d, double phi) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  if (!(phi > 0) || !std::isfinite(phi)) throw InvalidArgument("phi must be positive");
  return CovarianceModel(Family::RandomWave, d, kInf, phi);
}

CovarianceModel CovarianceModel::make(Family f, int d, double nu, double phi) {
  switch (f) {
    case Family::Matern: return matern(d, nu, phi);
    case Family::GaussianLimit: return gaussian(d, phi);
    case Family::RandomWave: return random_wave(d, phi);
  }
  throw InvalidArgument("bad family");
}

int CovarianceModel::max_derivative_at_zero() const {
  if (family_ != Family::Matern) return std::numeric_limits<int>::max();
  return static_cast<int>(std::ceil(nu_)) - 1;
}

std::string CovarianceModel::describe() const {
  std::ostringstream os;
  os << family_name(family_) << "(d=" << d_;
  if (family_ == Family::Matern) os << ", nu=" << nu_;
  os << ", phi=" << phi_ << ")";
  return os.str();
}

double spectral_moment(const CovarianceModel& m, int p) {
  if (p < 0) throw InvalidArgument("spectral moment order must be >= 0");
  double base = double_factorial_odd(p) / std::pow(m.phi() * m.phi(), p);
  switch (m.family()) {
    case Family::GaussianLimit: return base;
    case Family::Matern: {
      if (p > 0 && !(p < m.nu()))
        throw InsufficientSmoothness("lambda_" + std::to_string(2 * p) + " needs nu > " + std::to_string(p));
      double v = base;
      for (int q = 1; q <= p; ++q) v *= m.nu() / (m.nu() - q);
      return v;
    }
    case Family::RandomWave: {
      double v = base;
      for (int q = 0; q < p; ++q) v *= m.dim() / double(m.dim() + 2 * q);
      return v;
    }
  }
  return 0.0;
}

double moment_ratio(const CovarianceModel& m) { return spectral_moment(m, 2) / (3.0 * spectral_moment(m, 1)); }

double c2_deriv(const CovarianceModel& m, int p, double s) {
  if (p < 0 || p > 6) throw InvalidArgument("c2_deriv order must be in 0..6");
  if (!(s >= 0)) throw InvalidArgument("c2_deriv needs s >= 0");
  const double phi2 = m.phi() * m.phi();
  if (s == 0.0) {
    if (p == 0) return 1.0;
    // lambda_{2p} = (-1)^p (2p)!/p! c2^{(p)}(0); also avoids 0*inf in the Bessel forms
    double lam = spectral_moment(m, p);
    return ((p % 2) ? -1.0 : 1.0) * factorial(p) / factorial(2 * p) * lam;
  }
  switch (m.family()) {
    case Family::GaussianLimit: {
      double a = 0.5 / phi2;
      return std::pow(-a, p) * std::exp(-a * s);
    }
    case Family::Matern: {
      const double nu = m.nu();
      double a = 2.0 * nu / phi2;
      double logA = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu);
      return std::exp(logA) * std::pow(-0.5 * a, p) * scaled_bessel_k(nu - p, a * s);
    }
    case Family::RandomWave: {
      const int d = m.dim();
      const double b = d / phi2;
      if (d == 1 && p == 0) return std::cos(std::sqrt(s) / m.phi());
      double mu = 0.5 * d - 1.0;
      double B = std::exp((0.5 * d - 1.0) * std::numbers::ln2 + std::lgamma(0.5 * d));
      return B * std::pow(-0.5 * b, p) * scaled_bessel_j(mu + p, b * s);
    }
  }
  return 0.0;
}

double c2_deriv_zero_limit(const CovarianceModel& m, int p) {
  if (p < 0 || p > 6) throw InvalidArgument("c2_deriv order must be in 0..6");
  if (p == 0) return 1.0;
  const double phi2 = m.phi() * m.phi();
  const double sign = (p % 2) ? -1.0 : 1.0;
  switch (m.family()) {
    case Family::GaussianLimit: return std::pow(-0.5 / phi2, p);
    case Family::Matern: {
      const double nu = m.nu();
      if (!(p < nu)) throw InsufficientSmoothness("c2^{(p)}(0) needs nu > p");
      // A (a/2)^p g_{nu-p}(0), g_mu(0) = 2^{mu-1} Gamma(mu)
      double a = 2.0 * nu / phi2;
      double logv = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + p * std::log(0.5 * a) +
                    (nu - p - 1.0) * std::numbers::ln2 + std::lgamma(nu - p);
      return sign * std::exp(logv);
    }
    case Family::RandomWave: {
      const int d = m.dim();
      double mu = 0.5 * d - 1.0;
      double b = d / phi2;
      double logv = mu * std::numbers::ln2 + std::lgamma(0.5 * d) + p * std::log(0.5 * b) -
                    (mu + p) * std::numbers::ln2 - std::lgamma(mu + p + 1.0);
      return sign * std::exp(logv);
    }
  }
  return 0.0;
}

double c1(const CovarianceModel& m, double r) {
  if (!(r >= 0)) throw InvalidArgument("c1 needs r >= 0");
  if (m.family() == Family::RandomWave && m.dim() == 1) return std::cos(r / m.phi());
  return c2_deriv(m, 0, r * r);
}

double c1_second(const CovarianceModel& m, double r) {
  double s = r * r;
  return 4.0 * s * c2_deriv(m, 2, s) + 2.0 * c2_deriv(m, 1, s);
}

double partial_c(const CovarianceModel& m, std::span<const int> alpha, std::span<const double> t) {
  const int d = m.dim();
  if (static_cast<int>(alpha.size()) != d || static_cast<int>(t.size()) != d)
    throw InvalidArgument("partial_c: alpha and t must have length d");
  int n = 0;
  double u = 0.0;
  for (int i = 0; i < d; ++i) {
    if (alpha[i] < 0) throw InvalidArgument("partial_c: negative multi-index entry");
    n += alpha[i];
    u += t[i] * t[i];
  }
  if (n > 6) throw InvalidArgument("partial_c: |alpha| must be <= 6");

  // d^alpha c2(sum t_i^2) = sum_k prod_i [a_i!/((a_i-2k_i)! k_i!) (2 t_i)^{a_i-2k_i}] c2^{(|a|-|k|)}(u)
  double cache[7];
  bool have[7] = {};
  std::vector<int> k(d, 0);
  double total = 0.0;
  while (true) {
    double coef = 1.0;
    int K = 0;
    for (int i = 0; i < d && coef != 0.0; ++i) {
      int e = alpha[i] - 2 * k[i];
      coef *= factorial(alpha[i]) / (factorial(e) * factorial(k[i]));
      if (e > 0) coef *= std::pow(2.0 * t[i], e);
      K += k[i];
    }
    if (coef != 0.0) {
      int order = n - K;
      if (!have[order]) {
        cache[order] = c2_deriv(m, order, u);
        have[order] = true;
      }
      total += coef * cache[order];
    }
    int i = 0;
    for (; i < d; ++i) {
      if (2 * (k[i] + 1) <= alpha[i]) {
        ++k[i];
        break;
      }
      k[i] = 0;
    }
    if (i == d) break;
  }
  return total;
}

NondegeneracyCheck check_pairwise_nondegeneracy(const CovarianceModel& m, double r) {
  if (!(r >= 0)) throw InvalidArgument("check_pairwise_nondegeneracy needs r >= 0");
  double s = r * r;
  double d0 = c2_deriv(m, 1, 0.0);
  double dr = c2_deriv(m, 1, s);
  double h0 = 2.0 * d0;
  double hr = c1_second(m, r);
  NondegeneracyCheck out{};
  out.margin1 = d0 * d0 - dr * dr;
  out.margin2 = h0 * h0 - hr * hr;
  // both margins are differences of squares of size lambda_2^2 / 4 and lambda_2^2
  double l2 = spectral_moment(m, 1);
  out.tolerance = 1e-12 * l2 * l2;
  out.ok = out.margin1 > 0.25 * out.tolerance && out.margin2 > out.tolerance;
  return out;
}

double xi_envelope(const CovarianceModel& m, double r) {
  if (!(r > 0)) throw InvalidArgument("xi_envelope needs r > 0");
  double s = r * r;
  double best = 0.0;
  double rp = 1.0;
  for (int p = 1; p <= 4; ++p) {
    rp *= r;
    best = std::max(best, rp * std::abs(c2_deriv(m, p, s)));
  }
  return best;
}

IntegrabilityCheck check_integrability(const CovarianceModel& m) {
  const int d = m.dim();
  const double phi = m.phi();
  const double R = 50.0 * phi;
  const double r0 = 1e-4 * phi;
  const int N = 6000;
  std::vector<double> r(N), xi(N);
  const double step = std::log(R / r0) / (N - 1);
  for (int i = 0; i < N; ++i) {
    r[i] = r0 * std::exp(step * i);
    xi[i] = xi_envelope(m, r[i]);
  }
  // decreasing majorant: running max from the right
  for (int i = N - 2; i >= 0; --i) xi[i] = std::max(xi[i], xi[i + 1]);

  // int r^{d-1} Xi dr = int r^d Xi dlog r
  double integral = xi[0] * std::pow(r0, d) / d;
  for (int i = 0; i + 1 < N; ++i)
    integral += 0.5 * step * (std::pow(r[i], d) * xi[i] + std::pow(r[i + 1], d) * xi[i + 1]);

  // log-log slope of the envelope on [R/5, R]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int i = 0; i < N; ++i) {
    if (r[i] < R / 5.0 || !(xi[i] > 0)) continue;
    double x = std::log(r[i]), y = std::log(xi[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++cnt;
  }
  double slope = -kInf;
  if (cnt >= 2) slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);

  IntegrabilityCheck out{};
  out.decay_exponent = slope;
  if (!(slope < -d - 0.5)) {
    out.ok = false;
    out.tail_integral = kInf;
    out.verdict = "divergent oscillatory: envelope decays like r^" + std::to_string(slope);
    return out;
  }
  // exponential tail: Xi(r) <= Xi(R) (r/R)^a exp(-kappa (r-R)) for r > R
  double kappa = 0.0, a = 0.0;
  if (m.family() == Family::Matern) {
    kappa = std::sqrt(2.0 * m.nu()) / phi;
    a = m.nu() + 4.0;
  } else {
    kappa = R / (phi * phi);
    a = 8.0;
  }
  double rate = kappa - (d - 1 + a) / R;
  double tail = rate > 0 ? xi[N - 1] * std::pow(R, d - 1) / rate : kInf;
  out.tail_integral = integral + tail;
  out.ok = std::isfinite(out.tail_integral);
  out.verdict = out.ok ? "integrable (exponential tail)" : "tail bound failed";
  return out;
}

}  // namespace critfield
