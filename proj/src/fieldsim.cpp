#include "critfield/fieldsim.hpp"

#include "spectral_sum.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <complex>
#include <numbers>

#include "critfield/errors.hpp"

namespace critfield {

using nlohmann::json;

Window::Window(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.empty() || lower.size() != upper.size()) throw InvalidArgument("window corners must have equal, nonzero length");
  for (size_t i = 0; i < lower.size(); ++i)
    if (!(upper[i] > lower[i])) throw InvalidArgument("window needs upper > lower on every axis");
}

Window Window::cube(int d, double lo, double hi) {
  return Window(std::vector<double>(d, lo), std::vector<double>(d, hi));
}

double Window::min_side() const {
  double s = side(0);
  for (int i = 1; i < dim(); ++i) s = std::min(s, side(i));
  return s;
}

double Window::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= side(i);
  return v;
}

double Window::diameter() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += side(i) * side(i);
  return std::sqrt(s);
}

bool Window::contains(const double* t, double slack) const {
  for (int i = 0; i < dim(); ++i)
    if (t[i] < lower[i] - slack || t[i] > upper[i] + slack) return false;
  return true;
}

Window Window::eroded(double margin) const {
  std::vector<double> lo(lower), hi(upper);
  for (int i = 0; i < dim(); ++i) {
    lo[i] += margin;
    hi[i] -= margin;
  }
  return Window(lo, hi);
}

json to_json(const Window& w) { return {{"lower", w.lower}, {"upper", w.upper}}; }

Window window_from_json(const json& j) {
  return Window(j.at("lower").get<std::vector<double>>(), j.at("upper").get<std::vector<double>>());
}

json to_json(const CovarianceModel& m) {
  json j = {{"family", family_name(m.family())}, {"d", m.dim()}, {"phi", m.phi()}};
  if (m.family() == Family::Matern) j["nu"] = m.nu();
  return j;
}

CovarianceModel model_from_json(const json& j) {
  return CovarianceModel::make(parse_family(j.at("family").get<std::string>()), j.at("d").get<int>(),
                               j.value("nu", 0.0), j.at("phi").get<double>());
}

void Field::check_inside(const double* t) const {
  const Window& w = domain();
  // allow roundoff at the boundary
  double slack = 1e-12 * w.diameter();
  if (!w.contains(t, slack)) {
    std::string s = "(";
    for (int i = 0; i < dim(); ++i) s += (i ? ", " : "") + std::to_string(t[i]);
    throw OutOfWindow("point " + s + ") outside the evaluation domain");
  }
}

double Field::evaluate(const Eigen::VectorXd& t) const {
  check_inside(t.data());
  double v;
  eval(t.data(), &v, nullptr, nullptr);
  return v;
}

Eigen::VectorXd Field::gradient(const Eigen::VectorXd& t) const {
  check_inside(t.data());
  Eigen::VectorXd g(dim());
  eval(t.data(), nullptr, g.data(), nullptr);
  return g;
}

Eigen::MatrixXd Field::hessian(const Eigen::VectorXd& t) const {
  check_inside(t.data());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h(dim(), dim());
  eval(t.data(), nullptr, nullptr, h.data());
  return h;
}

namespace {

long grid_size(const std::vector<int>& counts) {
  long n = 1;
  for (int c : counts) n *= c;
  return n;
}

}  // namespace

void Field::derivative_grid(const std::vector<double>& lower, const std::vector<double>& step,
                            const std::vector<int>& counts, std::vector<double>& grad,
                            std::vector<double>* hess) const {
  const int d = dim();
  const long N = grid_size(counts);
  grad.assign(N * d, 0.0);
  if (hess) hess->assign(N * d * d, 0.0);
  std::vector<double> t(d);
  for (long p = 0; p < N; ++p) {
    long q = p;
    for (int k = 0; k < d; ++k) {
      t[k] = lower[k] + (q % counts[k] + 0.5) * step[k];
      q /= counts[k];
    }
    eval(t.data(), nullptr, &grad[p * d], hess ? &(*hess)[p * d * d] : nullptr);
  }
}

SpectralField::SpectralField(Window w, std::vector<double> amplitudes, std::vector<double> phases,
                             std::vector<double> frequencies)
    : window_(std::move(w)), amp_(std::move(amplitudes)), phase_(std::move(phases)), freq_(std::move(frequencies)) {
  if (amp_.size() != phase_.size() || freq_.size() != amp_.size() * window_.dim())
    throw InvalidArgument("spectral field arrays have inconsistent sizes");
}

void SpectralField::eval(const double* t, double* value, double* grad, double* hess) const {
  const int d = dim();
  const size_t n = amp_.size();
  if (d <= 8) {
    double H[64];
    detail::spectral_sum(d, n, amp_.data(), phase_.data(), freq_.data(), t, value, grad, hess ? H : nullptr);
    if (hess)
      for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) hess[j * d + k] = hess[k * d + j] = H[j * d + k];
    return;
  }
  double v = 0.0;
  std::vector<double> G(d, 0.0), H(d * d, 0.0);
  const double* V = freq_.data();
  for (size_t i = 0; i < n; ++i, V += d) {
    double ph = phase_[i];
    for (int j = 0; j < d; ++j) ph += t[j] * V[j];
    const double a = amp_[i];
    const double c = std::cos(ph);
    if (value) v += a * c;
    if (grad) {
      const double s = a * std::sin(ph);
      for (int j = 0; j < d; ++j) G[j] -= s * V[j];
    }
    if (hess) {
      const double ac = a * c;
      for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) H[j * d + k] -= ac * V[j] * V[k];
    }
  }
  if (value) *value = v;
  if (grad)
    for (int j = 0; j < d; ++j) grad[j] = G[j];
  if (hess)
    for (int j = 0; j < d; ++j)
      for (int k = j; k < d; ++k) hess[j * d + k] = hess[k * d + j] = H[j * d + k];
}

void SpectralField::derivative_grid(const std::vector<double>& lower, const std::vector<double>& step,
                                    const std::vector<int>& counts, std::vector<double>& grad,
                                    std::vector<double>* hess) const {
  const int d = dim();
  const long N = grid_size(counts);
  grad.assign(N * d, 0.0);
  if (hess) hess->assign(N * d * d, 0.0);
  detail::spectral_grid(d, amp_.size(), amp_.data(), phase_.data(), freq_.data(), lower.data(), step.data(),
                        counts.data(), grad.data(), hess ? hess->data() : nullptr);
}

json SpectralField::to_json() const {
  json j = {{"kind", "spectral"}, {"window", critfield::to_json(window_)}, {"n_terms", n_terms()}};
  if (model) {
    j["model"] = critfield::to_json(*model);
    j["seed"] = seed;
  } else {
    j["amplitudes"] = amp_;
    j["phases"] = phase_;
    j["frequencies"] = freq_;
  }
  return j;
}

Eigen::VectorXd sample_spectral_frequency(const CovarianceModel& m, Rng& rng) {
  const int d = m.dim();
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  switch (m.family()) {
    case Family::GaussianLimit: v /= m.phi(); break;
    case Family::Matern: {
      // multivariate t with 2 nu degrees of freedom and scale 1/phi
      std::gamma_distribution<double> S(m.nu(), 1.0 / m.nu());
      v /= m.phi() * std::sqrt(S(rng.engine()));
      break;
    }
    case Family::RandomWave: v *= std::sqrt(double(d)) / (m.phi() * v.norm()); break;
  }
  return v;
}

SpectralField simulate_spectral(const CovarianceModel& m, int n_terms, const Window& w, std::uint64_t seed) {
  if (n_terms < 1) throw InvalidArgument("n_terms must be >= 1");
  if (w.dim() != m.dim()) throw InvalidArgument("window dimension differs from model dimension");
  const int d = m.dim();
  Rng rng(seed);
  std::vector<double> amp(n_terms), ph(n_terms), fr(static_cast<size_t>(n_terms) * d);
  const double scale = 1.0 / std::sqrt(double(n_terms));
  for (int i = 0; i < n_terms; ++i) {
    ph[i] = 2.0 * std::numbers::pi * rng.uniform();
    Eigen::VectorXd v = sample_spectral_frequency(m, rng);
    for (int j = 0; j < d; ++j) fr[static_cast<size_t>(i) * d + j] = v[j];
    double W = 1.0 - rng.uniform();  // (0, 1]
    amp[i] = scale * std::sqrt(-2.0 * std::log(W));
  }
  SpectralField f(w, amp, ph, fr);
  f.model = m;
  f.seed = seed;
  return f;
}

long LatticeValues::size() const {
  long s = 1;
  for (int c : counts) s *= c;
  return s;
}

LatticeValues lattice_points(int n, const Window& w) {
  if (n < 1) throw InvalidArgument("lattice refinement n must be >= 1");
  LatticeValues L;
  L.n = n;
  L.window = w;
  for (int a = 0; a < w.dim(); ++a) {
    int lo = static_cast<int>(std::ceil(w.lower[a] * n - 0.5));
    int hi = static_cast<int>(std::floor(w.upper[a] * n - 0.5));
    if (hi < lo) throw InvalidArgument("window contains no lattice point on some axis");
    L.first.push_back(lo);
    L.counts.push_back(hi - lo + 1);
  }
  return L;
}

LatticeValues simulate_lattice(const CovarianceModel& m, int n, const Window& w, std::uint64_t seed, long cap) {
  if (w.dim() != m.dim()) throw InvalidArgument("window dimension differs from model dimension");
  LatticeValues L = lattice_points(n, w);
  const int d = w.dim();
  const long N = L.size();
  if (N > cap)
    throw LatticeTooLarge(std::to_string(N) + " lattice points exceed the cap of " + std::to_string(cap));
  Eigen::MatrixXd X(N, d);
  for (long p = 0; p < N; ++p) {
    long q = p;
    for (int a = 0; a < d; ++a) {
      X(p, a) = L.coord(a, static_cast<int>(q % L.counts[a]));
      q /= L.counts[a];
    }
  }
  Eigen::MatrixXd K(N, N);
  for (long i = 0; i < N; ++i) {
    K(i, i) = 1.0;
    for (long j = 0; j < i; ++j) K(i, j) = K(j, i) = c1(m, (X.row(i) - X.row(j)).norm());
  }
  // one jitter of 1e-10 trace/dim, then Cholesky
  K.diagonal().array() += 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw DegenerateJoint("lattice covariance is not positive definite after jitter");
  Rng rng(seed);
  Eigen::VectorXd z(N);
  for (long i = 0; i < N; ++i) z[i] = rng.normal();
  Eigen::VectorXd v = llt.matrixL() * z;
  L.values.assign(v.data(), v.data() + N);
  L.model = m;
  L.seed = seed;
  return L;
}

BumpKernel::BumpKernel(int d) : d_(d) {
  boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [d](double r) {
    double q = 1.0 - r * r;
    return q <= 0 ? 0.0 : std::pow(r, d - 1) * std::exp(-1.0 / q);
  };
  double radial = ts.integrate(f, 0.0, 1.0);
  double surface = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
  C_ = 1.0 / (surface * radial);
}

double BumpKernel::operator()(const double* u) const {
  double s = 0.0;
  for (int i = 0; i < d_; ++i) s += u[i] * u[i];
  double q = 1.0 - s;
  return q <= 0 ? 0.0 : C_ * std::exp(-1.0 / q);
}

LatticeSmoothedField::LatticeSmoothedField(LatticeValues lattice, double xi)
    : lat_(std::move(lattice)), xi_(xi), kernel_(lat_.window.dim()) {
  const int d = lat_.window.dim();
  if (!(xi > 0)) throw InvalidArgument("bandwidth must be positive");
  if (lat_.values.size() != static_cast<size_t>(lat_.size())) throw InvalidArgument("lattice values size mismatch");
  double rate = std::pow(double(lat_.n), -1.0) * std::pow(xi, -d - 3.0);
  if (rate > 1.0)
    throw BandwidthRateViolation("n^-1 xi^-(d+3) = " + std::to_string(rate) + " > 1 for n=" +
                                 std::to_string(lat_.n) + ", xi=" + std::to_string(xi));
  if (2 * xi >= lat_.window.min_side()) throw InvalidArgument("bandwidth leaves an empty eroded window");
  domain_ = lat_.window.eroded(xi);
}

void LatticeSmoothedField::eval(const double* t, double* value, double* grad, double* hess) const {
  const int d = dim();
  const double n = lat_.n;
  int lo[8], hi[8], k[8];
  if (d > 8) throw UnsupportedDimension("lattice smoothing supports d <= 8");
  for (int a = 0; a < d; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::ceil((t[a] - xi_) * n - 0.5)) - lat_.first[a]);
    hi[a] = std::min(lat_.counts[a] - 1, static_cast<int>(std::floor((t[a] + xi_) * n - 0.5)) - lat_.first[a]);
    if (hi[a] < lo[a]) {
      if (value) *value = 0;
      if (grad) std::fill(grad, grad + d, 0.0);
      if (hess) std::fill(hess, hess + d * d, 0.0);
      return;
    }
    k[a] = lo[a];
  }
  // n^{-d} k_xi(t - x) = n^{-d} xi^{-d} k((t - x)/xi)
  const double w0 = std::pow(n * xi_, -d) * kernel_.normalization();
  double v = 0.0, g[8] = {}, h[64] = {}, u[8];
  while (true) {
    long idx = 0, stride = 1;
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      u[a] = (t[a] - (lat_.first[a] + k[a] + 0.5) / n) / xi_;
      s += u[a] * u[a];
      idx += k[a] * stride;
      stride *= lat_.counts[a];
    }
    double q = 1.0 - s;
    if (q > 0) {
      double kv = w0 * std::exp(-1.0 / q) * lat_.values[idx];
      v += kv;
      if (grad || hess) {
        double q2 = q * q;
        if (grad)
          for (int a = 0; a < d; ++a) g[a] += kv * (-2.0 * u[a] / q2);
        if (hess) {
          double q3 = q2 * q, q4 = q2 * q2;
          for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b)
              h[a * d + b] += kv * (4.0 * u[a] * u[b] / q4 - 8.0 * u[a] * u[b] / q3 - (a == b ? 2.0 / q2 : 0.0));
        }
      }
    }
    int a = 0;
    for (; a < d; ++a) {
      if (++k[a] <= hi[a]) break;
      k[a] = lo[a];
    }
    if (a == d) break;
  }
  if (value) *value = v;
  if (grad)
    for (int a = 0; a < d; ++a) grad[a] = g[a] / xi_;
  if (hess)
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) hess[a * d + b] = hess[b * d + a] = h[a * d + b] / (xi_ * xi_);
}

json LatticeSmoothedField::to_json() const {
  json j = {{"kind", "lattice"}, {"window", critfield::to_json(lat_.window)}, {"n", lat_.n}, {"xi", xi_},
            {"seed", lat_.seed}, {"values", lat_.values}};
  if (lat_.model) j["model"] = critfield::to_json(*lat_.model);
  return j;
}

LatticeSmoothedField smooth_lattice(LatticeValues lattice, std::optional<double> xi) {
  double x = xi ? *xi : default_bandwidth(lattice.n, lattice.window.dim());
  return LatticeSmoothedField(std::move(lattice), x);
}

std::unique_ptr<Field> field_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  Window w = window_from_json(j.at("window"));
  if (kind == "spectral") {
    if (j.contains("model"))
      return std::make_unique<SpectralField>(simulate_spectral(model_from_json(j.at("model")), j.at("n_terms").get<int>(),
                                                               w, j.at("seed").get<std::uint64_t>()));
    return std::make_unique<SpectralField>(w, j.at("amplitudes").get<std::vector<double>>(),
                                           j.at("phases").get<std::vector<double>>(),
                                           j.at("frequencies").get<std::vector<double>>());
  }
  if (kind == "lattice") {
    LatticeValues L = lattice_points(j.at("n").get<int>(), w);
    L.values = j.at("values").get<std::vector<double>>();
    L.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("model")) L.model = model_from_json(j.at("model"));
    return std::make_unique<LatticeSmoothedField>(std::move(L), j.at("xi").get<double>());
  }
  throw InvalidArgument("unknown field kind '" + kind + "'");
}

}  // namespace critfield
