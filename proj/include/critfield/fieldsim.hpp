#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "critfield/covmodels.hpp"
#include "critfield/rng.hpp"
#include "json.hpp"

namespace critfield {

struct Window {
  std::vector<double> lower, upper;

  Window() = default;
  Window(std::vector<double> lo, std::vector<double> hi);
  static Window cube(int d, double lo = 0.0, double hi = 1.0);

  int dim() const { return static_cast<int>(lower.size()); }
  double side(int i) const { return upper[i] - lower[i]; }
  double min_side() const;
  double volume() const;
  double diameter() const;
  bool contains(const double* t, double slack = 0.0) const;
  Window eroded(double margin) const;
};

nlohmann::json to_json(const Window& w);
Window window_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CovarianceModel& m);
CovarianceModel model_from_json(const nlohmann::json& j);

// A realization that can be evaluated with exact derivatives on its domain.
class Field {
 public:
  virtual ~Field() = default;
  virtual int dim() const = 0;
  // region where evaluation is valid
  virtual const Window& domain() const = 0;
  // Any output pointer may be null; hess is d*d row-major.
  virtual void eval(const double* t, double* value, double* grad, double* hess) const = 0;
  virtual nlohmann::json to_json() const = 0;
  // Derivatives at lower + (j + 0.5) * step, j_k < counts[k], axis 0 fastest.
  // grad is n_points x d; hess, if given, n_points x d x d.
  virtual void derivative_grid(const std::vector<double>& lower, const std::vector<double>& step,
                               const std::vector<int>& counts, std::vector<double>& grad,
                               std::vector<double>* hess = nullptr) const;

  double evaluate(const Eigen::VectorXd& t) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& t) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& t) const;
  void check_inside(const double* t) const;  // throws OutOfWindow
};

// X_n(t) = n^{-1/2} sum_i sqrt(-2 log W_i) cos(U_i + t.V_i)
class SpectralField : public Field {
 public:
  // amplitudes already include the n^{-1/2} factor
  SpectralField(Window w, std::vector<double> amplitudes, std::vector<double> phases,
                std::vector<double> frequencies);

  int dim() const override { return window_.dim(); }
  const Window& domain() const override { return window_; }
  void eval(const double* t, double* value, double* grad, double* hess) const override;
  nlohmann::json to_json() const override;
  void derivative_grid(const std::vector<double>& lower, const std::vector<double>& step,
                       const std::vector<int>& counts, std::vector<double>& grad,
                       std::vector<double>* hess = nullptr) const override;

  int n_terms() const { return static_cast<int>(amp_.size()); }
  const std::vector<double>& amplitudes() const { return amp_; }
  const std::vector<double>& phases() const { return phase_; }
  const std::vector<double>& frequencies() const { return freq_; }  // n x d row-major

  // replay data set by simulate_spectral
  std::optional<CovarianceModel> model;
  std::uint64_t seed = 0;

 private:
  Window window_;
  std::vector<double> amp_, phase_, freq_;
};

Eigen::VectorXd sample_spectral_frequency(const CovarianceModel& m, Rng& rng);
SpectralField simulate_spectral(const CovarianceModel& m, int n_terms, const Window& w, std::uint64_t seed);

// Gaussian values on L_n = {i/n : i in (Z + 1/2)^d} inside the window.
struct LatticeValues {
  int n = 0;
  Window window;
  std::vector<int> first;   // index of the first lattice coordinate per axis
  std::vector<int> counts;  // points per axis
  std::vector<double> values;  // axis 0 fastest
  std::optional<CovarianceModel> model;
  std::uint64_t seed = 0;

  long size() const;
  double coord(int axis, int k) const { return (first[axis] + k + 0.5) / n; }
};

constexpr long kDefaultLatticeCap = 4096;

LatticeValues lattice_points(int n, const Window& w);
LatticeValues simulate_lattice(const CovarianceModel& m, int n, const Window& w, std::uint64_t seed,
                               long cap = kDefaultLatticeCap);

// Radial bump k(u) = C exp(-1/(1-|u|^2)) on |u| < 1, normalized to integrate to 1.
class BumpKernel {
 public:
  explicit BumpKernel(int d);
  int dim() const { return d_; }
  double normalization() const { return C_; }
  double operator()(const double* u) const;

 private:
  int d_;
  double C_;
};

inline double default_bandwidth(int n, int d) { return std::pow(double(n), -1.0 / (d + 4)); }

// X_n(t) = sum_x n^{-d} k_xi(t - x) X(x), evaluated on the window eroded by xi.
class LatticeSmoothedField : public Field {
 public:
  LatticeSmoothedField(LatticeValues lattice, double xi);

  int dim() const override { return lat_.window.dim(); }
  const Window& domain() const override { return domain_; }
  void eval(const double* t, double* value, double* grad, double* hess) const override;
  nlohmann::json to_json() const override;

  double bandwidth() const { return xi_; }
  const LatticeValues& lattice() const { return lat_; }

 private:
  LatticeValues lat_;
  double xi_;
  BumpKernel kernel_;
  Window domain_;
};

// Default bandwidth n^{-1/(d+4)} when xi is not given.
LatticeSmoothedField smooth_lattice(LatticeValues lattice, std::optional<double> xi = std::nullopt);

std::unique_ptr<Field> field_from_json(const nlohmann::json& j);

}  // namespace critfield
