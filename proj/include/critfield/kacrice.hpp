#pragma once
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "critfield/covmodels.hpp"
#include "critfield/gaussjoint.hpp"
#include "critfield/rng.hpp"
#include "json.hpp"

namespace critfield {

// Subset of critical point indices {0..d}; 0 = minima, d = maxima.
class IndexSet {
 public:
  IndexSet(int d, std::vector<int> members);
  static IndexSet all(int d);
  // "all", "extrema", "maxima", "minima", "saddles", or a list like "0,2"
  static IndexSet parse(int d, const std::string& spec);

  int dim() const { return d_; }
  const std::vector<int>& members() const { return members_; }
  bool contains(int l) const { return l >= 0 && l <= d_ && (mask_ >> l) & 1u; }
  bool is_symmetric() const;
  bool is_all() const { return static_cast<int>(members_.size()) == d_ + 1; }
  std::string str() const;
  bool operator==(const IndexSet& o) const { return d_ == o.d_ && mask_ == o.mask_; }

 private:
  int d_;
  unsigned mask_ = 0;
  std::vector<int> members_;
};

// rho_l / rho_{0:d} at any moment ratio (d <= 4).
double intensity_fraction(int d, int l);
// Table-1 intensity sum over L as a function of moment_ratio.
double intensity_closed_form(const CovarianceModel& m, const IndexSet& L);

// Kac-Rice/GOE representation: prefactor(d, m) * E exp(-mu_{l+1}^2 / 2).
McEstimate intensity_goe_mc(const CovarianceModel& m, int ell, const McOptions& opt);
// Every index from the same draws.
std::vector<McEstimate> intensity_goe_mc_all(const CovarianceModel& m, const McOptions& opt);

// Closed form for d <= 4, GOE Monte Carlo (fixed seed, 10^6 draws) otherwise.
double intensity(const CovarianceModel& m, const IndexSet& L);

double scale_for_intensity(Family f, int d, double nu, const IndexSet& L, double target_rho);

struct SummaryCurve {
  std::vector<double> r;
  std::vector<double> value;
  std::vector<double> std_error;
  nlohmann::json meta = nlohmann::json::object();
};

// Small-r power-law exponent of g_{L,L'} where one is known.
std::optional<double> small_r_exponent(int d, const IndexSet& L, const IndexSet& Lp);

// Two-point Kac-Rice machinery at separation r along a unit direction.
struct TwoPointLaw {
  double r = 0.0;
  double density = 0.0;  // f_{V(r)}(0,0)
  JointDerivativeGaussian joint;
  ConditionalGaussian conditional;
};
TwoPointLaw two_point_law(const CovarianceModel& m, double r, const Eigen::VectorXd* direction = nullptr);

// Numerical lower cutoff for pair correlations.
inline double pcf_cutoff(const CovarianceModel& m) { return 1e-3 * m.phi(); }

McEstimate pcf_mc(const CovarianceModel& m, const IndexSet& L, const IndexSet& Lp, double r, const McOptions& opt,
                  const Eigen::VectorXd* direction = nullptr);
SummaryCurve pcf_curve(const CovarianceModel& m, const IndexSet& L, const IndexSet& Lp,
                       const std::vector<double>& r_grid, const McOptions& opt);

// surface(d) = 2 pi^{d/2} / Gamma(d/2), v_d = surface(d)/d
double sphere_surface(int d);
double ball_volume(int d);

// Integrals of z^{d-1} g(z) over a tabulated pcf. The curve is interpolated by
// a monotone cubic; below its first abscissa g is extended by the power law
// with exponent `exponent` (fitted on the first points when not given).
class PcfIntegrator {
 public:
  PcfIntegrator(const SummaryCurve& g, int d, std::optional<double> exponent = std::nullopt);
  // int_a^b z^{d-1} (g(z) - shift) dz, 0 <= a <= b <= last abscissa
  double integrate(double a, double b, double shift = 0.0) const;
  double g(double z) const;
  double exponent() const { return exponent_; }

 private:
  int d_;
  std::vector<double> x_, y_;
  double exponent_;
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

double kfun_eta(const SummaryCurve& g, int d, double eta, double r, std::optional<double> exponent = std::nullopt);
double repulsion_index(const SummaryCurve& g, int d, double rho, double r, std::optional<double> exponent = std::nullopt);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  int n_points = 0;
};
SlopeFit smallr_slope(const SummaryCurve& curve, double r_lo, double r_hi);

McEstimate intensity_k_mc(const CovarianceModel& m, const IndexSet& L, const std::vector<Eigen::VectorXd>& points,
                          const McOptions& opt);

}  // namespace critfield
