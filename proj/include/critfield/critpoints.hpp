#pragma once
#include <Eigen/Dense>
#include <iosfwd>
#include "json.hpp"
#include <optional>
#include <vector>

#include "critfield/fieldsim.hpp"
#include "critfield/kacrice.hpp"

namespace critfield {

struct CriticalPoint {
  Eigen::VectorXd location;
  int index = 0;
  double value = 0.0;
  double det_hessian = 0.0;
  double residual = 0.0;  // gradient norm at the accepted iterate
};

struct ExtractionStats {
  long n_grid = 0;   // grid points screened
  long n_seeds = 0;  // local minima of |grad| that started Newton
  long n_converged = 0;
  long n_nonconverged = 0;
  long n_non_morse = 0;
  long n_boundary = 0;
  long n_merged = 0;
  std::vector<double> nonconverged_residuals;  // first few, for logging
};

struct PointPattern {
  int d = 0;
  Window window;
  std::vector<CriticalPoint> points;
  ExtractionStats stats;

  std::size_t size() const { return points.size(); }
};

// grid points per expected inter-point spacing along each axis
inline constexpr double kSeedDensity = 6.0;

// Zero entries mean "use the default".
struct ExtractionConfig {
  int seeds_per_axis = 0;  // ceil(kSeedDensity rho^{1/d} side) from the model intensity
  int newton_max_iter = 60;
  double newton_tol = 1e-9;
  double dedup_radius = 0.0;     // 1e-4 * window diameter
  double boundary_margin = 0.0;  // 1e-7 * smallest window side
  double morse_tol = 1e-12;
  bool screen = true;  // seed only at grid minima of |grad|; false seeds every grid point
  int threads = 0;
};

// Covariance model attached to a simulated field, if any.
std::optional<CovarianceModel> field_model(const Field& f);

int default_seeds_per_axis(const CovarianceModel& m, const Window& w);

// Seeded damped Newton on the gradient. The window must lie inside the field domain.
PointPattern extract(const Field& f, const Window& w, const ExtractionConfig& cfg = {});

std::vector<long> counts_by_index(const PointPattern& p);
PointPattern filter_indices(const PointPattern& p, const IndexSet& L);

// CSV: a "# {json}" line with d and window, then x1..xd,index,value,det_hessian.
void write_pattern_csv(std::ostream& os, const PointPattern& p, const nlohmann::json& extra = {});
PointPattern read_pattern_csv(std::istream& is);
nlohmann::json pattern_sidecar(const PointPattern& p);

struct MatchResult {
  long n_reference = 0;
  long n_candidate = 0;
  long n_unmatched = 0;  // reference points with no same-index candidate
  double max_displacement = 0.0;
  double mean_displacement = 0.0;
};

// Each reference point is mapped to its nearest candidate of the same index.
MatchResult match_patterns(const PointPattern& reference, const PointPattern& candidate);

}  // namespace critfield
