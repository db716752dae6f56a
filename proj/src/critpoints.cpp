#include "critfield/critpoints.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "critfield/errors.hpp"
#include "critfield/hessian.hpp"

namespace critfield {

using nlohmann::json;

std::optional<CovarianceModel> field_model(const Field& f) {
  if (auto* s = dynamic_cast<const SpectralField*>(&f)) return s->model;
  if (auto* l = dynamic_cast<const LatticeSmoothedField*>(&f)) return l->lattice().model;
  return std::nullopt;
}

int default_seeds_per_axis(const CovarianceModel& m, const Window& w) {
  double rho = intensity(m, IndexSet::all(m.dim()));
  double side = 0.0;
  for (int i = 0; i < w.dim(); ++i) side = std::max(side, w.side(i));
  return std::max(3, static_cast<int>(std::ceil(kSeedDensity * std::pow(rho, 1.0 / m.dim()) * side)));
}

namespace {

enum class Outcome { Converged, NonConverged, NonMorse, Boundary };

struct SeedResult {
  Outcome outcome = Outcome::NonConverged;
  CriticalPoint point;
};

SeedResult newton(const Field& f, const Window& dom, Eigen::VectorXd x, const ExtractionConfig& cfg,
                  double max_step, double margin) {
  const int d = f.dim();
  Eigen::VectorXd g(d), gt(d), xt(d);
  Eigen::MatrixXd H(d, d), Ht(d, d);
  SeedResult out;
  double v, vt;
  f.eval(x.data(), &v, g.data(), H.data());
  double gn = g.norm();
  int stalled = 0;
  for (int it = 0; it < cfg.newton_max_iter && gn >= cfg.newton_tol; ++it) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
    if (!lu.isInvertible()) break;
    Eigen::VectorXd step = -lu.solve(g);
    double sn = step.norm();
    if (!std::isfinite(sn)) break;
    if (sn > max_step) step *= max_step / sn;
    // shorten the step so the iterate stays in the window
    double lambda = 1.0;
    for (int i = 0; i < d; ++i) {
      if (x[i] + step[i] > dom.upper[i]) lambda = std::min(lambda, (dom.upper[i] - x[i]) / step[i]);
      if (x[i] + step[i] < dom.lower[i]) lambda = std::min(lambda, (dom.lower[i] - x[i]) / step[i]);
    }
    if (lambda < 1e-3) break;  // pinned against the boundary
    bool accepted = false;
    for (int k = 0; k <= 10; ++k, lambda *= 0.5) {
      xt = x + lambda * step;
      f.eval(xt.data(), &vt, gt.data(), Ht.data());
      double n = gt.norm();
      if (n < gn) {
        // local minima of |grad| with a singular Hessian trap the iteration
        stalled = n > (1.0 - 1e-4) * gn ? stalled + 1 : 0;
        x = xt;
        v = vt;
        g = gt;
        H = Ht;
        gn = n;
        accepted = true;
        break;
      }
    }
    if (!accepted || stalled >= 3) break;
  }
  out.point.location = x;
  out.point.residual = gn;
  if (!(gn < cfg.newton_tol)) return out;
  for (int i = 0; i < d; ++i)
    if (x[i] < dom.lower[i] + margin || x[i] > dom.upper[i] - margin) {
      out.outcome = Outcome::Boundary;
      return out;
    }
  std::vector<double> packed(hess_size(d));
  pack_hessian(H, packed.data());
  HessianClass c = classify_hessian(d, packed.data());
  out.point.value = v;
  out.point.det_hessian = c.det;
  out.point.index = c.index;
  out.outcome = (!c.morse || std::abs(c.det) < cfg.morse_tol) ? Outcome::NonMorse : Outcome::Converged;
  return out;
}

}  // namespace

PointPattern extract(const Field& f, const Window& w, const ExtractionConfig& cfg) {
  const int d = f.dim();
  if (w.dim() != d) throw InvalidArgument("window dimension differs from field dimension");
  const Window& dom = f.domain();
  for (int i = 0; i < d; ++i)
    if (w.lower[i] < dom.lower[i] - 1e-12 || w.upper[i] > dom.upper[i] + 1e-12)
      throw OutOfWindow("extraction window is not inside the field domain");
  if (cfg.newton_max_iter < 1 || !(cfg.newton_tol > 0) || cfg.morse_tol < 0 || cfg.dedup_radius < 0 ||
      cfg.boundary_margin < 0 || cfg.seeds_per_axis < 0)
    throw InvalidArgument("extraction config entries must be positive");

  int spa = cfg.seeds_per_axis;
  if (spa == 0) {
    auto m = field_model(f);
    if (!m) throw InvalidArgument("seeds_per_axis is required for a field without a covariance model");
    spa = default_seeds_per_axis(*m, w);
  }
  const double dedup = cfg.dedup_radius > 0 ? cfg.dedup_radius : 1e-4 * w.diameter();
  const double margin = cfg.boundary_margin > 0 ? cfg.boundary_margin : 1e-7 * w.min_side();
  double spacing = 0.0;
  for (int i = 0; i < d; ++i) spacing = std::max(spacing, 2.0 * w.side(i) / spa);

  // Derivatives on the seed grid. Newton starts from (a) one-step Newton predictions
  // that land within a cell of their grid point and (b) discrete local minima of |grad|.
  std::vector<double> lower(d), step(d);
  std::vector<int> counts(d, spa);
  long n_grid = 1;
  double min_step = INFINITY;
  for (int i = 0; i < d; ++i) {
    lower[i] = w.lower[i];
    step[i] = w.side(i) / spa;
    min_step = std::min(min_step, step[i]);
    n_grid *= spa;
  }
  std::vector<double> G, Hg;
  f.derivative_grid(lower, step, counts, G, cfg.screen ? &Hg : nullptr);
  auto grid_point = [&](long p) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) {
      x[i] = lower[i] + (p % spa + 0.5) * step[i];
      p /= spa;
    }
    return x;
  };

  std::vector<Eigen::VectorXd> starts;
  if (!cfg.screen) {
    for (long p = 0; p < n_grid; ++p) starts.push_back(grid_point(p));
  } else {
    std::vector<double> g2(n_grid);
    for (long p = 0; p < n_grid; ++p) {
      Eigen::Map<const Eigen::VectorXd> g(&G[p * d], d);
      g2[p] = g.squaredNorm();
      Eigen::Map<const Eigen::MatrixXd> H(&Hg[p * d * d], d, d);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
      if (!lu.isInvertible()) continue;
      Eigen::VectorXd s = -lu.solve(Eigen::VectorXd(g));
      bool near = true;
      for (int i = 0; i < d; ++i) near &= std::abs(s[i]) <= step[i];
      if (!near) continue;
      Eigen::VectorXd x = grid_point(p) + s;
      if (w.contains(x.data(), 0.0)) starts.push_back(x);
    }
    std::vector<Eigen::VectorXd> minima;
    std::vector<int> j(d), off(d);
    for (long p = 0; p < n_grid; ++p) {
      long q = p;
      for (int i = 0; i < d; ++i) {
        j[i] = static_cast<int>(q % spa);
        q /= spa;
      }
      bool is_min = true;
      std::fill(off.begin(), off.end(), -1);
      while (is_min) {
        long nb = 0, stride = 1;
        bool valid = true, self = true;
        for (int i = 0; i < d; ++i) {
          int c = j[i] + off[i];
          if (c < 0 || c >= spa) valid = false;
          if (off[i] != 0) self = false;
          nb += c * stride;
          stride *= spa;
        }
        if (valid && !self && (g2[nb] < g2[p] || (g2[nb] == g2[p] && nb < p))) is_min = false;
        int i = 0;
        while (i < d && ++off[i] > 1) off[i++] = -1;
        if (i == d) break;
      }
      if (is_min) minima.push_back(grid_point(p));
    }
    // a minimum next to a prediction almost always belongs to the same root
    std::vector<Eigen::VectorXd> predicted = starts;
    std::sort(predicted.begin(), predicted.end(),
              [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[0] < b[0]; });
    for (auto& x : minima) {
      auto it = std::lower_bound(predicted.begin(), predicted.end(), x[0] - step[0],
                                 [](const Eigen::VectorXd& a, double v) { return a[0] < v; });
      bool covered = false;
      for (; it != predicted.end() && (*it)[0] <= x[0] + step[0] && !covered; ++it) {
        covered = true;
        for (int i = 1; i < d; ++i) covered &= std::abs((*it)[i] - x[i]) <= step[i];
      }
      if (!covered) starts.push_back(x);
    }
    // predictions of the same root cluster tightly; keep one start per cluster
    std::stable_sort(starts.begin(), starts.end(),
                     [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[0] < b[0]; });
    const double r = 0.25 * min_step;
    std::vector<char> drop(starts.size(), 0);
    for (size_t a = 0; a < starts.size(); ++a) {
      if (drop[a]) continue;
      for (size_t b = a + 1; b < starts.size() && starts[b][0] - starts[a][0] <= r; ++b)
        if (!drop[b] && (starts[b] - starts[a]).norm() <= r) drop[b] = 1;
    }
    size_t k = 0;
    for (size_t a = 0; a < starts.size(); ++a)
      if (!drop[a]) starts[k++] = starts[a];
    starts.resize(k);
  }

  const long n_seeds = static_cast<long>(starts.size());
  std::vector<SeedResult> res(n_seeds);
  parallel_for(static_cast<int>(n_seeds), cfg.threads,
               [&](int s) { res[s] = newton(f, w, starts[s], cfg, spacing, margin); });

  PointPattern p;
  p.d = d;
  p.window = w;
  p.stats.n_grid = n_grid;
  p.stats.n_seeds = n_seeds;
  std::vector<CriticalPoint> roots;
  for (auto& r : res) {
    switch (r.outcome) {
      case Outcome::Converged: roots.push_back(r.point); break;
      case Outcome::NonConverged:
        ++p.stats.n_nonconverged;
        if (p.stats.nonconverged_residuals.size() < 20) p.stats.nonconverged_residuals.push_back(r.point.residual);
        break;
      case Outcome::NonMorse: ++p.stats.n_non_morse; break;
      case Outcome::Boundary: ++p.stats.n_boundary; break;
    }
  }
  p.stats.n_converged = static_cast<long>(roots.size());
  if (p.stats.n_non_morse > 0.01 * std::max(n_seeds, 1L))
    throw DegenerateField(std::to_string(p.stats.n_non_morse) + " of " + std::to_string(n_seeds) +
                          " seeds ended at a root with a singular Hessian");

  // sweep along x1 and merge roots closer than dedup, keeping the smaller residual
  std::stable_sort(roots.begin(), roots.end(),
                   [](const CriticalPoint& a, const CriticalPoint& b) { return a.location[0] < b.location[0]; });
  std::vector<char> dead(roots.size(), 0);
  for (size_t i = 0; i < roots.size(); ++i) {
    if (dead[i]) continue;
    for (size_t j = i + 1; j < roots.size() && roots[j].location[0] - roots[i].location[0] <= dedup; ++j) {
      if (dead[j] || (roots[j].location - roots[i].location).norm() > dedup) continue;
      if (roots[j].residual < roots[i].residual) std::swap(roots[i], roots[j]);
      dead[j] = 1;
      ++p.stats.n_merged;
    }
  }
  for (size_t i = 0; i < roots.size(); ++i)
    if (!dead[i]) p.points.push_back(roots[i]);
  return p;
}

std::vector<long> counts_by_index(const PointPattern& p) {
  std::vector<long> c(p.d + 1, 0);
  for (auto& x : p.points) ++c[x.index];
  return c;
}

PointPattern filter_indices(const PointPattern& p, const IndexSet& L) {
  PointPattern q;
  q.d = p.d;
  q.window = p.window;
  q.stats = p.stats;
  for (auto& x : p.points)
    if (L.contains(x.index)) q.points.push_back(x);
  return q;
}

json pattern_sidecar(const PointPattern& p) {
  const auto& s = p.stats;
  return {{"d", p.d},
          {"window", to_json(p.window)},
          {"n_points", p.size()},
          {"counts_by_index", counts_by_index(p)},
          {"extraction",
           {{"n_grid", s.n_grid},
            {"n_seeds", s.n_seeds},
            {"n_converged", s.n_converged},
            {"n_nonconverged", s.n_nonconverged},
            {"n_non_morse", s.n_non_morse},
            {"n_boundary", s.n_boundary},
            {"n_merged", s.n_merged},
            {"nonconverged_residuals", s.nonconverged_residuals}}}};
}

void write_pattern_csv(std::ostream& os, const PointPattern& p, const json& extra) {
  json h = pattern_sidecar(p);
  if (extra.is_object())
    for (auto& [k, v] : extra.items()) h[k] = v;
  os << "# " << h.dump() << "\n";
  for (int i = 0; i < p.d; ++i) os << "x" << i + 1 << ",";
  os << "index,value,det_hessian\n";
  os.precision(17);
  for (auto& x : p.points) {
    for (int i = 0; i < p.d; ++i) os << x.location[i] << ",";
    os << x.index << "," << x.value << "," << x.det_hessian << "\n";
  }
}

PointPattern read_pattern_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("#", 0) != 0)
    throw InvalidArgument("pattern CSV must start with a '# {json}' header line");
  json h = json::parse(line.substr(1));
  PointPattern p;
  p.d = h.at("d").get<int>();
  p.window = window_from_json(h.at("window"));
  std::getline(is, line);  // column names
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (static_cast<int>(v.size()) != p.d + 3) throw InvalidArgument("malformed pattern row: " + line);
    CriticalPoint c;
    c.location = Eigen::Map<Eigen::VectorXd>(v.data(), p.d);
    c.index = static_cast<int>(v[p.d]);
    c.value = v[p.d + 1];
    c.det_hessian = v[p.d + 2];
    p.points.push_back(std::move(c));
  }
  return p;
}

MatchResult match_patterns(const PointPattern& ref, const PointPattern& cand) {
  MatchResult m;
  m.n_reference = static_cast<long>(ref.size());
  m.n_candidate = static_cast<long>(cand.size());
  double sum = 0.0;
  long matched = 0;
  for (auto& r : ref.points) {
    double best = INFINITY;
    for (auto& c : cand.points)
      if (c.index == r.index) best = std::min(best, (c.location - r.location).norm());
    if (!std::isfinite(best)) {
      ++m.n_unmatched;
      continue;
    }
    m.max_displacement = std::max(m.max_displacement, best);
    sum += best;
    ++matched;
  }
  m.mean_displacement = matched ? sum / matched : 0.0;
  return m;
}

}  // namespace critfield
