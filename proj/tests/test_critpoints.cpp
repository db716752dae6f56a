#include <cmath>
#include <numbers>
#include <sstream>

#include "critfield/critpoints.hpp"
#include "critfield/errors.hpp"
#include "doctest.h"

using namespace critfield;
using doctest::Approx;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// cos(2 pi x) cos(2 pi y) as two spectral terms of amplitude 1/2
SpectralField cosine_field(double sign = 1.0) {
  return SpectralField(Window::cube(2, 0.0, 1.0), {0.5 * sign, 0.5 * sign}, {0.0, 0.0},
                       {kTwoPi, kTwoPi, kTwoPi, -kTwoPi});
}

SpectralField negated(const SpectralField& f) {
  auto a = f.amplitudes();
  for (double& x : a) x = -x;
  return SpectralField(f.domain(), a, f.phases(), f.frequencies());
}

}  // namespace

TEST_CASE("cosine field: closed-form critical points") {
  auto f = cosine_field();
  Window w({0.1, 0.1}, {0.9, 0.9});
  ExtractionConfig cfg;
  cfg.seeds_per_axis = 16;
  auto p = extract(f, w, cfg);
  REQUIRE(p.size() == 5);
  auto counts = counts_by_index(p);
  CHECK(counts == std::vector<long>{0, 4, 1});
  for (auto& c : p.points) {
    if (c.index == 2) {
      CHECK(std::abs(c.location[0] - 0.5) < 1e-8);
      CHECK(std::abs(c.location[1] - 0.5) < 1e-8);
      CHECK(c.value == Approx(1.0));
      CHECK(c.det_hessian == Approx(std::pow(kTwoPi, 4)));
    } else {
      for (int i = 0; i < 2; ++i)
        CHECK(std::min(std::abs(c.location[i] - 0.25), std::abs(c.location[i] - 0.75)) < 1e-8);
      CHECK(c.det_hessian == Approx(-std::pow(kTwoPi, 4)));
      CHECK(std::abs(c.value) < 1e-12);
    }
    CHECK(f.gradient(c.location).norm() < cfg.newton_tol);
  }
  auto maxima = filter_indices(p, IndexSet(2, {2}));
  REQUIRE(maxima.size() == 1);
  CHECK(maxima.points[0].location[0] == Approx(0.5));

  // the full window also has the minima at the half-integer corners
  auto q = extract(f, Window({0.05, 0.05}, {0.95, 0.95}), cfg);
  CHECK(counts_by_index(q) == std::vector<long>{0, 4, 1});
  auto r = extract(f, Window({0.3, 0.3}, {1.0, 1.0}), cfg);
  // (1, y) and (x, 1) sit on the boundary and are discarded
  CHECK(counts_by_index(r) == std::vector<long>{0, 1, 1});
}

TEST_CASE("negation maps index l to d - l") {
  auto m = CovarianceModel::gaussian(2, 0.1);
  Window w = Window::cube(2, 0.0, 1.0);
  auto f = simulate_spectral(m, 512, w, 17);
  auto g = negated(f);
  ExtractionConfig cfg;
  cfg.seeds_per_axis = 60;
  auto a = extract(f, w, cfg), b = extract(g, w, cfg);
  REQUIRE(a.size() > 10);
  CHECK(a.size() == b.size());
  auto ca = counts_by_index(a), cb = counts_by_index(b);
  CHECK(ca[0] == cb[2]);
  CHECK(ca[1] == cb[1]);
  CHECK(ca[2] == cb[0]);
  for (auto& x : a.points) {
    double best = INFINITY;
    int idx = -1;
    for (auto& y : b.points)
      if ((y.location - x.location).norm() < best) {
        best = (y.location - x.location).norm();
        idx = y.index;
      }
    CHECK(best < 1e-8);
    CHECK(idx == 2 - x.index);
  }
  for (auto& x : a.points) {
    CHECK(f.gradient(x.location).norm() < cfg.newton_tol);
    CHECK(std::abs(x.det_hessian) > cfg.morse_tol);
  }
}

TEST_CASE("d=1: maxima and minima alternate") {
  auto m = CovarianceModel::gaussian(1, 0.05);
  Window w = Window::cube(1, 0.0, 4.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto f = simulate_spectral(m, 1024, w, seed);
    auto p = extract(f, w);
    REQUIRE(p.size() > 20);
    std::sort(p.points.begin(), p.points.end(),
              [](auto& a, auto& b) { return a.location[0] < b.location[0]; });
    bool alternate = true;
    for (size_t i = 1; i < p.size(); ++i) alternate &= p.points[i].index != p.points[i - 1].index;
    CHECK(alternate);
    auto c = counts_by_index(p);
    CHECK(std::abs(c[0] - c[1]) <= 1);
  }
}

TEST_CASE("filters, counts and CSV round trip") {
  PointPattern empty;
  empty.d = 3;
  empty.window = Window::cube(3, 0, 1);
  CHECK(counts_by_index(empty) == std::vector<long>{0, 0, 0, 0});

  auto m = CovarianceModel::matern(2, 3.5, 0.1);
  Window w = Window::cube(2, 0.0, 1.0);
  auto f = simulate_spectral(m, 256, w, 3);
  auto p = extract(f, w);
  CHECK(filter_indices(p, IndexSet::all(2)).size() == p.size());
  auto a = filter_indices(p, IndexSet(2, {0})), b = filter_indices(p, IndexSet(2, {2}));
  auto ab = filter_indices(p, IndexSet(2, {0, 2}));
  CHECK(a.size() + b.size() == ab.size());

  std::stringstream ss;
  write_pattern_csv(ss, p, {{"seed", 3}});
  std::string first;
  std::getline(ss, first);
  CHECK(first.rfind("# {", 0) == 0);
  ss.seekg(0);
  auto q = read_pattern_csv(ss);
  REQUIRE(q.size() == p.size());
  CHECK(q.window.upper == w.upper);
  for (size_t i = 0; i < p.size(); ++i) {
    CHECK(q.points[i].location == p.points[i].location);
    CHECK(q.points[i].index == p.points[i].index);
    CHECK(q.points[i].det_hessian == p.points[i].det_hessian);
  }
  auto r = extract(f, w);
  REQUIRE(r.size() == p.size());
  for (size_t i = 0; i < p.size(); ++i) CHECK(r.points[i].location == p.points[i].location);
  auto mr = match_patterns(p, r);
  CHECK(mr.max_displacement == 0.0);
  CHECK(mr.n_unmatched == 0);
}

TEST_CASE("extraction argument checks") {
  auto f = cosine_field();
  CHECK_THROWS_AS(extract(f, Window::cube(2, 0.0, 1.0)), InvalidArgument);  // no model, no seeds
  ExtractionConfig cfg;
  cfg.seeds_per_axis = 8;
  CHECK_THROWS_AS(extract(f, Window::cube(2, -0.5, 1.0), cfg), OutOfWindow);
  cfg.newton_tol = -1;
  CHECK_THROWS_AS(extract(f, Window::cube(2, 0.0, 1.0), cfg), InvalidArgument);
}

TEST_CASE("critical points of smoothed lattice fields converge") {
  // lattice values read off one spectral realization, smoothed at increasing n
  auto m = CovarianceModel::gaussian(1, 1.0);
  Window dom = Window::cube(1, 0.0, 12.0);
  auto truth = simulate_spectral(m, 2048, dom, 31);
  Window w({1.0}, {11.0});
  auto ref = extract(truth, w);
  REQUIRE(ref.size() >= 4);
  std::vector<double> disp;
  std::vector<long> counts;
  for (int n : {32, 64, 128}) {
    auto L = lattice_points(n, dom);
    L.values.resize(L.size());
    for (int k = 0; k < L.counts[0]; ++k) {
      double x = L.coord(0, k);
      truth.eval(&x, &L.values[k], nullptr, nullptr);
    }
    auto f = smooth_lattice(L);
    ExtractionConfig cfg;
    cfg.seeds_per_axis = 400;
    auto p = extract(f, w, cfg);
    auto mr = match_patterns(ref, p);
    CHECK(mr.n_unmatched == 0);
    disp.push_back(mr.max_displacement);
    counts.push_back(static_cast<long>(p.size()));
  }
  CHECK(disp[1] < disp[0]);
  CHECK(disp[2] < disp[1]);
  CHECK(counts[2] == static_cast<long>(ref.size()));
}
