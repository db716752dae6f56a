#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "critfield/covmodels.hpp"
#include "critfield/errors.hpp"
#include "critfield/special.hpp"
#include "doctest.h"

using namespace critfield;
using doctest::Approx;

namespace {

std::vector<CovarianceModel> smooth_models() {
  return {CovarianceModel::matern(1, 3.0, 1.0),     CovarianceModel::matern(2, 3.5, 0.7),
          CovarianceModel::matern(3, 5.0, 1.3),     CovarianceModel::matern(2, 10.0, 1.0),
          CovarianceModel::gaussian(1, 1.0),        CovarianceModel::gaussian(2, 0.6),
          CovarianceModel::random_wave(1, 1.0),     CovarianceModel::random_wave(2, 1.0),
          CovarianceModel::random_wave(3, 0.8),     CovarianceModel::random_wave(4, 1.5)};
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("Bessel functions against 40-digit reference values") {
  struct Row { double nu, x, v; };
  for (auto r : std::vector<Row>{{0.5, 0.1, 3.5861668387972600251},   {2.5, 1.0, 3.2274795311352619091},
                                 {3.0, 2.25, 0.41057302914976230319}, {1.5, 17.0, 1.3324559767275407315e-8},
                                 {0.25, 30.0, 2.1346641833090354838e-14}, {4.5, 0.01, 131597044437.22442933},
                                 {0.0, 3.0, 0.034739504386279248072}})
    CHECK(close(bessel_k(r.nu, r.x), r.v, 1e-12));
  for (auto r : std::vector<Row>{{0.0, 1.0, 0.76519768655796655145}, {1.0, 2.5, 0.49709410246427403801},
                                 {2.0, 14.0, -0.15201988258205962291}, {3.5, 20.0, 0.021517818131341248964},
                                 {0.5, 0.3, 0.43049351732812455754}})
    CHECK(close(bessel_j(r.nu, r.x), r.v, 1e-11));
  // J_{-1/2}(x) = sqrt(2/(pi x)) cos x
  CHECK(close(bessel_j(-0.5, 2.0), std::sqrt(2.0 / (std::numbers::pi * 2.0)) * std::cos(2.0), 1e-13));
  // series and library branches agree at the crossover
  for (double nu : {0.0, 0.5, 1.0, 2.5}) {
    double r = 16.0;
    CHECK(close(scaled_bessel_j(nu, r * (1 - 1e-12)), std::pow(4.0, -nu) * bessel_j(nu, 4.0), 1e-10));
  }
}

TEST_CASE("Bessel derivative recurrences") {
  const double h = 1e-4;
  for (double nu : {0.0, 0.5, 1.0, 1.5, 2.5, 3.0}) {
    for (double r : {0.3, 1.0, 2.5, 7.0, 20.0, 40.0}) {
      double fd = (scaled_bessel_j(nu, r + h) - scaled_bessel_j(nu, r - h)) / (2 * h);
      double an = -0.5 * scaled_bessel_j(nu + 1, r);
      CHECK(std::abs(fd - an) <= std::max(1e-6, 1e-4 * std::abs(an)));
      double fdk = (scaled_bessel_k(nu, r + h) - scaled_bessel_k(nu, r - h)) / (2 * h);
      // signed-order form holds for every nu; it coincides with g_{|nu-1|} when nu >= 1
      double ank = -0.5 * scaled_bessel_k(nu - 1, r);
      CHECK(std::abs(fdk - ank) <= std::max(1e-6, 1e-4 * std::abs(ank)));
      if (nu >= 1) CHECK(ank == Approx(-0.5 * scaled_bessel_k(std::abs(nu - 1), r)).epsilon(1e-14));
    }
  }
}

TEST_CASE("c1 examples") {
  CHECK(c1(CovarianceModel::gaussian(2, 1.0), 0.0) == 1.0);
  CHECK(c1(CovarianceModel::random_wave(1, 1.0), std::numbers::pi) == Approx(-1.0).epsilon(1e-15));
  CHECK(close(c1(CovarianceModel::matern(1, 2.5, 1.0), 1.0), 0.52399410883182034641, 1e-12));
  CHECK(close(c1(CovarianceModel::matern(2, 3.5, 0.7), 0.2), 0.94539264769367124636, 1e-12));
  CHECK(close(c1(CovarianceModel::matern(2, 3.0, 2.0), 5.0), 0.061303765415610231916, 1e-12));
  CHECK(close(c1(CovarianceModel::matern(2, 10.0, 1.0), 1.3), 0.41000719248140756747, 1e-12));
  CHECK(close(c1(CovarianceModel::random_wave(2, 1.0), 1.0), 0.55913414441897991749, 1e-12));
  CHECK(close(c1(CovarianceModel::random_wave(3, 1.0), 2.0), -0.091494764996574326554, 1e-11));
  CHECK(close(c1(CovarianceModel::random_wave(4, 0.5), 0.7), 0.29264946203734916174, 1e-11));
  CHECK(c1(CovarianceModel::gaussian(1, 1.0), 1.0) == Approx(std::exp(-0.5)).epsilon(1e-15));
  for (const auto& m : smooth_models()) CHECK(c1(m, 0.0) == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(c1(CovarianceModel::gaussian(1, 1.0), -1.0), InvalidArgument);
}

TEST_CASE("c2 derivatives: reference values and examples") {
  CHECK(close(c2_deriv(CovarianceModel::matern(1, 3.0, 1.0), 2, 0.25), 0.57612983669520847338, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::matern(1, 3.5, 0.8), 3, 0.1), -3.8315712959633270205, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::matern(1, 4.5, 1.0), 4, 2.0), 0.056118404731768356168, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::matern(1, 2.5, 1.0), 1, 0.5), -0.44253767437552050833, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::random_wave(2, 1.0), 1, 0.5), -0.44005058574493351596, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::random_wave(3, 1.0), 2, 1.5), 0.10741884103136235944, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::random_wave(2, 1.0), 3, 4.0), -0.012284255954404262503, 1e-10));
  CHECK(close(c2_deriv(CovarianceModel::random_wave(1, 1.0), 2, 2.0), 0.067814037983904235798, 1e-11));
  CHECK(close(c2_deriv(CovarianceModel::random_wave(4, 1.0), 4, 0.3), 0.007925484555456822564, 1e-10));

  for (const auto& m : smooth_models()) CHECK(c2_deriv(m, 0, 0.0) == Approx(1.0).epsilon(1e-14));
  // exp(-s/(2 phi^2)) parameterization
  CHECK(c2_deriv(CovarianceModel::gaussian(1, 1.0), 1, 0.0) == Approx(-0.5).epsilon(1e-15));

  auto m3 = CovarianceModel::matern(1, 3.0, 1.0);
  double fd = (c2_deriv(m3, 1, 0.25 + 1e-4) - c2_deriv(m3, 1, 0.25 - 1e-4)) / 2e-4;
  CHECK(close(c2_deriv(m3, 2, 0.25), fd, 1e-6));

  CHECK_THROWS_AS(c2_deriv(m3, 3, 0.0), InsufficientSmoothness);
  CHECK_THROWS_AS(c2_deriv(CovarianceModel::matern(1, 2.5, 1.0), 3, 0.0), InsufficientSmoothness);
  CHECK_NOTHROW(c2_deriv(CovarianceModel::matern(1, 2.5, 1.0), 2, 0.0));
  CHECK_THROWS_AS(c2_deriv(m3, 7, 1.0), InvalidArgument);
}

TEST_CASE("c2 derivatives agree with finite differences on a grid") {
  const double h = 1e-4;
  for (const auto& m : smooth_models()) {
    double phi2 = m.phi() * m.phi();
    for (int p = 1; p <= 4; ++p) {
      for (int i = 1; i <= 25; ++i) {
        double s = 5.0 * phi2 * i / 25.0;
        if (s <= h) continue;
        double fd = (c2_deriv(m, p - 1, s + h) - c2_deriv(m, p - 1, s - h)) / (2 * h);
        double an = c2_deriv(m, p, s);
        INFO(m.describe() << " p=" << p << " s=" << s);
        CHECK(std::abs(fd - an) <= std::max(1e-6, 1e-4 * std::abs(an)));
      }
    }
  }
}

TEST_CASE("spectral moments") {
  CHECK(spectral_moment(CovarianceModel::matern(1, 3.0, 1.0), 1) == Approx(1.5).epsilon(1e-15));
  CHECK(spectral_moment(CovarianceModel::random_wave(1, 2.0), 2) == Approx(1.0 / 16).epsilon(1e-15));
  CHECK(spectral_moment(CovarianceModel::gaussian(1, 1.0), 2) == Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(spectral_moment(CovarianceModel::matern(1, 3.0, 1.0), 3), InsufficientSmoothness);
  for (const auto& m : smooth_models()) CHECK(spectral_moment(m, 0) == 1.0);

  CHECK(moment_ratio(CovarianceModel::matern(2, 4.0, 1.0)) == Approx(2.0).epsilon(1e-15));
  CHECK(moment_ratio(CovarianceModel::random_wave(2, 1.0)) == Approx(0.5).epsilon(1e-15));
  CHECK(moment_ratio(CovarianceModel::gaussian(2, 2.0)) == Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(moment_ratio(CovarianceModel::matern(2, 1.5, 1.0)), InsufficientSmoothness);
}

TEST_CASE("partial_c: trivial values, symmetries, explicit formulas") {
  for (const auto& m : smooth_models()) {
    int d = m.dim();
    std::vector<int> zero(d, 0);
    std::vector<double> t0(d, 0.0);
    CHECK(partial_c(m, zero, t0) == Approx(1.0));
    std::vector<int> a(d, 0);
    a[0] = 3;
    CHECK(partial_c(m, a, t0) == 0.0);
    a[0] = 1;
    CHECK(partial_c(m, a, t0) == 0.0);
  }
  // explicit formulas in 2-d with distinct indices i=0, j=1
  auto m = CovarianceModel::matern(2, 5.5, 0.9);
  std::vector<double> t{0.3, -0.45};
  double u = t[0] * t[0] + t[1] * t[1];
  double c1v = c2_deriv(m, 1, u), c2v = c2_deriv(m, 2, u), c3v = c2_deriv(m, 3, u), c4v = c2_deriv(m, 4, u);
  double ti = t[0], tj = t[1];
  CHECK(partial_c(m, std::vector<int>{1, 0}, t) == Approx(2 * ti * c1v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{2, 0}, t) == Approx(2 * c1v + 4 * ti * ti * c2v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{1, 1}, t) == Approx(4 * ti * tj * c2v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{3, 0}, t) == Approx(12 * ti * c2v + 8 * ti * ti * ti * c3v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{2, 1}, t) == Approx(4 * tj * c2v + 8 * ti * ti * tj * c3v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{4, 0}, t) ==
        Approx(12 * c2v + 48 * ti * ti * c3v + 16 * std::pow(ti, 4) * c4v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{2, 2}, t) ==
        Approx(4 * c2v + 8 * (ti * ti + tj * tj) * c3v + 16 * ti * ti * tj * tj * c4v).epsilon(1e-12));
  CHECK(partial_c(m, std::vector<int>{3, 1}, t) == Approx(24 * ti * tj * c3v + 16 * ti * ti * ti * tj * c4v).epsilon(1e-12));

  // isotropy and parity
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto m3 = CovarianceModel::gaussian(3, 0.8);
  std::vector<std::vector<int>> alphas{{1, 2, 0}, {0, 1, 3}, {2, 1, 1}, {1, 0, 0}, {1, 1, 1}};
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x{U(eng), U(eng), U(eng)};
    for (auto al : alphas) {
      double v = partial_c(m3, al, x);
      std::vector<int> ap{al[2], al[0], al[1]};
      std::vector<double> xp{x[2], x[0], x[1]};
      CHECK(partial_c(m3, ap, xp) == Approx(v).epsilon(1e-13));
      std::vector<double> xm{-x[0], -x[1], -x[2]};
      int n = al[0] + al[1] + al[2];
      CHECK(partial_c(m3, al, xm) == Approx((n % 2 ? -1 : 1) * v).epsilon(1e-13));
    }
  }
}

TEST_CASE("partial_c matches 4th-order finite differences of c") {
  auto m = CovarianceModel::gaussian(2, 1.0);
  std::vector<double> t{0.3, 0.4};
  auto c = [&](double x, double y) { return c1(m, std::hypot(x, y)); };
  double h = 1e-2;
  double fd = (-c(t[0] + 2 * h, t[1]) + 16 * c(t[0] + h, t[1]) - 30 * c(t[0], t[1]) + 16 * c(t[0] - h, t[1]) -
               c(t[0] - 2 * h, t[1])) / (12 * h * h);
  CHECK(std::abs(partial_c(m, std::vector<int>{2, 0}, t) - fd) < 1e-5);
}

TEST_CASE("pairwise nondegeneracy") {
  auto rwm = CovarianceModel::random_wave(1, 1.0);
  CHECK_FALSE(check_pairwise_nondegeneracy(rwm, std::numbers::pi).ok);
  CHECK(check_pairwise_nondegeneracy(rwm, 1.0).ok);
  // Matern nu=3.5, phi such that rho_{0:2} = 100 in d=2
  double nu = 3.5;
  double phi = std::sqrt(nu / (nu - 2) * 2.0 / (std::numbers::pi * std::sqrt(3.0) * 100.0));
  auto mat = CovarianceModel::matern(2, nu, phi);
  for (double r : {0.005, 0.02, 0.05, 0.1, 0.3, 1.0}) CHECK(check_pairwise_nondegeneracy(mat, r).ok);
  auto near0 = check_pairwise_nondegeneracy(mat, 1e-7);
  CHECK(near0.margin1 < 1e-10 * near0.tolerance / 1e-12);
  auto z = check_pairwise_nondegeneracy(CovarianceModel::gaussian(2, 1.0), 0.0);
  CHECK(z.margin1 == 0.0);
  CHECK(z.margin2 == 0.0);
  CHECK_FALSE(z.ok);
}

TEST_CASE("integrability") {
  for (double nu : {0.5, 2.5, 3.5, 8.0}) {
    auto r = check_integrability(CovarianceModel::matern(2, nu, 1.0));
    INFO("nu=" << nu << " " << r.verdict);
    CHECK(r.ok);
    CHECK(std::isfinite(r.tail_integral));
  }
  CHECK(check_integrability(CovarianceModel::gaussian(1, 0.3)).ok);
  for (int d = 1; d <= 3; ++d) {
    auto r = check_integrability(CovarianceModel::random_wave(d, 1.0));
    CHECK_FALSE(r.ok);
    CHECK(r.verdict.find("divergent oscillatory") != std::string::npos);
  }
  CHECK(xi_envelope(CovarianceModel::gaussian(1, 1.0), 2.0) > 0);
}

TEST_CASE("spectral-moment identity against Bessel small-argument limits") {
  std::vector<CovarianceModel> ms = smooth_models();
  ms.push_back(CovarianceModel::matern(2, 3.7, 0.4));
  for (const auto& m : ms) {
    for (int p = 0; p <= 3; ++p) {
      if (p >= m.max_derivative_at_zero() + 1) continue;
      double lhs = spectral_moment(m, p);
      double f = std::tgamma(2 * p + 1.0) / std::tgamma(p + 1.0) * ((p % 2) ? -1 : 1);
      INFO(m.describe() << " p=" << p);
      CHECK(std::abs(lhs - f * c2_deriv_zero_limit(m, p)) <= 1e-10 * lhs);
      CHECK(std::abs(lhs - f * c2_deriv(m, p, 0.0)) <= 1e-10 * lhs);
    }
  }
  // the limit is approached by the Bessel form at small s
  auto m = CovarianceModel::matern(2, 4.5, 1.0);
  CHECK(c2_deriv(m, 2, 1e-9) == Approx(c2_deriv_zero_limit(m, 2)).epsilon(1e-6));
  auto w = CovarianceModel::random_wave(3, 1.0);
  CHECK(c2_deriv(w, 3, 1e-9) == Approx(c2_deriv_zero_limit(w, 3)).epsilon(1e-6));
}
