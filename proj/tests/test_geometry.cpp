#include "doctest.h"

#include <cmath>
#include <random>

#include "svl/geometry.hpp"

using namespace svl;

TEST_CASE("tortoise coordinate at reference radii") {
  const auto bh = BlackHoleParams::standard(1.0);
  CHECK(tortoise_from_radius(3.0, bh) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(tortoise_from_radius(4.0, bh) == doctest::Approx(1.0 + 2.0 * std::log(2.0)).epsilon(1e-14));
  const double r = 2.0 + 1e-6;
  // exact substitution, using the represented value of r - 2M
  CHECK(tortoise_from_radius(r, bh) ==
        doctest::Approx(-1.0 + (r - 2.0) + 2.0 * std::log(r - 2.0)).epsilon(1e-13));
  CHECK(tortoise_from_radius(r, bh) ==
        doctest::Approx(-1.0 + 1e-6 + 2.0 * std::log(1e-6)).epsilon(1e-10));
  CHECK_THROWS_AS(tortoise_from_radius(2.0, bh), std::domain_error);
  CHECK_THROWS_AS(tortoise_from_radius(1.9, bh), std::domain_error);
}

TEST_CASE("tortoise inversion at reference values and round trip") {
  const auto bh = BlackHoleParams::standard(1.0);
  CHECK(radius_from_tortoise(0.0, bh) == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(radius_from_tortoise(1.0 + 2.0 * std::log(2.0), bh) == doctest::Approx(4.0).epsilon(1e-13));

  // 10^4 log-spaced radii in (2M + 1e-8, 1e4 M)
  const int n = 10000;
  const double lo = std::log(1e-8), hi = std::log(1e4 - 2.0);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = 2.0 + std::exp(lo + (hi - lo) * i / double(n - 1));
    const double back = radius_from_tortoise(tortoise_from_radius(r, bh), bh);
    worst = std::max(worst, std::abs(back - r) / r);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("tortoise map is strictly increasing") {
  const auto bh = BlackHoleParams::standard(1.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = 2.0 + std::pow(10.0, -6.0 + 8.0 * uni(rng));
    const double b = a * (1.0 + 1e-6 + uni(rng));
    CHECK(tortoise_from_radius(a, bh) < tortoise_from_radius(b, bh));
  }
}

TEST_CASE("lapse times dr*/dr is one (finite differences)") {
  const auto bh = BlackHoleParams::standard(1.0);
  for (double r : {2.001, 2.5, 3.0, 4.0, 10.0, 100.0}) {
    const double h = 1e-5 * (r - 2.0);
    const double slope = (tortoise_from_radius(r + h, bh) - tortoise_from_radius(r - h, bh)) / (2 * h);
    CHECK(lapse(r, bh.M) * slope == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("chart transforms") {
  const auto bh = BlackHoleParams::standard(1.0);
  const double r = radius_from_tortoise(2.0, bh);
  const ChartValues cv = chart_transforms(5.0, 2.0, r, bh);
  CHECK(cv.u == doctest::Approx(3.0));
  CHECK(cv.ubar == doctest::Approx(7.0));
  CHECK(lapse(4.0, 1.0) == doctest::Approx(0.5));
  // Delta decreases to zero monotonically toward the horizon
  double prev = lapse(2.5, 1.0);
  for (double r2 = 2.4; r2 > 2.0 + 1e-9; r2 = 2.0 + (r2 - 2.0) * 0.5) {
    const double d = lapse(r2, 1.0);
    CHECK(d > 0.0);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("foliation geometry: gamma, unit normal, Ubar") {
  const auto bh = BlackHoleParams::standard(1.0);
  CHECK(foliation_geometry(Surface::sigma(0.0), 2.0, bh).gamma == doctest::Approx(std::sqrt(2.0)));

  // g(n, n) = -1 on the spacelike part: 2 (1/gamma)(gamma/Delta)(-Delta/2) = -1
  for (int i = 1; i <= 20; ++i) {
    const double r = 2.0 + (bh.R0 - 2.0) * i / 21.0;
    const auto fg = foliation_geometry(Surface::sigma(0.0), r, bh);
    const double gdotnn = 2.0 * fg.n_ubar_coeff * fg.n_u_coeff * (-lapse(r, bh.M) / 2.0);
    CHECK(gdotnn == doctest::Approx(-1.0).epsilon(1e-13));
  }

  // advanced-time parameterization of the initial slice: solve t* = tau for t
  // at radius r and form ubar = t + r*; the closed form must match.
  for (double r : {2.2, 3.0, 3.9}) {
    const double tau = 0.0;
    const double t = tau - 2.0 * bh.M * std::log(r - 2.0 * bh.M);
    const double ubar = t + tortoise_from_radius(r, bh);
    const auto fg = foliation_geometry(Surface::sigma(0.0), r, bh);
    CHECK(fg.Ubar == doctest::Approx(ubar).epsilon(1e-13));
  }
  CHECK(foliation_geometry(Surface::sigma(0.0), 3.0, bh).Ubar == doctest::Approx(0.0));
}

TEST_CASE("piecewise gamma0 is bounded above and below") {
  const auto bh = BlackHoleParams::standard(1.0);
  const double C = std::max(std::sqrt(1.0 + 2.0 * bh.M / (2.0 * bh.M)), 2.0 / lapse(bh.R0, bh.M));
  for (int i = 0; i < 2000; ++i) {
    const double r = 2.0 + 1e-9 + std::pow(10.0, -8.0 + 12.0 * i / 1999.0);
    const double g0 = foliation_gamma0(r, bh);
    CHECK(g0 >= 1.0 / C - 1e-12);
    CHECK(g0 <= C + 1e-12);
  }
}

TEST_CASE("crossing functions") {
  const auto bh = BlackHoleParams::standard(1.0);

  // a point of the initial slice inside the split radius lies on Sigma(0)
  const double r = 3.0;
  const double t = -2.0 * bh.M * std::log(r - 2.0 * bh.M);
  const double rs = tortoise_from_radius(r, bh);
  CHECK(crossing_value(Surface::sigma(0.0), t, rs, r, bh) == doctest::Approx(0.0).epsilon(1e-14));

  // beyond the split radius the level function is u - tau - u0
  const double r2 = 6.0, rs2 = tortoise_from_radius(r2, bh);
  const double tau = 2.5;
  const double t2 = tau + bh.u0 + rs2;
  CHECK(crossing_value(Surface::sigma(tau), t2, rs2, r2, bh) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(crossing_value(Surface::sigma(tau), t2 - 1.0, rs2, r2, bh) == doctest::Approx(-1.0));

  // the level function is continuous across r = R0
  const double eps = 1e-9;
  const double ra = bh.R0 - eps, rb = bh.R0 + eps;
  const double rsa = tortoise_from_radius(ra, bh), rsb = tortoise_from_radius(rb, bh);
  const double t3 = 7.0;
  const double Fa = crossing_value(Surface::sigma(tau), t3, rsa, ra, bh);
  const double Fb = crossing_value(Surface::sigma(tau), t3, rsb, rb, bh);
  CHECK(Fa == doctest::Approx(Fb).epsilon(1e-6));

  // horizon proxy vanishes on the proxy sphere
  const double rp = 2.0 * bh.M + bh.eps_horizon;
  CHECK(crossing_value(Surface::horizon_proxy(), 0.0, tortoise_from_radius(rp, bh), rp, bh) ==
        doctest::Approx(0.0).epsilon(1e-10));
  // and is negative outside it
  CHECK(crossing_value(Surface::horizon_proxy(), 0.0, 0.0, 3.0, bh) < 0.0);
}

TEST_CASE("parameter validation") {
  auto bh = BlackHoleParams::standard(1.0);
  CHECK_NOTHROW(bh.validate());

  // u0 is t0 - r*(R0) exactly
  CHECK(bh.u0 == doctest::Approx(bh.t0 - tortoise_from_radius(bh.R0, bh)).epsilon(1e-15));

  auto bad = bh;
  bad.r0 = 2.9;
  bad.finalize();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  auto bad2 = bh;
  bad2.R0 = 2.9;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);

  // the admissibility boundary sits near r = 2.45M (bisection oracle)
  double lo = 2.01, hi = 2.99;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (redshift_radius_admissible(mid, 1.0)) lo = mid; else hi = mid;
  }
  CHECK(lo == doctest::Approx(2.45).epsilon(0.01));
  // default r0 = 2.4M clears both inequalities with margin >= 0.03
  const double Delta = 1.0 - 2.0 / 2.4;
  const double margin1 = (1.0 - 2.4 / 4.0 - 4.0 * Delta * Delta) - 0.25;
  const double margin2 = (1.0 - 2.4 / 4.0) - 0.25;
  CHECK(margin1 >= 0.03);
  CHECK(margin2 >= 0.03);
}

TEST_CASE("foliation time increases along causal directions") {
  const auto bh = BlackHoleParams::standard(1.0);
  // future null directions at scattered points: tau strictly nondecreasing
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double rs = 6.0 * uni(rng);
    const double r = radius_from_tortoise(rs, bh);
    const double t = 3.0 * uni(rng);
    const double Delta = lapse(r, bh.M);
    const double dirn = uni(rng);  // v_rstar / |v_t| in [-1, 1]
    // displacement along a null direction: dt = 1, dr* = dirn (unit coordinate speed bound)
    const double h = 1e-6;
    const double r_after = radius_from_tortoise(rs + h * dirn * Delta / Delta, bh);
    const double tau0 = foliation_tau(t, rs, r, bh);
    const double tau1 = foliation_tau(t + h, rs + h * dirn, r_after, bh);
    CHECK(tau1 >= tau0 - 1e-12);
  }
}
