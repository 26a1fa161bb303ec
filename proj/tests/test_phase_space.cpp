#include "doctest.h"

#include <cmath>
#include <random>

#include "svl/geodesic_flow.hpp"
#include "svl/phase_space.hpp"

using namespace svl;

namespace {

const BlackHoleParams bh = BlackHoleParams::standard(1.0);

PhasePoint sample_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PhasePoint p;
  p.t = 4.0 * uni(rng) - 2.0;
  p.r_star = 12.0 * uni(rng) - 6.0;
  p.r = radius_from_tortoise(p.r_star, bh);
  p.theta = 0.3 + (M_PI - 0.6) * uni(rng);
  p.phi = 2.0 * M_PI * uni(rng);
  p.v_rstar = 2.0 * uni(rng) - 1.0;
  p.v_theta = 2.0 * uni(rng) - 1.0;
  p.v_phi = 2.0 * uni(rng) - 1.0;
  if (std::abs(p.v_rstar) + std::abs(p.v_theta) + std::abs(p.v_phi) < 1e-3) p.v_rstar = 0.5;
  return p;
}

}  // namespace

TEST_CASE("mass shell frames at reference covectors") {
  // radial null covector
  PhasePoint p{0.0, 0.0, 3.0, M_PI / 2, 0.0, 1.0, 0.0, 0.0};
  auto f = mass_shell_energy(p, bh);
  CHECK(f.vt == doctest::Approx(-1.0));
  CHECK(f.vu == doctest::Approx(-1.0));
  CHECK(f.vubar == doctest::Approx(0.0));
  CHECK(f.ell == doctest::Approx(0.0));

  // orbiting covector at the photon sphere
  PhasePoint q{0.0, 0.0, 3.0, M_PI / 2, 0.0, 0.0, 0.0, std::sqrt(3.0)};
  auto g = mass_shell_energy(q, bh);
  CHECK(g.ell == doctest::Approx(std::sqrt(3.0)));
  CHECK(g.vt == doctest::Approx(-1.0 / 3.0));
  CHECK(g.vu == doctest::Approx(-1.0 / 6.0));
  CHECK(g.vubar == doctest::Approx(-1.0 / 6.0));

  // v_t^2 = Delta L^2 / r^2 at r = 4 with L^2 = 128
  PhasePoint w{0.0, tortoise_from_radius(4.0, bh), 4.0, M_PI / 2, 0.0, 0.0, 0.0, std::sqrt(128.0)};
  CHECK(mass_shell_energy(w, bh).vt == doctest::Approx(-2.0));

  CHECK_THROWS_AS(mass_shell_energy(PhasePoint{0, 0, 3.0, 1.0, 0, 0, 0, 0}, bh),
                  std::invalid_argument);
}

TEST_CASE("mass shell invariants over random samples") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const PhasePoint p = sample_point(rng);
    const auto f = mass_shell_energy(p, bh);
    const double Delta = lapse(p.r, bh.M);
    // null constraint
    const double shell = (-f.vt * f.vt + p.v_rstar * p.v_rstar) / Delta +
                         f.ell * f.ell / (p.r * p.r);
    CHECK(std::abs(shell) <= 1e-12 * f.vt * f.vt / Delta + 1e-14);
    // sign discipline
    CHECK(f.vt < 0.0);
    CHECK(f.vu <= 0.0);
    CHECK(f.vubar <= 0.0);
    CHECK(f.vN <= f.vt);
    // product identity 4 |vu||vubar| = Delta L^2 / r^2
    CHECK(4.0 * std::abs(f.vu) * std::abs(f.vubar) ==
          doctest::Approx(Delta * f.ell * f.ell / (p.r * p.r)).epsilon(1e-11));
    // degree-1 homogeneity under momentum scaling
    PhasePoint q = p;
    q.v_rstar *= 3.0; q.v_theta *= 3.0; q.v_phi *= 3.0;
    const auto g = mass_shell_energy(q, bh);
    CHECK(g.vt == doctest::Approx(3.0 * f.vt).epsilon(1e-12));
    CHECK(g.vu == doctest::Approx(3.0 * f.vu).epsilon(1e-12));
    CHECK(g.vubar == doctest::Approx(3.0 * f.vubar).epsilon(1e-12));
    CHECK(g.ell == doctest::Approx(3.0 * f.ell).epsilon(1e-12));
    CHECK(g.vN == doctest::Approx(3.0 * f.vN).epsilon(1e-12));
  }
}

TEST_CASE("horizon frame comparability is logged over the inner region") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double lo = 1e300, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    PhasePoint p;
    p.r = 2.0 + 1e-4 + (bh.R0 - 2.0 - 1e-4) * uni(rng);
    p.r_star = tortoise_from_radius(p.r, bh);
    p.theta = 0.4 + 2.2 * uni(rng);
    p.phi = 2 * M_PI * uni(rng);
    p.v_rstar = 2.0 * uni(rng) - 1.0;
    p.v_theta = 2.0 * uni(rng) - 1.0;
    p.v_phi = 2.0 * uni(rng) - 1.0;
    if (std::abs(p.v_rstar) + std::abs(p.v_theta) + std::abs(p.v_phi) < 1e-3) continue;
    const auto f = mass_shell_energy(p, bh);
    const double Delta = lapse(p.r, bh.M);
    const double comp = std::abs(f.vubar) + std::abs(f.vu) / Delta + f.ell / p.r;
    const double ratio = std::abs(f.vN) / comp;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    CHECK(std::abs(f.vt) <= std::abs(f.vN) + 1e-14 * std::abs(f.vt));
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1e6);
  MESSAGE("comparability ratio interval [", lo, ", ", hi, "]");
}

TEST_CASE("transition profile chi") {
  CHECK(chi(bh.r0, bh) == doctest::Approx(1.0));
  CHECK(chi(bh.r1, bh) == doctest::Approx(0.0));
  CHECK(chi(0.5 * (bh.r0 + bh.r1), bh) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(chi(2.1, bh) == 1.0);
  CHECK(chi(3.5, bh) == 0.0);
  // monotone non-increasing
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = bh.r0 + (bh.r1 - bh.r0) * i / 100.0;
    const double c = chi(r, bh);
    CHECK(c <= prev + 1e-15);
    prev = c;
  }
  // v_N reduces to v_t beyond r1
  PhasePoint p{0.0, tortoise_from_radius(3.5, bh), 3.5, M_PI / 2, 0.0, 0.3, 0.0, 1.0};
  const auto f = mass_shell_energy(p, bh);
  CHECK(f.vN == doctest::Approx(f.vt).epsilon(1e-15));
}

TEST_CASE("radially weighted ratio weight") {
  // v_ubar = 0: weight vanishes for any positive exponents
  PhasePoint out{0.0, 0.0, 3.0, M_PI / 2, 0.0, 1.0, 0.0, 0.0};
  auto f_out = mass_shell_energy(out, bh);
  CHECK(f_out.vubar == doctest::Approx(0.0));
  CHECK(weight_W(f_out, out.r, 1.5, 0.75) == doctest::Approx(0.0));

  // v_ubar = v_t: weight equals r^p
  PhasePoint in{0.0, 0.0, 3.0, M_PI / 2, 0.0, -1.0, 0.0, 0.0};
  auto f_in = mass_shell_energy(in, bh);
  CHECK(f_in.vubar == doctest::Approx(f_in.vt));
  CHECK(weight_W(f_in, in.r, 1.5, 0.75) == doctest::Approx(std::pow(3.0, 1.5)));

  // p = 0: the ratio power lies in [0, 1]
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const PhasePoint p = sample_point(rng);
    const auto f = mass_shell_energy(p, bh);
    const double w = weight_W(f, p.r, 0.0, 1.3);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0 + 1e-14);
  }
}

TEST_CASE("lifted rotations annihilate the radial momentum and ell") {
  std::mt19937_64 rng(13);
  auto vr_of = [](const auto& q) { return q.v_rstar; };
  auto ell_of = [](const auto& q) {
    using std::sqrt;
    return sqrt(angular_momentum_sq(q));
  };
  for (int n = 0; n < 1000; ++n) {
    const PhasePoint p = sample_point(rng);
    for (int i = 1; i <= 3; ++i) {
      CHECK(std::abs(lifted_rotation(i, vr_of, p)) <= 1e-12);
      const double scale = std::max(1.0, std::abs(mass_shell_energy(p, bh).ell));
      CHECK(std::abs(lifted_rotation(i, ell_of, p)) <= 1e-10 * scale);
    }
  }
  // the axial generator is a plain phi derivative
  const PhasePoint p{0.0, 0.0, 3.0, 1.1, 0.7, 0.2, 0.3, 0.4};
  auto fphi = [](const auto& q) { return q.v_phi * q.phi; };
  CHECK(lifted_rotation(3, fphi, p) == doctest::Approx(p.v_phi));
  CHECK_THROWS_AS(rotation_seed(1, PhasePoint{0, 0, 3.0, 0.0, 0, 1, 0, 0}), std::domain_error);
}

TEST_CASE("fiber measure density") {
  PhasePoint p{0.0, tortoise_from_radius(4.0, bh), 4.0, M_PI / 2, 0.0, 1.0, 0.0, 0.0};
  const auto f = mass_shell_energy(p, bh);
  CHECK(f.vt == doctest::Approx(-1.0));
  CHECK(fiber_measure_density(p, f) == doctest::Approx(1.0 / 16.0));

  // doubling the momentum halves the density
  PhasePoint q = p;
  q.v_rstar *= 2.0;
  const auto g = mass_shell_energy(q, bh);
  CHECK(fiber_measure_density(q, g) == doctest::Approx(0.5 * fiber_measure_density(p, f)));

  PhasePoint pole = p;
  pole.theta = 1e-16;
  CHECK_THROWS_AS(fiber_measure_density(pole, f), std::domain_error);
}

TEST_CASE("fiber measure integrates a smooth function like a brute-force grid") {
  // integrate h(v) = exp(-|v|^2) over a momentum box at fixed base point with
  // the density 1/(r^2 sin(theta) |v_t|), two independent quadratures
  const double r = 3.3, th = 1.1;
  const double rs = tortoise_from_radius(r, bh);
  auto integrand = [&](double a, double b, double c) {
    PhasePoint p{0.0, rs, r, th, 0.3, a, b, c};
    const auto f = mass_shell_energy(p, bh);
    return std::exp(-(a * a + b * b + c * c)) * fiber_measure_density(p, f);
  };
  auto gauss = [&](int n) {
    // tensor Gauss-Legendre on [0.4, 1.4] x [-0.5, 0.5] x [0.2, 0.9]
    std::vector<double> x(n), w(n);
    // Golub-Welsch via Newton on Legendre polynomials
    for (int i = 0; i < n; ++i) {
      double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = xi;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
          p0 = p1; p1 = p2;
        }
        const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
        const double step = p1 / dp;
        xi -= step;
        if (std::abs(step) < 1e-15) break;
      }
      double p0 = 1.0, p1 = xi;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1; p1 = p2;
      }
      const double dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
      x[i] = xi;
      w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
    const double a0 = 0.4, a1 = 1.4, b0 = -0.5, b1 = 0.5, c0 = 0.2, c1 = 0.9;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double a = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * x[i];
          const double b = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * x[j];
          const double c = 0.5 * (c0 + c1) + 0.5 * (c1 - c0) * x[k];
          acc += w[i] * w[j] * w[k] * integrand(a, b, c);
        }
    return acc * 0.125 * (a1 - a0) * (b1 - b0) * (c1 - c0);
  };
  const double coarse = gauss(14), fine = gauss(26);
  CHECK(std::abs(coarse - fine) <= 1e-10 * std::abs(fine));
}

TEST_CASE("exponent admissibility") {
  const auto a = admissible_exponents(1.9, 1.05);
  CHECK(a.zeta_ceil == doctest::Approx(1.0 / 1.05 + 1.0 / (1.05 * 1.05)).epsilon(1e-14));
  CHECK(a.zeta_ceil < 1.9);
  CHECK_FALSE(a.ok);

  const auto b = admissible_exponents(1.9, 1.02);
  CHECK(b.zeta_ceil == doctest::Approx(1.941561).epsilon(1e-6));
  CHECK(b.ok);
  CHECK(b.q_p == doctest::Approx(0.95));
  CHECK(b.ceil_p == 2);

  const auto c = admissible_exponents(2.0, 1.0001);
  CHECK_FALSE(c.ok);  // integer p is excluded
  CHECK(c.q_p == doctest::Approx(1.0));

  const auto d = admissible_exponents(0.5, 1.02);
  CHECK_FALSE(d.ceil_even);  // ceil = 1 odd
  CHECK(d.q_p == doctest::Approx(0.75));
}

TEST_CASE("liouville velocity at reference configurations") {
  // orbiting photon-sphere configuration: no radial force, no radial drift
  PhasePoint circ{0.0, 0.0, 3.0, M_PI / 2, 0.0, 0.0, 0.0, std::sqrt(3.0)};
  const auto dc = liouville_rhs(circ, 1.0);
  CHECK(dc.dv_rstar == doctest::Approx(0.0));
  CHECK(dc.dr_star == doctest::Approx(0.0));
  CHECK(dc.dv_phi == 0.0);

  // radial ray: unit tortoise speed in coordinate time
  PhasePoint rad{0.0, 1.0, radius_from_tortoise(1.0, bh), M_PI / 2, 0.0, 0.7, 0.0, 0.0};
  const auto dr = liouville_rhs(rad, 1.0);
  CHECK(dr.dv_rstar == doctest::Approx(0.0));
  CHECK(dr.dtheta == doctest::Approx(0.0));
  CHECK(dr.dphi == doctest::Approx(0.0));
  CHECK(dr.dr_star / dr.dt == doctest::Approx(1.0));

  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const auto d = liouville_rhs(sample_point(rng), 1.0);
    CHECK(d.dv_phi == 0.0);
  }
}
