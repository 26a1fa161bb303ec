#include "doctest.h"

#include <cmath>

#include "svl/moments.hpp"
#include "svl/vlasov.hpp"

using namespace svl;

namespace {

const BlackHoleParams bh = BlackHoleParams::standard(1.0);

DistributionSpec default_bump(double amplitude = 1.0) {
  return DistributionSpec::separable_bump(amplitude, 0.0, 2.0, 1.0, 0.45, 0.0, 0.35, 0.0, 0.35);
}

// independent nested Gauss-Legendre quadrature of the number flux through the
// carrier slice (r*, theta, v^3 with the phi volume factored out analytically)
double brute_force_flux(const DistributionSpec& spec, int n) {
  auto [gx, gw] = detail::gauss_legendre(n);
  const SupportBox& b = spec.box;
  auto map = [](double lo, double hi, double x) { return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x; };
  double acc = 0.0;
  for (int i0 = 0; i0 < n; ++i0)
    for (int i1 = 0; i1 < n; ++i1)
      for (int i3 = 0; i3 < n; ++i3)
        for (int i4 = 0; i4 < n; ++i4)
          for (int i5 = 0; i5 < n; ++i5) {
            PhasePoint p;
            p.r_star = map(b.rstar_lo, b.rstar_hi, gx[i0]);
            p.r = radius_from_tortoise(p.r_star, bh);
            p.t = spec.carrier_time(p.r, bh);
            p.theta = map(b.theta_lo, b.theta_hi, gx[i1]);
            p.phi = 0.0;
            p.v_rstar = map(b.vr_lo, b.vr_hi, gx[i3]);
            p.v_theta = map(b.vth_lo, b.vth_hi, gx[i4]);
            p.v_phi = map(b.vph_lo, b.vph_hi, gx[i5]);
            const double f = spec.value(p);
            if (f == 0.0) continue;
            const MomentumFrame fr = mass_shell_energy(p, bh);
            acc += gw[i0] * gw[i1] * gw[i3] * gw[i4] * gw[i5] * spec.flux_density(p, fr, bh);
          }
  const double vol = (b.rstar_hi - b.rstar_lo) * (b.theta_hi - b.theta_lo) *
                     (b.vr_hi - b.vr_lo) * (b.vth_hi - b.vth_lo) * (b.vph_hi - b.vph_lo);
  return acc * vol / 32.0 * (b.phi_hi - b.phi_lo);
}

}  // namespace

TEST_CASE("distribution profiles") {
  const auto spec = default_bump();
  PhasePoint center;
  center.r_star = 0.0;
  center.r = 3.0;
  center.t = spec.carrier_time(center.r, bh);
  center.theta = M_PI / 2;
  center.phi = 1.0;
  center.v_rstar = 1.0;
  center.v_theta = 0.0;
  center.v_phi = 0.0;
  CHECK(spec.value(center) == doctest::Approx(1.0));  // bump(0)^5 = 1
  PhasePoint off = center;
  off.v_rstar = 2.0;
  CHECK(spec.value(off) == 0.0);

  // concentrated family peaks at the orbiting configuration
  const auto trap = DistributionSpec::trapping_family(0.1, bh);
  PhasePoint orbit;
  orbit.r_star = 0.0;
  orbit.r = 3.0;
  orbit.t = trap.t_anchor;
  orbit.theta = M_PI / 2;
  orbit.phi = 0.0;
  orbit.v_rstar = 0.0;
  orbit.v_theta = 0.0;
  orbit.v_phi = std::sqrt(3.0);
  CHECK(trap.value(orbit) == doctest::Approx(1.0));
  orbit.phi = 0.2;  // outside the phi concentration for epsilon = 0.1
  CHECK(trap.value(orbit) == 0.0);
  CHECK(trap.t_anchor == doctest::Approx(1.0 + std::abs(bh.u0) + 1.0));

  CHECK_THROWS_AS(DistributionSpec::trapping_family(-0.1, bh), std::invalid_argument);
  // a momentum box containing the zero covector is rejected
  CHECK_THROWS_AS(
      DistributionSpec::separable_bump(1.0, 0.0, 2.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5),
      std::invalid_argument);
}

TEST_CASE("ensemble construction: linearity and emptiness") {
  const auto ens1 = build_ensemble(default_bump(1.0), bh, 4000);
  const auto ens2 = build_ensemble(default_bump(2.0), bh, 4000);
  REQUIRE(ens1.particles.size() == ens2.particles.size());
  CHECK(ens2.total_number_flux == doctest::Approx(2.0 * ens1.total_number_flux).epsilon(1e-14));
  for (size_t i = 0; i < ens1.particles.size(); i += 97)
    CHECK(ens2.particles[i].weight == doctest::Approx(2.0 * ens1.particles[i].weight));

  CHECK(ens1.total_number_flux > 0.0);
  for (const auto& p : ens1.particles) CHECK(p.weight > 0.0);

  // zero amplitude: empty ensemble, zero flux
  const auto empty = build_ensemble(default_bump(0.0), bh, 1000);
  CHECK(empty.particles.empty());
  CHECK(empty.total_number_flux == 0.0);
}

TEST_CASE("ensemble total flux matches the brute-force quadrature oracle") {
  const auto spec = default_bump();
  const double oracle = brute_force_flux(spec, 18);
  const double oracle_fine = brute_force_flux(spec, 24);
  CHECK(std::abs(oracle - oracle_fine) <= 2e-4 * std::abs(oracle_fine));  // oracle resolved

  const auto ens = build_ensemble(spec, bh, 100000);
  CHECK(ens.particles.size() <= 100000);
  CHECK(std::abs(ens.total_number_flux - oracle_fine) <= 5e-3 * oracle_fine);
  MESSAGE("ensemble N = ", ens.particles.size(), ", flux = ", ens.total_number_flux,
          ", oracle = ", oracle_fine);
}

TEST_CASE("ensemble refinement converges") {
  const auto spec = default_bump();
  const double oracle = brute_force_flux(spec, 24);
  double prev_err = 1e300;
  for (long n : {2000L, 20000L, 200000L}) {
    const auto ens = build_ensemble(spec, bh, n);
    const double err = std::abs(ens.total_number_flux - oracle) / oracle;
    CHECK(err < prev_err * 1.2);  // allow plateaus near the oracle's own error
    prev_err = err;
  }
  CHECK(prev_err <= 2e-3);
}

TEST_CASE("jittered sampling is reproducible and consistent") {
  const auto spec = default_bump();
  const auto a = build_ensemble(spec, bh, 20000, 42, true);
  const auto b = build_ensemble(spec, bh, 20000, 42, true);
  REQUIRE(a.particles.size() == b.particles.size());
  CHECK(a.total_number_flux == b.total_number_flux);
  const auto c = build_ensemble(spec, bh, 20000, 43, true);
  CHECK(a.total_number_flux != c.total_number_flux);
  const double oracle = brute_force_flux(spec, 24);
  CHECK(std::abs(a.total_number_flux - oracle) <= 0.03 * oracle);
}

TEST_CASE("evaluate_f on the carrier returns the profile") {
  const auto spec = default_bump();
  const auto win = spec.window(bh);
  PhasePoint p;
  p.r_star = 0.5;
  p.r = radius_from_tortoise(0.5, bh);
  p.t = spec.carrier_time(p.r, bh);
  p.theta = M_PI / 2 + 0.2;
  p.phi = 2.0;
  p.v_rstar = 0.9;
  p.v_theta = 0.1;
  p.v_phi = 0.2;
  CHECK(evaluate_f(p, spec, win, bh) == doctest::Approx(spec.value(p)));
  CHECK(spec.value(p) > 0.0);

  // zero amplitude transports to zero without tracing
  auto zero_spec = default_bump();
  zero_spec.amplitude = 0.0;
  CHECK(zero_spec.value(p) == 0.0);

  // a point in the past of the carrier is rejected
  PhasePoint past = p;
  past.t -= 5.0;
  CHECK_THROWS_AS(evaluate_f(past, spec, win, bh), std::domain_error);
}

TEST_CASE("evaluate_f is constant along forward characteristics") {
  const auto spec = default_bump();
  const auto win = spec.window(bh);
  // start on the carrier inside the support, integrate forward, re-evaluate
  PhasePoint p;
  p.r_star = -0.4;
  p.r = radius_from_tortoise(p.r_star, bh);
  p.t = spec.carrier_time(p.r, bh);
  p.theta = M_PI / 2 - 0.3;
  p.phi = 0.7;
  p.v_rstar = 1.1;
  p.v_theta = 0.15;
  p.v_phi = -0.1;
  const double f0 = spec.value(p);
  REQUIRE(f0 > 0.0);

  EquatorialFrame frame;
  const PhasePoint q0 = equatorial_reduce(p, frame);
  for (double s_target : {2.0, 7.0, 19.0}) {
    Budget leg;
    leg.s_max = s_target;
    const auto res = integrate_reduced(q0, bh, {}, leg, StepControls{});
    REQUIRE(res.reason == StopReason::ParameterBudget);
    const PhasePoint x = equatorial_restore(res.end_point, frame);
    const double f1 = evaluate_f(x, spec, win, bh);
    CHECK(f1 == doctest::Approx(f0).epsilon(1e-8));
  }
}

TEST_CASE("conserved windows prune unreachable momenta") {
  const auto spec = default_bump();
  const auto win = spec.window(bh);
  // momentum far above the supported |v_t| range: no integration, plain zero
  PhasePoint p;
  p.r_star = 1.0;
  p.r = radius_from_tortoise(1.0, bh);
  p.t = spec.carrier_time(p.r, bh) + 10.0;
  p.theta = M_PI / 2;
  p.phi = 0.0;
  p.v_rstar = 50.0;
  p.v_theta = 0.0;
  p.v_phi = 0.0;
  CHECK(evaluate_f(p, spec, win, bh) == 0.0);

  // angular momentum beyond the supported range
  p.v_rstar = 0.1;
  p.v_phi = 30.0;
  CHECK(evaluate_f(p, spec, win, bh) == 0.0);
}

TEST_CASE("support windows bound the sampled frames") {
  const auto spec = default_bump();
  const auto win = spec.window(bh);
  const auto ens = build_ensemble(spec, bh, 3000);
  for (const auto& part : ens.particles) {
    const auto f = mass_shell_energy(part.point, bh);
    CHECK(std::abs(f.vt) >= win.abs_vt_lo);
    CHECK(std::abs(f.vt) <= win.abs_vt_hi);
    CHECK(f.ell <= win.ell_hi);
    const double u = part.point.t - part.point.r_star;
    CHECK(u >= win.u_lo);
    CHECK(u <= win.u_hi);
  }
}
