#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "svl/geometry.hpp"
#include "svl/phase_space.hpp"

namespace svl {

struct IdentityReport {
  std::string id;
  long samples = 0;
  double max_rel_err = 0.0;     // dual-number path, relative to the largest term
  double fd_max_rel_err = 0.0;  // finite-difference subsample
  double worst_margin = 0.0;    // inequalities (nonnegative when they hold)
  double tolerance = 0.0;
  bool pass = false;
  double recorded_constant = 0.0;  // auxiliary logged value (bound constants etc.)
};

struct VerifierOptions {
  long samples = 10000;
  std::uint64_t seed = 2024;
  double tol_dual = 1e-9;
  double tol_fd = 1e-5;
  double fd_fraction = 0.01;  // share of samples re-checked by finite differences
};

namespace detail {

inline double rel_gap(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

/// Straight-line central finite difference of a phase-space scalar along a
/// direction field; the independent second oracle next to the dual path.
template <class F>
double fd_directional(const F& func, const PhasePoint& p, const PhaseVelocityT<double>& dir,
                      double h) {
  auto shift = [&](double sgn) {
    PhasePoint q = p;
    q.t += sgn * h * dir.dt;
    q.r_star += sgn * h * dir.dr_star;
    q.r += sgn * h * dir.dr;
    q.theta += sgn * h * dir.dtheta;
    q.phi += sgn * h * dir.dphi;
    q.v_rstar += sgn * h * dir.dv_rstar;
    q.v_theta += sgn * h * dir.dv_theta;
    q.v_phi += sgn * h * dir.dv_phi;
    return func(q);
  };
  return (shift(+1.0) - shift(-1.0)) / (2.0 * h);
}

template <class F>
double fd_flow(const F& func, const PhasePoint& p, double M, double h = 1e-6) {
  return fd_directional(func, p, liouville_rhs(p, M), h);
}

struct SampleOptions {
  double r_lo, r_hi;
  bool log_radial = false;
};

inline PhasePoint draw_sample(std::mt19937_64& rng, const SampleOptions& so,
                              const BlackHoleParams& bh) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  PhasePoint p;
  if (so.log_radial) {
    const double a = std::log(so.r_lo - 2.0 * bh.M), b = std::log(so.r_hi - 2.0 * bh.M);
    p.r = 2.0 * bh.M + std::exp(a + (b - a) * uni(rng));
  } else {
    p.r = so.r_lo + (so.r_hi - so.r_lo) * uni(rng);
  }
  p.r_star = tortoise_from_radius(p.r, bh);
  p.t = 2.0 * uni(rng) - 1.0;
  p.theta = 0.4 + (M_PI - 0.8) * uni(rng);
  p.phi = 2.0 * M_PI * uni(rng);
  do {
    p.v_rstar = 2.0 * uni(rng) - 1.0;
    p.v_theta = 2.0 * uni(rng) - 1.0;
    p.v_phi = 2.0 * uni(rng) - 1.0;
  } while (std::abs(p.v_rstar) + std::abs(p.v_theta) + std::abs(p.v_phi) < 1e-2);
  return p;
}

}  // namespace detail

// scalar fields on the bundle, shared by several checks -------------------------

struct FieldVt {
  double M;
  template <class S>
  S operator()(const PhasePointT<S>& q) const { return mass_shell_vt(q, M); }
};
struct FieldEllSq {
  template <class S>
  S operator()(const PhasePointT<S>& q) const { return angular_momentum_sq(q); }
};
struct FieldVphi {
  template <class S>
  S operator()(const PhasePointT<S>& q) const { return q.v_phi; }
};
struct FieldVr {
  template <class S>
  S operator()(const PhasePointT<S>& q) const { return q.v_rstar; }
};
/// off-shell symbol g^{-1}(v,v) with the time component held fixed
struct FieldSymbol {
  double M;
  double vt0;
  template <class S>
  S operator()(const PhasePointT<S>& q) const {
    const S Delta = lapse(q.r, M);
    return (q.v_rstar * q.v_rstar - vt0 * vt0) / Delta + angular_momentum_sq(q) / (q.r * q.r);
  }
};
struct FieldAbsVN {
  const BlackHoleParams* bh;
  template <class S>
  S operator()(const PhasePointT<S>& q) const {
    using std::abs;
    return abs(mass_shell_energy(q, *bh).vN);
  }
};

// --- conserved quantities --------------------------------------------------------

inline IdentityReport check_conserved_quantities(const BlackHoleParams& bh,
                                                 const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "conserved_quantities";
  rep.tolerance = 1e-12;
  std::mt19937_64 rng(opt.seed);
  const detail::SampleOptions so{2.0 * bh.M + 1e-4, 40.0 * bh.M, true};
  double worst = 0.0;
  auto rel = [](const DirectionalValue& d) {
    return (d.scale > 0.0) ? std::abs(d.value) / d.scale : std::abs(d.value);
  };
  for (long n = 0; n < opt.samples; ++n) {
    const PhasePoint p = detail::draw_sample(rng, so, bh);
    const double vt = mass_shell_vt(p, bh.M);
    worst = std::max(worst, rel(liouville_apply_with_scale(FieldVt{bh.M}, p, bh.M)));
    worst = std::max(worst, rel(liouville_apply_with_scale(FieldEllSq{}, p, bh.M)));
    worst = std::max(worst, rel(liouville_apply_with_scale(FieldVphi{}, p, bh.M)));
    // the symbol hides a (v_r*^2 - v_t^2)/Delta cancellation; grant the
    // rounding of that internal magnitude before comparing to the tolerance
    const DirectionalValue sym = liouville_apply_with_scale(FieldSymbol{bh.M, vt}, p, bh.M);
    const double Delta = lapse(p.r, bh.M);
    const double cond = (vt * vt + p.v_rstar * p.v_rstar) * (2.0 * bh.M / (p.r * p.r)) *
                        std::abs(p.v_rstar) / (Delta * Delta);
    const double allowed = 64.0 * std::numeric_limits<double>::epsilon() * cond;
    const double excess = std::max(0.0, std::abs(sym.value) - allowed);
    worst = std::max(worst, excess / std::max(sym.scale, 1e-10));
  }
  rep.samples = opt.samples;
  rep.max_rel_err = worst;
  rep.pass = worst <= rep.tolerance;
  return rep;
}

// --- commutation of the flow with the lifted rotations ----------------------------

inline IdentityReport check_commutation(const BlackHoleParams& bh,
                                        const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "commutation";
  rep.tolerance = opt.tol_dual;
  std::mt19937_64 rng(opt.seed + 1);
  const detail::SampleOptions so{2.0 * bh.M + 5e-3, 25.0 * bh.M, true};

  // a small catalogue of smooth test functions on the bundle
  auto g1 = [](const auto& q) { return q.v_rstar; };
  auto g2 = [](const auto& q) {
    using std::cos;
    return q.t * q.v_phi + cos(q.theta) * q.v_theta;
  };
  auto g3 = [](const auto& q) {
    using std::cos; using std::sin;
    return q.r_star * sin(q.theta) * cos(q.phi) * q.v_theta +
           q.v_phi * q.v_phi / (1.0 + q.r * q.r) + sin(q.phi) * q.v_rstar;
  };
  auto g4 = [](const auto& q) {
    using std::sin;
    const auto st = sin(q.theta);
    return (q.v_theta * q.v_theta + q.v_phi * q.v_phi / (st * st)) * q.t;
  };

  double worst = 0.0;
  const double M = bh.M;
  auto run_one = [&](const auto& g, const PhasePoint& p, int i) {
    // T(Omega_i g) and Omega_i(T g) via nested duals
    auto omega_g = [&](const auto& q) { return g(rotation_seed(i, q)).d; };
    auto t_g = [&, M](const auto& q) { return g(flow_seed(q, M)).d; };
    const DirectionalValue a = liouville_apply_with_scale(omega_g, p, M);
    const DirectionalValue b = lifted_rotation_with_scale(i, t_g, p);
    const double scale = std::max({a.scale, b.scale, 1e-8});
    worst = std::max(worst, std::abs(a.value - b.value) / scale);
  };
  for (long n = 0; n < opt.samples / 4; ++n) {
    const PhasePoint p = detail::draw_sample(rng, so, bh);
    for (int i = 1; i <= 3; ++i) {
      run_one(g1, p, i);
      run_one(g2, p, i);
      run_one(g3, p, i);
      run_one(g4, p, i);
    }
  }
  rep.samples = opt.samples;
  rep.max_rel_err = worst;
  rep.pass = worst <= rep.tolerance;
  return rep;
}

// --- flow derivatives of the horizon-frame building blocks -------------------------

inline IdentityReport check_Ty(const BlackHoleParams& bh, const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "frame_building_blocks";
  rep.tolerance = 1e-10;
  std::mt19937_64 rng(opt.seed + 2);
  const detail::SampleOptions so{2.0 * bh.M + 1e-5, 20.0 * bh.M, true};
  const double M = bh.M;

  auto field_a = [M](const auto& q) {  // 2|v_u| / Delta
    const auto vt = mass_shell_vt(q, M);
    const auto vu = (vt - q.v_rstar) / 2.0;
    return -2.0 * vu / lapse(q.r, M);
  };
  auto field_b = [M](const auto& q) {  // Delta |v_t|
    return -lapse(q.r, M) * mass_shell_vt(q, M);
  };

  double worst = 0.0, fd_worst = 0.0;
  long used = 0;
  for (long n = 0; n < opt.samples; ++n) {
    const PhasePoint p = detail::draw_sample(rng, so, bh);
    const auto f = mass_shell_energy(p, bh);
    // generic configurations: near-radial ones condition the identity badly
    // (the special radial cases are asserted exactly in the unit tests)
    if (std::abs(f.vu) < 0.03 * std::abs(f.vt) || std::abs(f.vubar) < 0.03 * std::abs(f.vt))
      continue;
    const double Delta = lapse(p.r, M);
    const double r = p.r;
    const double term_a1 = 4.0 * M / (r * r) * f.vu * f.vu / (Delta * Delta);
    const double term_a2 = 4.0 / r * std::abs(f.vubar) * std::abs(f.vu) / Delta;
    const double closed_a = -term_a1 + term_a2;
    const double term_b = 2.0 * M / (r * r);
    const double closed_b = term_b * (f.vu * f.vu - f.vubar * f.vubar);
    const double da = liouville_apply(field_a, p, M);
    const double db = liouville_apply(field_b, p, M);
    worst = std::max(worst, std::abs(da - closed_a) / std::max(term_a1 + term_a2, 1e-10));
    worst = std::max(worst,
                     std::abs(db - closed_b) /
                         std::max(term_b * (f.vu * f.vu + f.vubar * f.vubar), 1e-10));
    if (used < long(opt.fd_fraction * opt.samples)) {
      const double fa = detail::fd_flow(field_a, p, M, 1e-6 * std::max(1.0, Delta));
      fd_worst = std::max(fd_worst, std::abs(fa - closed_a) / std::max(term_a1 + term_a2, 1e-6));
    }
    ++used;
  }
  rep.samples = used;
  rep.max_rel_err = worst;
  rep.fd_max_rel_err = fd_worst;
  rep.pass = worst <= rep.tolerance && fd_worst <= opt.tol_fd;
  return rep;
}

// --- horizon-frame dissipation inequality -------------------------------------------

inline IdentityReport check_redshift(const BlackHoleParams& bh, const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "horizon_frame_dissipation";
  rep.tolerance = 1e-12;
  std::mt19937_64 rng(opt.seed + 3);
  const double M = bh.M;
  const FieldAbsVN field{&bh};

  double worst_margin = 1e300;
  double far_err = 0.0;
  double B_recorded = 0.0;

  // (i) plateau region: -T(|v_N|) dominates the squared null pair
  const detail::SampleOptions inner{2.0 * M + 1e-6, bh.r0, true};
  for (long n = 0; n < opt.samples; ++n) {
    const PhasePoint p = detail::draw_sample(rng, inner, bh);
    const auto f = mass_shell_energy(p, bh);
    const double Delta = lapse(p.r, M);
    const double lhs = -liouville_apply(field, p, M);
    const double rhs =
        (f.vu * f.vu / (Delta * Delta) + 4.0 * f.vubar * f.vubar) / (9.0 * M);
    worst_margin = std::min(worst_margin, (lhs - rhs) / std::max(rhs, 1e-30));
  }
  // (ii) static region: the frame weight is exactly conserved
  const detail::SampleOptions outer{bh.r1, 30.0 * M, true};
  for (long n = 0; n < opt.samples; ++n) {
    const PhasePoint p = detail::draw_sample(rng, outer, bh);
    const DirectionalValue d = liouville_apply_with_scale(field, p, M);
    far_err = std::max(far_err, std::abs(d.value) / std::max(d.scale, 1e-10));
  }
  // (iii) transition zone: |T(|v_N|)| <= B v_t^2; B recorded, not asserted
  const detail::SampleOptions mid{bh.r0, bh.r1, false};
  for (long n = 0; n < opt.samples / 10; ++n) {
    const PhasePoint p = detail::draw_sample(rng, mid, bh);
    const double vt = mass_shell_vt(p, M);
    B_recorded = std::max(B_recorded, std::abs(liouville_apply(field, p, M)) / (vt * vt));
  }

  rep.samples = 2 * opt.samples + opt.samples / 10;
  rep.worst_margin = worst_margin;
  rep.max_rel_err = far_err;
  rep.recorded_constant = B_recorded;
  rep.pass = worst_margin >= 0.0 && far_err <= rep.tolerance;
  return rep;
}

// --- flow derivative of the radial ratio weights -------------------------------------

inline IdentityReport check_weight_hierarchy(double p_exp, double q_exp,
                                             const BlackHoleParams& bh,
                                             const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "weight_hierarchy_p" + std::to_string(p_exp) + "_q" + std::to_string(q_exp);
  rep.tolerance = 1e-10;
  if (!(0.0 <= p_exp && p_exp <= 2.0 * q_exp))
    throw std::invalid_argument("check_weight_hierarchy: need 0 <= p <= 2q");
  std::mt19937_64 rng(opt.seed + 4);
  const detail::SampleOptions so{2.0 * bh.M + 1e-3, 30.0 * bh.M, true};
  const double M = bh.M;

  auto field = [M, p_exp, q_exp](const auto& q) {
    using std::abs; using std::pow;
    const auto vt = mass_shell_vt(q, M);
    const auto vubar = (vt + q.v_rstar) / 2.0;
    return pow(q.r, p_exp) * pow(abs(vubar) / abs(vt), q_exp);
  };

  double worst = 0.0, fd_worst = 0.0;
  long used = 0;
  for (long n = 0; n < opt.samples; ++n) {
    const PhasePoint pt = detail::draw_sample(rng, so, bh);
    const auto f = mass_shell_energy(pt, bh);
    if (std::abs(f.vubar) < 1e-4 * std::abs(f.vt)) continue;  // degenerate for q < 1
    const double r = pt.r;
    const double aq = std::abs(f.vubar), at = std::abs(f.vt);
    const double L2_r2 = f.ell * f.ell / (r * r);
    const double t1 =
        p_exp * std::pow(r, p_exp - 1.0) * std::pow(aq, q_exp + 1.0) / std::pow(at, q_exp);
    const double t2 = 0.25 * (2.0 * q_exp - p_exp) * std::pow(r, p_exp - 1.0) *
                      std::pow(aq, q_exp - 1.0) / std::pow(at, q_exp) * L2_r2;
    const double t3 = (3.0 * q_exp - p_exp) * (M / 2.0) * std::pow(r, p_exp - 2.0) *
                      std::pow(aq, q_exp - 1.0) / std::pow(at, q_exp) * L2_r2;
    const double closed = t1 + t2 - t3;
    const double scale = std::max(std::abs(t1) + std::abs(t2) + std::abs(t3), 1e-10);
    const double lhs = -liouville_apply(field, pt, M);
    worst = std::max(worst, std::abs(lhs - closed) / scale);
    if (used < long(opt.fd_fraction * opt.samples)) {
      const double fd = -detail::fd_flow(field, pt, M);
      fd_worst = std::max(fd_worst, std::abs(fd - closed) / std::max(scale, 1e-4));
    }
    ++used;
  }
  rep.samples = used;
  rep.max_rel_err = worst;
  rep.fd_max_rel_err = fd_worst;
  rep.pass = worst <= rep.tolerance && fd_worst <= opt.tol_fd;
  return rep;
}

// --- lifted rotations annihilate the frame scalars ------------------------------------

inline IdentityReport check_lift_annihilation(const BlackHoleParams& bh,
                                              const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "lift_annihilation";
  rep.tolerance = 1e-10;
  std::mt19937_64 rng(opt.seed + 5);
  const detail::SampleOptions so{2.0 * bh.M + 1e-4, 25.0 * bh.M, true};
  double worst = 0.0;
  const FieldAbsVN vN_field{&bh};
  for (long n = 0; n < opt.samples; ++n) {
    const PhasePoint p = detail::draw_sample(rng, so, bh);
    const auto f = mass_shell_energy(p, bh);
    const double scale = std::max({1.0, std::abs(f.vt), f.ell});
    for (int i = 1; i <= 3; ++i) {
      worst = std::max(worst, std::abs(lifted_rotation(i, FieldVr{}, p)) / scale);
      worst = std::max(worst, std::abs(lifted_rotation(i, FieldEllSq{}, p)) / (scale * scale));
      worst = std::max(worst, std::abs(lifted_rotation(i, FieldVt{bh.M}, p)) / scale);
      worst = std::max(worst, std::abs(lifted_rotation(i, vN_field, p)) / scale);
    }
  }
  rep.samples = opt.samples;
  rep.max_rel_err = worst;
  rep.pass = worst <= rep.tolerance;
  return rep;
}

// --- angular-momentum convention of the radial force ----------------------------------

inline IdentityReport check_convention(const BlackHoleParams& bh, const VerifierOptions& opt = {}) {
  IdentityReport rep;
  rep.id = "angular_convention";
  rep.tolerance = 1e-12;
  std::mt19937_64 rng(opt.seed + 6);
  // the convention question concerns angular-dominated momenta; keep the
  // cancellation in (v_r*^2 - v_t^2)/Delta well inside double precision
  const detail::SampleOptions so{2.05 * bh.M, 20.0 * bh.M, true};
  const double M = bh.M;

  double worst = 0.0;
  double alt_min_gap = 1e300;
  for (long n = 0; n < opt.samples; ++n) {
    PhasePoint p = detail::draw_sample(rng, so, bh);
    const double ell0 = std::sqrt(angular_momentum_sq(p));
    const double vt0 = mass_shell_vt(p, M);
    if (ell0 < 0.3 * std::abs(vt0)) continue;
    // radial derivative of the symbol at fixed covector: seed (r*, r) jointly
    FieldSymbol sym{M, vt0};
    PhasePointT<Dual<double>> q;
    q.t = constant(p.t);
    q.r_star = {p.r_star, 1.0};
    q.r = {p.r, lapse(p.r, M)};
    q.theta = constant(p.theta);
    q.phi = constant(p.phi);
    q.v_rstar = constant(p.v_rstar);
    q.v_theta = constant(p.v_theta);
    q.v_phi = constant(p.v_phi);
    const double force = -0.5 * sym(q).d;
    const double st = std::sin(p.theta);
    const double L2 = p.v_theta * p.v_theta + p.v_phi * p.v_phi / (st * st);
    const double L2_alt = p.v_theta * p.v_theta + st * st * p.v_phi * p.v_phi;
    const double r = p.r;
    const double expected = (r - 3.0 * M) * L2 / (r * r * r * r);
    const double alt = (r - 3.0 * M) * L2_alt / (r * r * r * r);
    const double scale = std::max(L2 / (r * r * r), 1e-8);  // natural size of the force terms
    worst = std::max(worst, std::abs(force - expected) / scale);
    if (std::abs(p.v_phi) > 0.2 && std::abs(st * st - 1.0) > 0.1 && std::abs(r - 3.0 * M) > 0.1)
      alt_min_gap = std::min(alt_min_gap, std::abs(force - alt) / scale);
  }
  rep.samples = opt.samples;
  rep.max_rel_err = worst;
  rep.recorded_constant = alt_min_gap;  // finite separation from the competing convention
  rep.pass = worst <= rep.tolerance && alt_min_gap > 1e-3;
  return rep;
}

inline std::vector<IdentityReport> run_identity_suite(const BlackHoleParams& bh,
                                                      const VerifierOptions& opt = {}) {
  std::vector<IdentityReport> reports;
  reports.push_back(check_conserved_quantities(bh, opt));
  reports.push_back(check_commutation(bh, opt));
  reports.push_back(check_Ty(bh, opt));
  reports.push_back(check_redshift(bh, opt));
  reports.push_back(check_weight_hierarchy(2.0, 1.0, bh, opt));
  reports.push_back(check_weight_hierarchy(1.9, 0.95, bh, opt));
  reports.push_back(check_weight_hierarchy(0.0, 1.0, bh, opt));
  reports.push_back(check_lift_annihilation(bh, opt));
  reports.push_back(check_convention(bh, opt));
  return reports;
}

}  // namespace svl
