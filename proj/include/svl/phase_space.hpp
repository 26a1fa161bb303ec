#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "svl/geometry.hpp"

namespace svl {

/** A point of the light-cone bundle in the chart (t, r*, theta, phi) with the
 *  spatial covector components (v_rstar, v_theta, v_phi). The area radius r is
 *  carried alongside r* so that scalar-templated code never needs to invert
 *  the tortoise map.
 */
template <class S>
struct PhasePointT {
  S t{}, r_star{}, r{};
  S theta{}, phi{};
  S v_rstar{}, v_theta{}, v_phi{};
};

using PhasePoint = PhasePointT<double>;

inline PhasePoint make_phase_point(const SpacetimePoint& x, double v_rstar, double v_theta,
                                   double v_phi) {
  return {x.t, x.r_star, x.r, x.theta, x.phi, v_rstar, v_theta, v_phi};
}

/// Squared total angular momentum of the covector: v_theta^2 + v_phi^2 / sin^2(theta).
template <class S>
S angular_momentum_sq(const PhasePointT<S>& p) {
  using std::sin;
  const S st = sin(p.theta);
  return p.v_theta * p.v_theta + p.v_phi * p.v_phi / (st * st);
}

/// Null-shell energy component: v_t = -sqrt(v_rstar^2 + Delta * L^2 / r^2) < 0.
template <class S>
S mass_shell_vt(const PhasePointT<S>& p, double M) {
  using std::sqrt;
  const S Delta = lapse(p.r, M);
  return -sqrt(p.v_rstar * p.v_rstar + Delta * angular_momentum_sq(p) / (p.r * p.r));
}

/** Smooth transition profile of the horizon-regular frame: identically 1 up to
 *  r0, identically 0 from r1 on, symmetric around the midpoint.
 */
template <class S>
S chi(const S& r, const BlackHoleParams& bh) {
  const double lo = bh.r0, hi = bh.r1;
  if (value_of(r) <= lo) return S(1.0);
  if (value_of(r) >= hi) return S(0.0);
  using std::exp;
  const S x = (hi - r) / (hi - lo);          // in (0,1)
  const S ex = exp(-1.0 / x);
  const S ex1 = exp(-1.0 / (1.0 - x));
  return ex / (ex + ex1);
}

/** Derived momentum components at a phase point: Killing energy v_t, the null
 *  pair (v_u, v_ubar), total angular momentum ell, and the horizon-frame
 *  energy v_N (equal to v_t wherever chi vanishes).
 */
template <class S>
struct MomentumFrameT {
  S vt, vu, vubar, ell, vN, bracket_vt;
};

using MomentumFrame = MomentumFrameT<double>;

template <class S>
MomentumFrameT<S> mass_shell_energy(const PhasePointT<S>& p, const BlackHoleParams& bh) {
  using std::sqrt;
  if (value_of(p.v_rstar) == 0.0 && value_of(p.v_theta) == 0.0 && value_of(p.v_phi) == 0.0)
    throw std::invalid_argument("mass_shell_energy: zero covector is not on the light cone");
  const S Delta = lapse(p.r, bh.M);
  const S L2 = angular_momentum_sq(p);
  const S vt = -sqrt(p.v_rstar * p.v_rstar + Delta * L2 / (p.r * p.r));
  const S vu = (vt - p.v_rstar) / 2.0;
  const S vubar = (vt + p.v_rstar) / 2.0;
  const S c = chi(p.r, bh);
  const S vN = 2.0 * c * vu / Delta + 8.0 * c * Delta * vt + vt;
  return {vt, vu, vubar, sqrt(L2), vN, sqrt(1.0 + vt * vt)};
}

/// Radially weighted ratio weight r^p (|v_ubar|/|v_t|)^q; the ratio lies in [0,1].
template <class S>
S weight_W(const MomentumFrameT<S>& f, const S& r, double p, double q) {
  using std::abs; using std::pow;
  S w = pow(r, p);
  if (q != 0.0) w *= pow(abs(f.vubar) / abs(f.vt), q);
  return w;
}

/// Fiber measure density against dv_rstar dv_theta dv_phi: 1 / (r^2 |sin theta| |v_t|).
template <class S>
S fiber_measure_density(const PhasePointT<S>& p, const MomentumFrameT<S>& f) {
  using std::abs; using std::sin;
  const S st = abs(sin(p.theta));
  if (value_of(st) < 1e-14) throw std::domain_error("fiber_measure_density: polar chart degeneracy");
  return 1.0 / (p.r * p.r * st * abs(f.vt));
}

// --- weight exponents ------------------------------------------------------

struct WeightSpec {
  double p = 0.0;  // radial power
  double q = 0.0;  // |v_ubar|/|v_t| power
  double a = 0.0;  // |v_N| power
  double s = 1.02; // integrability exponent, > 1
  double d = 0.0;  // retarded-time power for the far region
};

/// zeta_k(s) = sum_{n=1..k} s^{-n}.
inline double zeta(int k, double s) {
  double z = 0.0, f = 1.0;
  for (int n = 1; n <= k; ++n) { f /= s; z += f; }
  return z;
}

struct ExponentReport {
  bool ok = false;       // admissible for the tau^{-p} flux-decay experiment
  double q_p = 0.0;      // hierarchy companion exponent
  int ceil_p = 0;
  double zeta_ceil = 0.0;
  bool p_not_integer = false;
  bool ceil_even = false;
};

inline ExponentReport admissible_exponents(double p, double s) {
  if (p < 0.0 || s <= 1.0) throw std::invalid_argument("admissible_exponents: need p >= 0, s > 1");
  ExponentReport rep;
  rep.ceil_p = static_cast<int>(std::ceil(p));
  rep.p_not_integer = (std::floor(p) != p);
  rep.ceil_even = (rep.ceil_p % 2 == 0);
  rep.q_p = rep.ceil_even ? p / 2.0 : (p + 1.0) / 2.0;
  rep.zeta_ceil = zeta(rep.ceil_p, s);
  rep.ok = rep.p_not_integer && rep.ceil_even && rep.zeta_ceil >= p;
  return rep;
}

// --- generator of the null geodesic flow ------------------------------------

/// Coordinate-and-momentum velocity of the Liouville flow at a phase point.
template <class S>
struct PhaseVelocityT {
  S dt, dr_star, dr, dtheta, dphi, dv_rstar, dv_theta, dv_phi;
};

template <class S>
PhaseVelocityT<S> liouville_rhs(const PhasePointT<S>& p, double M) {
  using std::cos; using std::sin;
  const S Delta = lapse(p.r, M);
  const S st = sin(p.theta);
  const S st2 = st * st;
  const S r2 = p.r * p.r;
  const S L2 = p.v_theta * p.v_theta + p.v_phi * p.v_phi / st2;
  const S vt = mass_shell_vt(p, M);
  PhaseVelocityT<S> dot;
  dot.dt = -vt / Delta;
  dot.dr_star = p.v_rstar / Delta;
  dot.dr = p.v_rstar;  // chain rule through dr*/dr = 1/Delta
  dot.dtheta = p.v_theta / r2;
  dot.dphi = p.v_phi / (r2 * st2);
  dot.dv_rstar = (p.r - 3.0 * M) * L2 / (r2 * r2);
  dot.dv_theta = cos(p.theta) / st * p.v_phi * p.v_phi / (r2 * st2);
  dot.dv_phi = S(0.0);
  return dot;
}

// --- directional derivatives on the bundle ----------------------------------

/// Promote a phase point to dual scalars seeded along the Liouville flow.
template <class S>
PhasePointT<Dual<S>> flow_seed(const PhasePointT<S>& p, double M) {
  const PhaseVelocityT<S> dot = liouville_rhs(p, M);
  PhasePointT<Dual<S>> q;
  q.t = {p.t, dot.dt};
  q.r_star = {p.r_star, dot.dr_star};
  q.r = {p.r, dot.dr};
  q.theta = {p.theta, dot.dtheta};
  q.phi = {p.phi, dot.dphi};
  q.v_rstar = {p.v_rstar, dot.dv_rstar};
  q.v_theta = {p.v_theta, dot.dv_theta};
  q.v_phi = {p.v_phi, dot.dv_phi};
  return q;
}

/// Promote a phase point to dual scalars seeded along a lifted rotation field.
template <class S>
PhasePointT<Dual<S>> rotation_seed(int i, const PhasePointT<S>& p) {
  using std::cos; using std::sin;
  if (std::abs(std::sin(value_of(p.theta))) < 1e-12)
    throw std::domain_error("rotation_seed: polar chart degeneracy, rotate first");
  const S st = sin(p.theta), ct = cos(p.theta);
  const S cphi = cos(p.phi), sphi = sin(p.phi);
  const S cot = ct / st;
  PhasePointT<Dual<S>> q;
  q.t = constant(p.t);
  q.r_star = constant(p.r_star);
  q.r = constant(p.r);
  q.theta = constant(p.theta);
  q.phi = constant(p.phi);
  q.v_rstar = constant(p.v_rstar);
  q.v_theta = constant(p.v_theta);
  q.v_phi = constant(p.v_phi);
  switch (i) {
    case 1:
      q.theta.d = -sphi;
      q.phi.d = -cot * cphi;
      q.v_theta.d = -cphi * p.v_phi / (st * st);
      q.v_phi.d = cphi * p.v_theta - sphi * cot * p.v_phi;
      break;
    case 2:
      q.theta.d = cphi;
      q.phi.d = -cot * sphi;
      q.v_theta.d = -sphi * p.v_phi / (st * st);
      q.v_phi.d = sphi * p.v_theta + cphi * cot * p.v_phi;
      break;
    case 3:
      q.phi.d = S(1.0);
      break;
    default:
      throw std::invalid_argument("rotation_seed: generator index must be 1, 2 or 3");
  }
  return q;
}

/// Apply the Liouville field to a scalar function of a phase point.
template <class F>
double liouville_apply(const F& func, const PhasePoint& p, double M) {
  return deriv_of(func(flow_seed(p, M)));
}

/// Apply a lifted rotation generator to a scalar function of a phase point.
template <class F>
double lifted_rotation(int i, const F& func, const PhasePoint& p) {
  return deriv_of(func(rotation_seed(i, p)));
}

/// Derivative along a vector field together with the magnitude of its largest
/// single term; identity tolerances are taken relative to that scale. The
/// (r*, r) pair counts as one chart direction.
struct DirectionalValue {
  double value = 0.0;
  double scale = 0.0;
};

template <class F>
DirectionalValue directional_with_scale(const F& func, const PhasePoint& p,
                                        const PhaseVelocityT<double>& dir) {
  DirectionalValue out;
  auto contribution = [&](auto fill) {
    PhasePointT<Dual<double>> q{constant(p.t),     constant(p.r_star), constant(p.r),
                                constant(p.theta), constant(p.phi),    constant(p.v_rstar),
                                constant(p.v_theta), constant(p.v_phi)};
    fill(q);
    const double term = func(q).d;
    out.value += term;
    out.scale += std::abs(term);
  };
  if (dir.dt != 0.0) contribution([&](auto& q) { q.t.d = dir.dt; });
  if (dir.dr_star != 0.0 || dir.dr != 0.0)
    contribution([&](auto& q) { q.r_star.d = dir.dr_star; q.r.d = dir.dr; });
  if (dir.dtheta != 0.0) contribution([&](auto& q) { q.theta.d = dir.dtheta; });
  if (dir.dphi != 0.0) contribution([&](auto& q) { q.phi.d = dir.dphi; });
  if (dir.dv_rstar != 0.0) contribution([&](auto& q) { q.v_rstar.d = dir.dv_rstar; });
  if (dir.dv_theta != 0.0) contribution([&](auto& q) { q.v_theta.d = dir.dv_theta; });
  if (dir.dv_phi != 0.0) contribution([&](auto& q) { q.v_phi.d = dir.dv_phi; });
  return out;
}

template <class F>
DirectionalValue liouville_apply_with_scale(const F& func, const PhasePoint& p, double M) {
  return directional_with_scale(func, p, liouville_rhs(p, M));
}

template <class F>
DirectionalValue lifted_rotation_with_scale(int i, const F& func, const PhasePoint& p) {
  const PhasePointT<Dual<double>> seeded = rotation_seed(i, p);
  PhaseVelocityT<double> dir{};
  dir.dtheta = seeded.theta.d;
  dir.dphi = seeded.phi.d;
  dir.dv_theta = seeded.v_theta.d;
  dir.dv_phi = seeded.v_phi.d;
  return directional_with_scale(func, p, dir);
}

// --- conserved angular momentum vector ---------------------------------------

/// Euclidean angular-momentum vector (v applied to the three rotation
/// generators); conserved along the flow, with |vec| = ell.
template <class S>
Eigen::Vector3d angular_momentum_vector(const PhasePointT<S>& p) {
  const double st = std::sin(value_of(p.theta)), ct = std::cos(value_of(p.theta));
  const double cphi = std::cos(value_of(p.phi)), sphi = std::sin(value_of(p.phi));
  const double vth = value_of(p.v_theta), vph = value_of(p.v_phi);
  const double cot = ct / st;
  return {-sphi * vth - cot * cphi * vph, cphi * vth - cot * sphi * vph, vph};
}

/// Unit position direction on the sphere.
inline Eigen::Vector3d sphere_direction(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

/// Recover (theta, phi, v_theta, v_phi) at a sphere direction from the
/// conserved angular-momentum vector.
inline void angular_from_vector(const Eigen::Vector3d& n, const Eigen::Vector3d& ell,
                                double& theta, double& phi, double& v_theta, double& v_phi) {
  theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
  phi = std::atan2(n.y(), n.x());
  if (phi < 0.0) phi += 2.0 * M_PI;
  v_phi = ell.z();
  v_theta = ell.y() * std::cos(phi) - ell.x() * std::sin(phi);
}

}  // namespace svl
