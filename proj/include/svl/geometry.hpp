#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "svl/dual.hpp"

namespace svl {

/** Exterior Schwarzschild background plus the fixed foliation constants.
 *
 *  Lengths are in units of the mass parameter M. The foliation splits at the
 *  area radius R0 > 3M into a spacelike inner part and outgoing null sheets;
 *  r0 < r1 < 3M bound the transition zone of the horizon-regular frame.
 */
struct BlackHoleParams {
  double M = 1.0;
  double R0 = 4.0;            // split radius of the foliation
  double r0 = 2.4;            // horizon-frame plateau ends here
  double r1 = 2.7;            // frame equals the static Killing field beyond
  double eps_horizon = 1e-6;  // integration stops at r = 2M + eps_horizon
  double t0 = 0.0;            // time of the anchor sphere {t0, R0} on the initial slice
  double u0 = 0.0;            // u0 = t0 - r*(R0)

  // cached derived values
  double R0_star = 0.0;
  double proxy_rstar = 0.0;

  static BlackHoleParams standard(double M = 1.0);
  void finalize();       // recompute cached values and u0 from t0
  void validate() const; // throws std::invalid_argument on any violated constraint
};

/// Lapse factor 1 - 2M/r, in (0,1) on the exterior.
template <class S>
S lapse(const S& r, double M) {
  return 1.0 - 2.0 * M / r;
}

/// Tortoise coordinate r* = r + 2M log(r-2M) - 3M - 2M log M; zero at r = 3M.
template <class S>
S tortoise_from_radius(const S& r, double M) {
  using std::log;
  return r + 2.0 * M * log(r - 2.0 * M) - 3.0 * M - 2.0 * M * log(M);
}

inline double tortoise_from_radius(double r, const BlackHoleParams& bh) {
  if (!(r > 2.0 * bh.M)) throw std::domain_error("tortoise_from_radius: r <= 2M");
  return tortoise_from_radius(r, bh.M);
}

/** Invert the tortoise map: unique r > 2M with r*(r) = x.
 *
 *  Safeguarded Newton inside a bisection bracket; relative tolerance 1e-13.
 *  `hint` (previous value on a trajectory) is used as the initial iterate
 *  when it lies inside the bracket.
 */
double radius_from_tortoise(double x, const BlackHoleParams& bh, double hint = -1.0);

/// Retarded / advanced null coordinates and the regular slice time.
struct ChartValues {
  double u;       // t - r*
  double ubar;    // t + r*
  double t_star;  // t + 2M log(r - 2M)
  double r;
  double Delta;   // 1 - 2M/r
};

inline double slice_time(double t, double r, double M) {
  return t + 2.0 * M * std::log(r - 2.0 * M);
}

/// x = (t, r*), with r passed separately to avoid re-inversion.
inline ChartValues chart_transforms(double t, double r_star, double r, const BlackHoleParams& bh) {
  return {t - r_star, t + r_star, slice_time(t, r, bh.M), r, lapse(r, bh.M)};
}

struct SpacetimePoint {
  double t = 0.0;
  double r_star = 0.0;
  double r = 0.0;  // consistent with r_star
  double theta = M_PI / 2;
  double phi = 0.0;

  static SpacetimePoint from_tortoise(double t, double r_star, double theta, double phi,
                                      const BlackHoleParams& bh) {
    return {t, r_star, radius_from_tortoise(r_star, bh), theta, phi};
  }
  static SpacetimePoint from_radius(double t, double r, double theta, double phi,
                                    const BlackHoleParams& bh) {
    return {t, tortoise_from_radius(r, bh), r, theta, phi};
  }
};

/// Foliation time of a point: slice time inside the split radius, retarded
/// time offset on the null sheets. Continuous across r = R0 and strictly
/// nondecreasing along future causal curves.
inline double foliation_tau(double t, double r_star, double r, const BlackHoleParams& bh) {
  if (r < bh.R0) return slice_time(t, r, bh.M);
  return (t - r_star) - bh.u0;
}

/** Hypersurface catalogue.
 *
 *  SigmaSlice(tau): the leaf at foliation time tau (spacelike part glued to
 *    an outgoing null sheet at r = R0).
 *  OutgoingNull(tau): the sheet u = tau + u0, meaningful on r* >= R0*.
 *  IncomingNull(wbar): ubar = wbar.
 *  Cylinder: r = R0.
 *  HorizonProxy: r = 2M + eps_horizon.
 *  InitialSlice: the slice t* = 0 carrying the initial data.
 */
struct Surface {
  enum class Kind {
    SigmaSlice,
    OutgoingNull,
    IncomingNull,
    TortoiseSphere,  // r* = parameter; the R0 cylinder and slab walls
    HorizonProxy,
    InitialSlice,
    TimeSlice,       // t = parameter
  };
  Kind kind = Kind::SigmaSlice;
  double parameter = 0.0;  // tau, wbar, r* or t depending on the kind

  static Surface sigma(double tau) { return {Kind::SigmaSlice, tau}; }
  static Surface outgoing_null(double tau) { return {Kind::OutgoingNull, tau}; }
  static Surface incoming_null(double wbar) { return {Kind::IncomingNull, wbar}; }
  static Surface tortoise_sphere(double r_star) { return {Kind::TortoiseSphere, r_star}; }
  static Surface cylinder(const BlackHoleParams& bh);  // r = R0
  static Surface horizon_proxy() { return {Kind::HorizonProxy, 0.0}; }
  static Surface initial_slice() { return {Kind::InitialSlice, 0.0}; }
  static Surface time_slice(double t) { return {Kind::TimeSlice, t}; }
};

/** Signed level function of a surface: zero on it, negative strictly on its
 *  past side (for the leaves and null sheets), continuous along causal curves.
 *  For the radial surfaces the sign just labels the two sides; the proxy is
 *  negative while the point is still outside it.
 */
inline double crossing_value(const Surface& srf, double t, double r_star, double r,
                             const BlackHoleParams& bh) {
  switch (srf.kind) {
    case Surface::Kind::SigmaSlice:
      if (r < bh.R0) return slice_time(t, r, bh.M) - srf.parameter;
      return (t - r_star) - srf.parameter - bh.u0;
    case Surface::Kind::OutgoingNull:
      return (t - r_star) - srf.parameter - bh.u0;
    case Surface::Kind::IncomingNull:
      return (t + r_star) - srf.parameter;
    case Surface::Kind::TortoiseSphere:
      return r_star - srf.parameter;
    case Surface::Kind::HorizonProxy:
      return bh.proxy_rstar - r_star;
    case Surface::Kind::InitialSlice:
      return slice_time(t, r, bh.M);
    case Surface::Kind::TimeSlice:
      return t - srf.parameter;
  }
  return 0.0;
}

inline Surface Surface::cylinder(const BlackHoleParams& bh) {
  return tortoise_sphere(bh.R0_star);
}

/** Normal decomposition and area densities of the foliation at radius r.
 *
 *  Vectors are stored through their coefficients on (d/dubar, d/du); the
 *  contraction with a covector v is n_ubar_coeff * v_ubar + n_u_coeff * v_u.
 *  `area_density` is taken against dr ^ dS2 on the spacelike part, against
 *  dubar ^ dS2 (resp. -du ^ dS2) on the null sheets.
 */
struct FoliationGeometry {
  double gamma;         // sqrt(1 + 2M/r) on the spacelike part
  double gamma0;        // dmu_R = gamma0 * dtau ^ dmu_Sigma
  double n_ubar_coeff;
  double n_u_coeff;
  double area_density;
  double Ubar;          // advanced-time parameterization of the spacelike leaf
};

inline FoliationGeometry foliation_geometry(const Surface& srf, double r,
                                            const BlackHoleParams& bh) {
  const double M = bh.M;
  const double Delta = lapse(r, M);
  if (srf.kind == Surface::Kind::IncomingNull)
    return {1.0, Delta / 2.0, 0.0, 1.0, r * r, 0.0};
  const bool spacelike =
      (srf.kind == Surface::Kind::InitialSlice) ||
      ((srf.kind == Surface::Kind::SigmaSlice) && r < bh.R0);
  if (spacelike) {
    const double gamma = std::sqrt(1.0 + 2.0 * M / r);
    const double Ubar = r - 3.0 * M - 2.0 * M * std::log(M);
    return {gamma, 1.0 / gamma, 1.0 / gamma, gamma / Delta, gamma * r * r, Ubar};
  }
  // outgoing null sheet
  return {1.0, Delta / 2.0, 1.0, 0.0, r * r, 0.0};
}

/// |v . n| against the foliation leaf through radius r (covector components).
inline double abs_v_dot_sigma_normal(double r, double v_u, double v_ubar,
                                     const BlackHoleParams& bh) {
  const FoliationGeometry fg = foliation_geometry(Surface::sigma(0.0), r, bh);
  return std::abs(fg.n_ubar_coeff * v_ubar + fg.n_u_coeff * v_u);
}

/// gamma0 of the foliation at radius r (bounded above and below).
inline double foliation_gamma0(double r, const BlackHoleParams& bh) {
  if (r < bh.R0) return 1.0 / std::sqrt(1.0 + 2.0 * bh.M / r);
  return lapse(r, bh.M) / 2.0;
}

// ---------------------------------------------------------------------------

inline BlackHoleParams BlackHoleParams::standard(double M) {
  BlackHoleParams bh;
  bh.M = M;
  bh.R0 = 4.0 * M;
  bh.r0 = 2.4 * M;
  bh.r1 = 2.7 * M;
  bh.eps_horizon = 1e-6 * M;
  bh.t0 = -2.0 * M * std::log(bh.R0 - 2.0 * M);  // anchor sphere lies on t* = 0
  bh.finalize();
  return bh;
}

inline void BlackHoleParams::finalize() {
  R0_star = tortoise_from_radius(R0, M);
  proxy_rstar = tortoise_from_radius(2.0 * M + eps_horizon, M);
  u0 = t0 - R0_star;
}

/// Both horizon-frame inequalities hold on (2M, r]; both sides are strictly
/// decreasing in r, so checking the right endpoint suffices.
inline bool redshift_radius_admissible(double r, double M) {
  const double Delta = 1.0 - 2.0 * M / r;
  const double c1 = 1.0 - r / (4.0 * M) - 4.0 * Delta * Delta;
  const double c2 = 1.0 - r / (4.0 * M);
  return c1 >= 0.25 && c2 >= 0.25;
}

inline void BlackHoleParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("BlackHoleParams: " + what); };
  if (!(M > 0.0)) fail("M must be positive");
  if (!(2.0 * M < r0 && r0 < r1 && r1 < 3.0 * M)) fail("need 2M < r0 < r1 < 3M");
  if (!(R0 > 3.0 * M)) fail("need R0 > 3M");
  if (!(eps_horizon > 0.0 && eps_horizon < 0.1 * M)) fail("eps_horizon out of range");
  if (!redshift_radius_admissible(r0, M))
    fail("r0 violates the horizon-frame admissibility inequalities (boundary near 2.45M)");
  if (std::abs(u0 - (t0 - R0_star)) > 1e-12 * std::max(1.0, std::abs(t0)))
    fail("u0 inconsistent with t0 - r*(R0); call finalize()");
}

inline double radius_from_tortoise(double x, const BlackHoleParams& bh, double hint) {
  const double M = bh.M;
  // bracket [lo, hi] with r*(lo) < x < r*(hi)
  double lo = 2.0 * M + std::min(M, std::exp((x - M) / (2.0 * M)) * M);
  while (tortoise_from_radius(lo, M) > x) lo = 2.0 * M + (lo - 2.0 * M) * 0.25;
  double hi = std::max(4.0 * M, x + 4.0 * M);
  while (tortoise_from_radius(hi, M) < x) hi *= 2.0;

  double r = (hint > lo && hint < hi) ? hint : std::max(lo, std::min(hi, x > 0.0 ? x : 2.0 * M + (lo - 2.0 * M)));
  if (!(r > lo && r < hi)) r = 0.5 * (lo + hi);
  const double tol = 1e-13;
  for (int it = 0; it < 200; ++it) {
    const double f = tortoise_from_radius(r, M) - x;
    if (f > 0.0) hi = r; else lo = r;
    const double drstar_dr = 1.0 / lapse(r, M);  // dr*/dr = 1/Delta
    double step = f / drstar_dr;
    double rn = r - step;
    if (!(rn > lo && rn < hi)) rn = 0.5 * (lo + hi);  // bisect when Newton leaves the bracket
    if (std::abs(rn - r) <= tol * rn) {
      r = rn;
      return r;
    }
    r = rn;
  }
  throw std::runtime_error("radius_from_tortoise: no convergence (monotone inversion should not fail)");
}

}  // namespace svl
