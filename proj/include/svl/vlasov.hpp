#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svl/geodesic_flow.hpp"
#include "svl/geometry.hpp"
#include "svl/phase_space.hpp"

namespace svl {

/// Smooth compactly supported bump: exp(1 - 1/(1-s^2)) on |s| < 1, zero outside;
/// equals 1 at s = 0 and vanishes with all derivatives at |s| = 1.
template <class S>
S bump(const S& s) {
  const double sv = value_of(s);
  if (sv <= -1.0 || sv >= 1.0) return S(0.0);
  using std::exp;
  return exp(1.0 - 1.0 / (1.0 - s * s));
}

/// Coordinate box bounding the support of initial data on its carrier slice.
struct SupportBox {
  double rstar_lo = 0, rstar_hi = 0;
  double theta_lo = 0, theta_hi = M_PI;
  double phi_lo = 0, phi_hi = 2.0 * M_PI;
  double vr_lo = 0, vr_hi = 0;
  double vth_lo = 0, vth_hi = 0;
  double vph_lo = 0, vph_hi = 0;
};

/// Conserved-quantity windows derived from a support box; used to prune
/// backward-characteristic evaluations before integrating anything.
struct ConservedWindow {
  double abs_vt_lo = 0, abs_vt_hi = 0;
  double ell_hi = 0;
  double vph_lo = 0, vph_hi = 0;
  double u_lo = 0, u_hi = 0;
  double ubar_lo = 0, ubar_hi = 0;
};

/** Analytic initial data. Carried either on the initial slice {t* = 0} or on
 *  a constant-t slice (the concentrated family is anchored at t = t_anchor).
 */
class DistributionSpec {
 public:
  enum class Carrier { InitialSlice, TimeSlice };
  enum class Variant { SeparableBump, TrappingFamily, Custom };

  Variant variant = Variant::SeparableBump;
  Carrier carrier = Carrier::InitialSlice;
  double amplitude = 1.0;
  double t_anchor = 0.0;          // only for Carrier::TimeSlice
  bool axisymmetric = false;      // profile independent of phi
  bool rotation_invariant = false;  // depends on (r*, v_rstar, ell) only
  SupportBox box;

  // SeparableBump parameters
  double rstar_center = 0.0, rstar_width = 2.0;
  double theta_width = 1.0;  // band around the equator
  double vr_center = 1.0, vr_width = 0.45;
  double vth_center = 0.0, vth_width = 0.35;
  double vph_center = 0.0, vph_width = 0.35;

  // TrappingFamily parameter
  double epsilon = 0.1;

  // Custom profile
  std::function<double(const PhasePoint&)> profile;

  static DistributionSpec separable_bump(double amplitude, double rstar_center,
                                         double rstar_width, double vr_center, double vr_width,
                                         double vth_center, double vth_width, double vph_center,
                                         double vph_width, double theta_width = 1.0) {
    DistributionSpec d;
    d.variant = Variant::SeparableBump;
    d.carrier = Carrier::InitialSlice;
    d.amplitude = amplitude;
    d.axisymmetric = true;
    d.rstar_center = rstar_center;
    d.rstar_width = rstar_width;
    d.theta_width = theta_width;
    d.vr_center = vr_center;
    d.vr_width = vr_width;
    d.vth_center = vth_center;
    d.vth_width = vth_width;
    d.vph_center = vph_center;
    d.vph_width = vph_width;
    d.box = {rstar_center - rstar_width, rstar_center + rstar_width,
             M_PI / 2 - theta_width,     M_PI / 2 + theta_width,
             0.0,                        2.0 * M_PI,
             vr_center - vr_width,       vr_center + vr_width,
             vth_center - vth_width,     vth_center + vth_width,
             vph_center - vph_width,     vph_center + vph_width};
    d.check_support();
    return d;
  }

  /// Bump data concentrated on the orbiting null configuration at the photon
  /// sphere; all six factors share the same concentration scale epsilon.
  static DistributionSpec trapping_family(double epsilon, const BlackHoleParams& bh,
                                          double amplitude = 1.0, double t_anchor_override = 0.0) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("trapping_family: epsilon must be positive");
    DistributionSpec d;
    d.variant = Variant::TrappingFamily;
    d.carrier = Carrier::TimeSlice;
    d.amplitude = amplitude;
    d.epsilon = epsilon;
    d.t_anchor = (t_anchor_override != 0.0) ? t_anchor_override : default_anchor_time(bh);
    const double e = epsilon, vc = std::sqrt(3.0) * bh.M;
    d.box = {-e, e, M_PI / 2 - e, M_PI / 2 + e, -e, e, -e, e, -e, e, vc - e, vc + e};
    d.check_support();
    return d;
  }

  static DistributionSpec custom(std::function<double(const PhasePoint&)> profile,
                                 const SupportBox& box, double amplitude = 1.0,
                                 bool rotation_invariant = false,
                                 Carrier carrier = Carrier::InitialSlice, double t_anchor = 0.0) {
    DistributionSpec d;
    d.variant = Variant::Custom;
    d.carrier = carrier;
    d.amplitude = amplitude;
    d.t_anchor = t_anchor;
    d.profile = std::move(profile);
    d.box = box;
    d.rotation_invariant = rotation_invariant;
    d.axisymmetric = rotation_invariant;
    d.check_support();
    return d;
  }

  /// Time shift that puts the anchor slice to the future of the whole inner
  /// part of the zero leaf: 1 + |u0| + max |Ubar| over [2M, R0].
  static double default_anchor_time(const BlackHoleParams& bh) {
    const double a = std::abs(2.0 * bh.M - 3.0 * bh.M - 2.0 * bh.M * std::log(bh.M));
    const double b = std::abs(bh.R0 - 3.0 * bh.M - 2.0 * bh.M * std::log(bh.M));
    return 1.0 + std::abs(bh.u0) + std::max(a, b);
  }

  /// Profile value at a carrier point (coordinates in the data's own frame).
  double value(const PhasePoint& p) const {
    switch (variant) {
      case Variant::SeparableBump: {
        double f = amplitude;
        f *= bump((p.r_star - rstar_center) / rstar_width);
        if (f == 0.0) return 0.0;
        f *= bump((p.theta - M_PI / 2) / theta_width);
        if (f == 0.0) return 0.0;
        f *= bump((p.v_rstar - vr_center) / vr_width);
        if (f == 0.0) return 0.0;
        f *= bump((p.v_theta - vth_center) / vth_width);
        if (f == 0.0) return 0.0;
        f *= bump((p.v_phi - vph_center) / vph_width);
        return f;
      }
      case Variant::TrappingFamily: {
        const double e = epsilon, vc = std::sqrt(3.0);
        double ph = std::fmod(p.phi, 2.0 * M_PI);
        if (ph > M_PI) ph -= 2.0 * M_PI;
        if (ph < -M_PI) ph += 2.0 * M_PI;
        double f = amplitude;
        f *= bump(p.r_star / e);
        if (f == 0.0) return 0.0;
        f *= bump((p.theta - M_PI / 2) / e);
        if (f == 0.0) return 0.0;
        f *= bump(ph / e);
        if (f == 0.0) return 0.0;
        f *= bump(p.v_rstar / e);
        if (f == 0.0) return 0.0;
        f *= bump(p.v_theta / e);
        if (f == 0.0) return 0.0;
        f *= bump((p.v_phi - vc) / e);
        return f;
      }
      case Variant::Custom:
        return amplitude * profile(p);
    }
    return 0.0;
  }

  /// Carrier time coordinate at tortoise radius r* (and radius r).
  double carrier_time(double r, const BlackHoleParams& bh) const {
    if (carrier == Carrier::InitialSlice) return -2.0 * bh.M * std::log(r - 2.0 * bh.M);
    return t_anchor;
  }

  Surface carrier_surface() const {
    return (carrier == Carrier::InitialSlice) ? Surface::initial_slice()
                                              : Surface::time_slice(t_anchor);
  }

  /// Number-flux density against dr* dtheta dphi dv^3 at a carrier node; the
  /// sphere and fiber factors cancel against the induced area element.
  double flux_density(const PhasePoint& p, const MomentumFrame& f,
                      const BlackHoleParams& bh) const {
    const double fval = value(p);
    if (fval == 0.0) return 0.0;
    if (carrier == Carrier::TimeSlice) return fval;
    return fval * (1.0 + (2.0 * bh.M / p.r) * p.v_rstar / std::abs(f.vt));
  }

  ConservedWindow window(const BlackHoleParams& bh) const {
    ConservedWindow w;
    // |v_t| bounds from monotonicity in |v_r*|, L^2 and the radial profile of Delta/r^2
    const double a2max = std::max(box.vr_lo * box.vr_lo, box.vr_hi * box.vr_hi);
    const double a2min = (box.vr_lo <= 0.0 && box.vr_hi >= 0.0)
                             ? 0.0
                             : std::min(box.vr_lo * box.vr_lo, box.vr_hi * box.vr_hi);
    const double sth_min = std::min(std::sin(box.theta_lo), std::sin(box.theta_hi));
    const double sth_max =
        (box.theta_lo <= M_PI / 2 && box.theta_hi >= M_PI / 2)
            ? 1.0
            : std::max(std::sin(box.theta_lo), std::sin(box.theta_hi));
    const double vth2max = std::max(box.vth_lo * box.vth_lo, box.vth_hi * box.vth_hi);
    const double vth2min = (box.vth_lo <= 0.0 && box.vth_hi >= 0.0)
                               ? 0.0
                               : std::min(box.vth_lo * box.vth_lo, box.vth_hi * box.vth_hi);
    const double vph2max = std::max(box.vph_lo * box.vph_lo, box.vph_hi * box.vph_hi);
    const double vph2min = (box.vph_lo <= 0.0 && box.vph_hi >= 0.0)
                               ? 0.0
                               : std::min(box.vph_lo * box.vph_lo, box.vph_hi * box.vph_hi);
    const double L2max = vth2max + vph2max / (sth_min * sth_min);
    const double L2min = vth2min + vph2min / (sth_max * sth_max);
    double pot_min = 1e300, pot_max = 0.0;  // Delta / r^2 over the radial range
    for (int i = 0; i <= 64; ++i) {
      const double rs = box.rstar_lo + (box.rstar_hi - box.rstar_lo) * i / 64.0;
      const double r = radius_from_tortoise(rs, bh);
      const double pot = lapse(r, bh.M) / (r * r);
      pot_min = std::min(pot_min, pot);
      pot_max = std::max(pot_max, pot);
    }
    // Delta/r^2 peaks at r = 3M; include it if the box straddles the photon sphere
    if (box.rstar_lo <= 0.0 && box.rstar_hi >= 0.0)
      pot_max = std::max(pot_max, lapse(3.0 * bh.M, bh.M) / (9.0 * bh.M * bh.M));
    w.abs_vt_hi = std::sqrt(a2max + pot_max * L2max) * (1.0 + 1e-9) + 1e-300;
    w.abs_vt_lo = std::sqrt(std::max(0.0, a2min + pot_min * L2min)) * (1.0 - 1e-9);
    w.ell_hi = std::sqrt(L2max) * (1.0 + 1e-9);
    w.vph_lo = box.vph_lo - 1e-12;
    w.vph_hi = box.vph_hi + 1e-12;
    // u and ubar windows on the carrier (monotone in r*, endpoints suffice)
    auto uv = [&](double rs) {
      const double r = radius_from_tortoise(rs, bh);
      const double t = carrier_time(r, bh);
      return std::pair<double, double>{t - rs, t + rs};
    };
    const auto [ua, ba] = uv(box.rstar_lo);
    const auto [ub, bb] = uv(box.rstar_hi);
    w.u_lo = std::min(ua, ub) - 1e-9;
    w.u_hi = std::max(ua, ub) + 1e-9;
    w.ubar_lo = std::min(ba, bb) - 1e-9;
    w.ubar_hi = std::max(ba, bb) + 1e-9;
    return w;
  }

 private:
  void check_support() const {
    if (!(box.rstar_lo < box.rstar_hi)) throw std::invalid_argument("DistributionSpec: empty r* support");
    if (!(amplitude >= 0.0)) throw std::invalid_argument("DistributionSpec: negative amplitude");
    const bool v_box_has_zero = box.vr_lo <= 0.0 && box.vr_hi >= 0.0 && box.vth_lo <= 0.0 &&
                                box.vth_hi >= 0.0 && box.vph_lo <= 0.0 && box.vph_hi >= 0.0;
    if (v_box_has_zero)
      throw std::invalid_argument("DistributionSpec: momentum support must avoid the zero covector");
  }
};

// --- particle ensembles -------------------------------------------------------

struct Particle {
  PhasePoint point;   // on the carrier slice, original frame
  double weight = 0;  // number-flux weight
  double f_value = 0; // profile value at the node
};

struct ParticleEnsemble {
  std::vector<Particle> particles;
  double total_number_flux = 0.0;
  std::uint64_t seed = 0;
  bool jittered = false;
  std::array<int, 6> dims{};  // (r*, theta, phi, vr, vth, vph); phi dim 1 when axisymmetric
  double axis_weight = 1.0;   // 2*pi for collapsed phi axis
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double unit_double(std::uint64_t h) { return double(h >> 11) * 0x1.0p-53; }

/// Cumulative mass table of the canonical bump on [-1, 1]; stratifying each
/// bump axis in its own mass coordinate keeps cells equally informative, which
/// the flat-top profile needs for fast midpoint convergence.
struct BumpMass {
  static constexpr int N = 4096;
  std::array<double, N + 1> cdf{};
  double total = 0.0;

  BumpMass() {
    std::array<double, N + 1> val{};
    for (int i = 0; i <= N; ++i) {
      const double s = -1.0 + 2.0 * i / N;
      val[i] = bump(s);
    }
    cdf[0] = 0.0;
    for (int i = 1; i <= N; ++i) cdf[i] = cdf[i - 1] + 0.5 * (val[i - 1] + val[i]) * (2.0 / N);
    total = cdf[N];
    for (int i = 0; i <= N; ++i) cdf[i] /= total;
  }

  /// inverse of the normalized mass: u in (0,1) -> s in (-1,1)
  double inverse(double u) const {
    int lo = 0, hi = N;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (cdf[mid] <= u) lo = mid; else hi = mid;
    }
    const double du = cdf[hi] - cdf[lo];
    const double frac = (du > 0.0) ? (u - cdf[lo]) / du : 0.5;
    return -1.0 + 2.0 * (lo + frac) / N;
  }

  static const BumpMass& instance() {
    static const BumpMass table;
    return table;
  }
};

/// One sampling axis: either uniform in the coordinate or midpoint in the
/// canonical bump's mass coordinate.
struct AxisSampler {
  bool mass_mapped = false;
  double lo = 0.0, hi = 0.0;       // coordinate range (uniform mode)
  double center = 0.0, width = 1.0;  // bump parameters (mass mode)

  // node position and the quadrature factor (cell measure / reference density)
  std::pair<double, double> node(int k, int n, double frac) const {
    if (!mass_mapped) {
      const double w = (hi - lo) / n;
      return {lo + (k + frac) * w, w};
    }
    const BumpMass& tab = BumpMass::instance();
    const double u = (k + frac) / n;
    const double s = tab.inverse(u);
    const double x = center + width * s;
    const double rho = bump(s) / (width * tab.total);  // normalized reference density
    return {x, 1.0 / (n * rho)};
  }
};

}  // namespace detail

/// Per-axis samplers for a spec: the known bump factors are stratified in
/// their own mass coordinate, everything else uniformly over the box.
inline std::array<detail::AxisSampler, 6> ensemble_axes(const DistributionSpec& spec) {
  const SupportBox& b = spec.box;
  std::array<detail::AxisSampler, 6> ax;
  ax[0] = {false, b.rstar_lo, b.rstar_hi, 0, 1};
  ax[1] = {false, b.theta_lo, b.theta_hi, 0, 1};
  ax[2] = {false, b.phi_lo, b.phi_hi, 0, 1};
  ax[3] = {false, b.vr_lo, b.vr_hi, 0, 1};
  ax[4] = {false, b.vth_lo, b.vth_hi, 0, 1};
  ax[5] = {false, b.vph_lo, b.vph_hi, 0, 1};
  if (spec.variant == DistributionSpec::Variant::SeparableBump) {
    ax[0] = {true, 0, 0, spec.rstar_center, spec.rstar_width};
    ax[1] = {true, 0, 0, M_PI / 2, spec.theta_width};
    ax[3] = {true, 0, 0, spec.vr_center, spec.vr_width};
    ax[4] = {true, 0, 0, spec.vth_center, spec.vth_width};
    ax[5] = {true, 0, 0, spec.vph_center, spec.vph_width};
  } else if (spec.variant == DistributionSpec::Variant::TrappingFamily) {
    const double e = spec.epsilon;
    ax[0] = {true, 0, 0, 0.0, e};
    ax[1] = {true, 0, 0, M_PI / 2, e};
    ax[2] = {true, 0, 0, 0.0, e};
    ax[3] = {true, 0, 0, 0.0, e};
    ax[4] = {true, 0, 0, 0.0, e};
    ax[5] = {true, 0, 0, std::sqrt(3.0), e};
  }
  return ax;
}

/** Deterministic stratified sampling of the number-flux measure on the
 *  carrier slice. Cells are midpoints in each axis' stratification coordinate
 *  (bump mass where available); a seeded quasi-random mode jitters each node
 *  inside its own cell. Reproducible bit-for-bit for a fixed (spec, seed).
 */
inline ParticleEnsemble build_ensemble(const DistributionSpec& spec, const BlackHoleParams& bh,
                                       long n_target, std::uint64_t seed = 0,
                                       bool jitter = false) {
  if (n_target < 1) throw std::invalid_argument("build_ensemble: n_target must be positive");
  const auto axes = ensemble_axes(spec);

  const bool collapse_phi = spec.axisymmetric;
  const int n_axes = collapse_phi ? 5 : 6;
  std::array<double, 6> rel = {1.2, 1.0, collapse_phi ? 0.0 : 1.0, 1.0, 1.0, 1.0};
  std::array<int, 6> dims{};
  auto assign = [&](double scale) {
    long prod = 1;
    for (int a = 0; a < 6; ++a) {
      dims[a] = (rel[a] == 0.0) ? 1 : std::max(1, int(std::floor(rel[a] * scale)));
      prod *= dims[a];
    }
    return prod;
  };
  double scale = std::pow(double(n_target) / 1.2, 1.0 / n_axes) + 1.0;
  while (assign(scale) > n_target && scale > 1.0) scale *= 0.99;
  if (assign(scale) > n_target) dims.fill(1);

  const double axis_weight = collapse_phi ? (spec.box.phi_hi - spec.box.phi_lo) : 1.0;

  ParticleEnsemble ens;
  ens.seed = seed;
  ens.jittered = jitter;
  ens.dims = dims;
  ens.axis_weight = axis_weight;
  ens.particles.reserve(std::min<long>(n_target, 1 << 22));

  std::array<int, 6> idx{};
  std::uint64_t cell_counter = 0;
  double total = 0.0;
  while (true) {
    std::array<double, 6> x{}, factor{};
    for (int a = 0; a < 6; ++a) {
      double frac = 0.5;
      if (jitter) frac = detail::unit_double(detail::splitmix64(seed ^ (cell_counter * 6 + a)));
      const auto [node, fac] = axes[a].node(idx[a], dims[a], frac);
      x[a] = node;
      factor[a] = fac;
    }
    double cell_measure = axis_weight;
    for (int a = 0; a < 6; ++a) {
      if (a == 2 && collapse_phi) continue;
      cell_measure *= factor[a];
    }
    PhasePoint p;
    p.r_star = x[0];
    p.r = radius_from_tortoise(p.r_star, bh);
    p.t = spec.carrier_time(p.r, bh);
    p.theta = x[1];
    p.phi = collapse_phi ? 0.0 : x[2];
    p.v_rstar = x[3];
    p.v_theta = x[4];
    p.v_phi = x[5];
    const double fval = spec.value(p);
    if (fval > 0.0) {
      const MomentumFrame fr = mass_shell_energy(p, bh);
      const double w = spec.flux_density(p, fr, bh) * cell_measure;
      if (w > 0.0) {
        ens.particles.push_back({p, w, fval});
        total += w;
      }
    }
    ++cell_counter;
    int a = 5;
    while (a >= 0 && ++idx[a] == dims[a]) { idx[a] = 0; --a; }
    if (a < 0) break;
  }
  ens.total_number_flux = total;
  if (ens.particles.empty() && spec.amplitude > 0.0)
    throw std::runtime_error("build_ensemble: empty support at the requested resolution");
  return ens;
}

// --- pointwise evaluation by backward characteristics ---------------------------

struct EvaluateOptions {
  Budget budget{1e5, 2e4, 4e4};
  StepControls controls{};
};

/** Evaluate the transported solution at a bundle point by tracing its
 *  characteristic back to the carrier slice. Conserved-quantity windows
 *  reject unreachable nodes before any integration happens; a backward exit
 *  through the retarded/advanced-time floor of the support returns zero.
 */
inline double evaluate_f(const PhasePoint& p, const DistributionSpec& spec,
                         const ConservedWindow& window, const BlackHoleParams& bh,
                         const EvaluateOptions& opt = {}) {
  const Surface carrier = spec.carrier_surface();
  const double Fcar = crossing_value(carrier, p.t, p.r_star, p.r, bh);
  if (Fcar < -1e-11)
    throw std::domain_error("evaluate_f: point lies in the past of the carrier slice");
  if (Fcar <= 1e-11) {
    if (p.r_star < spec.box.rstar_lo || p.r_star > spec.box.rstar_hi) return 0.0;
    return spec.value(p);
  }

  const MomentumFrame fr = mass_shell_energy(p, bh);
  const double abs_vt = std::abs(fr.vt);
  if (abs_vt < window.abs_vt_lo || abs_vt > window.abs_vt_hi) return 0.0;
  if (fr.ell > window.ell_hi) return 0.0;
  const double u = p.t - p.r_star, ubar = p.t + p.r_star;
  if (u < window.u_lo - 1e-9 || ubar < window.ubar_lo - 1e-9) return 0.0;

  // angular-momentum window in the original frame (v_phi is conserved there)
  const Eigen::Vector3d ell_vec = angular_momentum_vector(p);
  if (ell_vec.z() < window.vph_lo || ell_vec.z() > window.vph_hi) return 0.0;

  EquatorialFrame frame;
  const PhasePoint q0 = equatorial_reduce(p, frame);

  std::vector<SurfaceEvent> evs{
      {carrier, EventAction::Stop, true, 0},
      {Surface::outgoing_null(window.u_lo - bh.u0), EventAction::Stop, true, 1},
      {Surface::incoming_null(window.ubar_lo), EventAction::Stop, true, 2},
  };
  auto res = integrate_reduced(q0, bh, evs, opt.budget, opt.controls, -1);
  if (res.reason == StopReason::HorizonProxy || res.reason == StopReason::OuterEscape) return 0.0;
  if (res.reason != StopReason::SurfaceStop) {
    if (res.reason == StopReason::ParameterBudget)
      throw std::runtime_error("evaluate_f: backward trace exhausted its parameter budget");
    throw std::runtime_error("evaluate_f: backward trace failed");
  }
  if (res.records.empty() || res.records.back().surface_id != 0) return 0.0;  // left the support

  const PhasePoint at_carrier = equatorial_restore(res.records.back().point, frame);
  if (at_carrier.r_star < spec.box.rstar_lo || at_carrier.r_star > spec.box.rstar_hi) return 0.0;
  return spec.value(at_carrier);
}

}  // namespace svl
