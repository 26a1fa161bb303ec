#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "svl/geodesic_flow.hpp"
#include "svl/parallel.hpp"
#include "svl/vlasov.hpp"

namespace svl {

// --- weight catalogue -----------------------------------------------------------

/** Multiplicative momentum weight
 *    g = |v_N|^a_vN |v_t|^a_vt <v_t>^b r^p (|v_ubar|/|v_t|)^q,
 *  optionally times |v . n_Sigma| and/or divided by gamma0. Everything the
 *  flux and bulk functionals need factors through this form.
 */
struct MomentSpec {
  double coefficient = 1.0;
  double a_vN = 0.0;
  double a_vt = 0.0;
  double b_bracket = 0.0;
  double p = 0.0;
  double q = 0.0;
  bool times_abs_v_dot_n = false;
  bool over_gamma0 = false;
  std::string label = "number";

  static MomentSpec number() { return {}; }
  static MomentSpec abs_vt(double a = 1.0) {
    MomentSpec m;
    m.a_vt = a;
    m.label = "vt^" + std::to_string(a);
    return m;
  }
  static MomentSpec abs_vN(double a = 1.0) {
    MomentSpec m;
    m.a_vN = a;
    m.label = "vN^" + std::to_string(a);
    return m;
  }
  static MomentSpec weighted_vN(double p, double q, double a = 1.0) {
    MomentSpec m;
    m.p = p;
    m.q = q;
    m.a_vN = a;
    m.label = "r^" + std::to_string(p) + "*ratio^" + std::to_string(q) + "*vN^" + std::to_string(a);
    return m;
  }

  double evaluate(const PhasePoint& x, const MomentumFrame& f, const BlackHoleParams& bh) const {
    double g = coefficient;
    if (a_vN != 0.0) g *= std::pow(std::abs(f.vN), a_vN);
    if (a_vt != 0.0) g *= std::pow(std::abs(f.vt), a_vt);
    if (b_bracket != 0.0) g *= std::pow(f.bracket_vt, b_bracket);
    if (p != 0.0) g *= std::pow(x.r, p);
    if (q != 0.0) g *= std::pow(std::abs(f.vubar) / std::abs(f.vt), q);
    if (times_abs_v_dot_n) g *= abs_v_dot_sigma_normal(x.r, f.vu, f.vubar, bh);
    if (over_gamma0) g /= foliation_gamma0(x.r, bh);
    return g;
  }
};

/// Spacetime region cut out by radial bounds and a foliation-time window.
struct RegionSpec {
  double tau_min = 0.0;
  double tau_max = std::numeric_limits<double>::infinity();
  double rstar_abs_max = std::numeric_limits<double>::infinity();
  double r_max = std::numeric_limits<double>::infinity();

  bool contains_spatially(const PhasePoint& x) const {
    return std::abs(x.r_star) <= rstar_abs_max && x.r <= r_max;
  }
  bool contains(const PhasePoint& x, const BlackHoleParams& bh) const {
    if (!contains_spatially(x)) return false;
    const double tau = foliation_tau(x.t, x.r_star, x.r, bh);
    return tau >= tau_min && tau <= tau_max;
  }
};

/** How a bulk integral pairs the weight with the measure:
 *    PlainVolume:  integral of f g against the phase-space volume,
 *    RhoVolume:    the density rho[f g] against the spacetime volume,
 *    RhoLeafTime:  rho[f g] integrated leaf-by-leaf against dtau.
 *  In the co-area line integral these differ by |v . n| and gamma0 factors.
 */
enum class BulkKind { PlainVolume, RhoVolume, RhoLeafTime };

struct BulkRequest {
  RegionSpec region;         // tau window used directly when dyadic is false
  MomentSpec weight;
  BulkKind kind = BulkKind::RhoLeafTime;
  bool dyadic_tau = false;   // accumulate into buckets tau in (2^{k-1}, 2^k]
  int k_max = 8;
  std::string label = "bulk";

  int n_buckets() const { return dyadic_tau ? k_max + 1 : 1; }
};

// --- ensemble pushing with flux and bulk tallies -----------------------------------

struct FluxSurface {
  Surface surface;
  bool stop = false;
  std::string name;
};

struct PushPlan {
  std::vector<FluxSurface> surfaces;
  std::vector<Surface> splitters;    // located but not tallied; keep bulk panels smooth
  std::vector<MomentSpec> weights;   // applied at every surface crossing
  std::vector<BulkRequest> bulks;
  Budget budget{};
  StepControls controls{};
  int jobs = 0;
};

/// Exit classes for the balance bookkeeping.
enum ExitClass { ExitHorizon = 0, ExitEscape = 1, ExitStuck = 2 };

struct PushResult {
  int n_surfaces = 0, n_weights = 0;
  std::vector<double> flux;              // [surface][weight]
  std::vector<long> crossings;           // [surface]
  std::vector<double> exit_not_crossed;  // [surface][class][weight]
  std::vector<double> exit_total;        // [class][weight]
  std::vector<long> exit_counts{0, 0, 0};
  double stuck_weight = 0.0;
  std::vector<double> bulk;              // concatenated request buckets
  std::vector<long> bulk_offsets;        // start of each request in `bulk`
  double max_vt_drift = 0.0;
  long total_steps = 0;

  double& flux_at(int s, int w) { return flux[size_t(s) * n_weights + w]; }
  double flux_at(int s, int w) const { return flux[size_t(s) * n_weights + w]; }
  double& exit_nc(int s, int c, int w) {
    return exit_not_crossed[(size_t(s) * 3 + c) * n_weights + w];
  }
  double exit_nc(int s, int c, int w) const {
    return exit_not_crossed[(size_t(s) * 3 + c) * n_weights + w];
  }
  double bulk_at(int request, int bucket) const { return bulk[bulk_offsets[request] + bucket]; }
  /// Cumulative dyadic bulk up to bucket k inclusive.
  double bulk_cumulative(int request, int k) const {
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) acc += bulk_at(request, j);
    return acc;
  }
};

namespace detail {

constexpr double kG5x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                            0.9061798459386640};
constexpr double kG5w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                            0.4786286704993665, 0.2369268850561891};

inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p1 = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      p1 = xi;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * xi * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
      const double step = p1 / dp;
      xi -= step;
      if (std::abs(step) < 1e-15) break;
    }
    x[i] = xi;
    w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
  }
  return {x, w};
}

}  // namespace detail

/** Push every particle of an ensemble through the flow, tallying surface
 *  fluxes (sum of weight times the momentum weight at each located crossing),
 *  exit bookkeeping for balance checks, and co-area bulk integrals (per-step
 *  Gauss panels on the dense output, split at located crossings).
 */
inline PushResult push_ensemble(const ParticleEnsemble& ens, const PushPlan& plan,
                                const BlackHoleParams& bh) {
  const int n_s = int(plan.surfaces.size());
  const int n_w = int(plan.weights.size());
  const int n_b = int(plan.bulks.size());

  PushResult zero;
  zero.n_surfaces = n_s;
  zero.n_weights = n_w;
  zero.flux.assign(size_t(n_s) * n_w, 0.0);
  zero.crossings.assign(n_s, 0);
  zero.exit_not_crossed.assign(size_t(n_s) * 3 * n_w, 0.0);
  zero.exit_total.assign(size_t(3) * n_w, 0.0);
  zero.bulk_offsets.assign(n_b + 1, 0);
  for (int b = 0; b < n_b; ++b)
    zero.bulk_offsets[b + 1] = zero.bulk_offsets[b] + plan.bulks[b].n_buckets();
  zero.bulk.assign(zero.bulk_offsets[n_b], 0.0);

  auto per_particle = [&](std::size_t i, PushResult& acc) {
    const Particle& part = ens.particles[i];

    EquatorialFrame frame;
    const PhasePoint q0 = equatorial_reduce(part.point, frame);

    std::vector<SurfaceEvent> evs;
    evs.reserve(plan.surfaces.size() + plan.splitters.size());
    for (int s = 0; s < n_s; ++s)
      evs.push_back({plan.surfaces[s].surface,
                     plan.surfaces[s].stop ? EventAction::Stop : EventAction::Record, true, s});
    for (size_t j = 0; j < plan.splitters.size(); ++j)
      evs.push_back({plan.splitters[j], EventAction::Record, false, n_s + int(j)});

    StepObserver observer = nullptr;
    if (n_b > 0) {
      observer = [&](const StepView& view) {
        // panels split at located crossings keep the indicators piecewise smooth
        double a = view.s0;
        auto do_panel = [&](double lo, double hi) {
          const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
          if (half == 0.0) return;
          for (int gnode = 0; gnode < 5; ++gnode) {
            const double s = mid + half * detail::kG5x[gnode];
            const PhasePoint x = view.at(s);
            const double gw = std::abs(half) * detail::kG5w[gnode];
            const double tau = foliation_tau(x.t, x.r_star, x.r, bh);
            MomentumFrame fr{};
            bool have_frame = false;
            for (int b = 0; b < n_b; ++b) {
              const BulkRequest& req = plan.bulks[b];
              if (!req.region.contains_spatially(x)) continue;
              int bucket = 0;
              if (req.dyadic_tau) {
                if (tau < req.region.tau_min || tau > std::exp2(req.k_max)) continue;
                bucket = (tau <= 1.0) ? 0 : std::min(req.k_max, int(std::ceil(std::log2(tau))));
              } else {
                if (tau < req.region.tau_min || tau > req.region.tau_max) continue;
              }
              if (!have_frame) {
                fr = mass_shell_energy(x, bh);
                have_frame = true;
              }
              double g = req.weight.evaluate(x, fr, bh);
              if (req.kind != BulkKind::PlainVolume)
                g *= abs_v_dot_sigma_normal(x.r, fr.vu, fr.vubar, bh);
              if (req.kind == BulkKind::RhoLeafTime) g /= foliation_gamma0(x.r, bh);
              acc.bulk[acc.bulk_offsets[b] + bucket] += part.weight * g * gw;
            }
          }
        };
        for (double split : view.interior_splits) {
          do_panel(a, split);
          a = split;
        }
        do_panel(a, view.s1);
      };
    }

    const auto res = integrate_reduced(q0, bh, evs, plan.budget, plan.controls, +1, observer);

    std::vector<char> crossed(n_s, 0);
    for (const auto& rec : res.records) {
      if (rec.surface_id < 0 || rec.surface_id >= n_s) continue;
      crossed[rec.surface_id] = 1;
      acc.crossings[rec.surface_id]++;
      const MomentumFrame fr = mass_shell_energy(rec.point, bh);
      for (int w = 0; w < n_w; ++w)
        acc.flux_at(rec.surface_id, w) +=
            part.weight * plan.weights[w].evaluate(rec.point, fr, bh);
    }

    int cls = ExitStuck;
    if (res.reason == StopReason::HorizonProxy) cls = ExitHorizon;
    else if (res.reason == StopReason::OuterEscape) cls = ExitEscape;
    else if (res.reason == StopReason::SurfaceStop) cls = -1;  // consumed by a stop surface
    if (cls >= 0) {
      acc.exit_counts[cls]++;
      if (cls == ExitStuck) acc.stuck_weight += part.weight;
      const MomentumFrame fr = mass_shell_energy(res.end_point, bh);
      for (int w = 0; w < n_w; ++w) {
        const double gv = part.weight * plan.weights[w].evaluate(res.end_point, fr, bh);
        acc.exit_total[size_t(cls) * n_w + w] += gv;
        for (int s = 0; s < n_s; ++s)
          if (!crossed[s]) acc.exit_nc(s, cls, w) += gv;
      }
    }
    acc.max_vt_drift = std::max(acc.max_vt_drift, res.stats.max_vt_drift);
    acc.total_steps += res.stats.n_steps;
  };

  auto combine = [&](PushResult& tot, const PushResult& p) {
    for (size_t k = 0; k < tot.flux.size(); ++k) tot.flux[k] += p.flux[k];
    for (size_t k = 0; k < tot.crossings.size(); ++k) tot.crossings[k] += p.crossings[k];
    for (size_t k = 0; k < tot.exit_not_crossed.size(); ++k)
      tot.exit_not_crossed[k] += p.exit_not_crossed[k];
    for (size_t k = 0; k < tot.exit_total.size(); ++k) tot.exit_total[k] += p.exit_total[k];
    for (int c = 0; c < 3; ++c) tot.exit_counts[c] += p.exit_counts[c];
    tot.stuck_weight += p.stuck_weight;
    for (size_t k = 0; k < tot.bulk.size(); ++k) tot.bulk[k] += p.bulk[k];
    tot.max_vt_drift = std::max(tot.max_vt_drift, p.max_vt_drift);
    tot.total_steps += p.total_steps;
  };

  return parallel_block_reduce(ens.particles.size(), zero, per_particle, combine, plan.jobs);
}

// --- pointwise momentum moments ----------------------------------------------------

struct MomentOptions {
  int base_order = 8;      // three nested tensor Gauss levels: n, 3n/2, 9n/4
  double rel_tol = 5e-3;   // resolution target for the Richardson estimate
  EvaluateOptions eval{};
  int jobs = 0;
};

struct MomentResult {
  double value = 0.0;
  double err_est = 0.0;
  long evaluations = 0;
  bool resolved = true;
  bool stalled = false;  // refinement no longer shrinking the difference
};

/** Momentum-space moment of the transported solution at a spacetime point:
 *  the integral of g * f against the fiber measure, computed on the
 *  conserved-window bounding box by nested tensor Gauss quadrature with
 *  backward-characteristic evaluation of f at every node.
 */
inline MomentResult pointwise_moment(const PhasePoint& base, const MomentSpec& g,
                                     const DistributionSpec& dist, const ConservedWindow& win,
                                     const BlackHoleParams& bh, const MomentOptions& opt = {}) {
  const double st = std::sin(base.theta);
  const double A = win.abs_vt_hi;
  const double vth_max = win.ell_hi;
  const double vph_lo = std::max(win.vph_lo, -win.ell_hi * st);
  const double vph_hi = std::min(win.vph_hi, win.ell_hi * st);

  MomentResult out;
  if (!(A > 0.0) || vph_lo >= vph_hi) return out;

  auto level_value = [&](int n, long& evals) {
    auto [gx, gw] = detail::gauss_legendre(n);
    struct Acc { double sum = 0.0; long evals = 0; };
    Acc zero;
    auto per = [&](std::size_t flat, Acc& acc) {
      const int i = int(flat / (n * n));
      const int j = int((flat / n) % n);
      const int k = int(flat % n);
      const double vr = A * gx[i];
      const double vth = vth_max * gx[j];
      const double vph = 0.5 * (vph_lo + vph_hi) + 0.5 * (vph_hi - vph_lo) * gx[k];
      PhasePoint p = base;
      p.v_rstar = vr;
      p.v_theta = vth;
      p.v_phi = vph;
      const MomentumFrame fr = mass_shell_energy(p, bh);
      if (std::abs(fr.vt) < win.abs_vt_lo || std::abs(fr.vt) > win.abs_vt_hi) return;
      if (fr.ell > win.ell_hi) return;
      const double f = evaluate_f(p, dist, win, bh, opt.eval);
      acc.evals++;
      if (f == 0.0) return;
      const double gval = g.evaluate(p, fr, bh);
      acc.sum += gw[i] * gw[j] * gw[k] * f * gval * fiber_measure_density(p, fr);
    };
    auto comb = [](Acc& a, const Acc& b) {
      a.sum += b.sum;
      a.evals += b.evals;
    };
    const Acc acc = parallel_block_reduce(std::size_t(n) * n * n, zero, per, comb, opt.jobs, 64);
    evals += acc.evals;
    return acc.sum * A * vth_max * 0.5 * (vph_hi - vph_lo);
  };

  const int n1 = opt.base_order;
  const int n2 = (3 * n1) / 2;
  const int n3 = (9 * n1) / 4;
  long evals = 0;
  const double I1 = level_value(n1, evals);
  const double I2 = level_value(n2, evals);
  const double I3 = level_value(n3, evals);
  out.value = I3;
  out.err_est = std::abs(I3 - I2);
  out.evaluations = evals;
  out.resolved = out.err_est <= std::max(opt.rel_tol * std::abs(I3), 1e-300);
  out.stalled = !out.resolved && out.err_est > 0.7 * std::abs(I2 - I1);
  return out;
}

// --- initial energy norms ------------------------------------------------------------

struct EnergyNorm {
  double total = 0.0;
  double linear_term = 0.0;
  double nonlinear_term = 0.0;
};

/** Initial-slice energy norm with radial ratio weight and retarded-time
 *  weight: the linear flux term plus the s^ceil(q)-power term taken to its
 *  conjugate root. Computed on the ensemble representation of the data.
 */
inline EnergyNorm initial_energy_norm(const ParticleEnsemble& ens, double a, double q, double s,
                                      const BlackHoleParams& bh) {
  if (!(s >= 1.0)) throw std::invalid_argument("initial_energy_norm: need s >= 1");
  const double sigma = std::pow(s, std::ceil(q));
  double e1 = 0.0, e2 = 0.0;
  for (const Particle& part : ens.particles) {
    const MomentumFrame fr = mass_shell_energy(part.point, bh);
    const double u = part.point.t - part.point.r_star;
    const double u_minus = std::max(0.0, -u);
    const double ratio = std::abs(fr.vubar) / std::abs(fr.vt);
    const double wgt = std::pow(part.point.r, q) * std::pow(ratio, q / 2.0) +
                       std::pow(1.0 + u_minus, q);
    e1 += part.weight * wgt * std::pow(std::abs(fr.vN), a);
    e2 += part.weight * wgt * std::pow(part.f_value, sigma - 1.0) *
          std::pow(fr.bracket_vt, 4.0 * (sigma - 1.0)) * std::pow(std::abs(fr.vt), sigma * a);
  }
  EnergyNorm norm;
  norm.linear_term = e1;
  norm.nonlinear_term = std::pow(e2, 1.0 / sigma);
  norm.total = norm.linear_term + norm.nonlinear_term;
  return norm;
}

}  // namespace svl
