#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "svl/geometry.hpp"
#include "svl/phase_space.hpp"

namespace svl {

// --- equatorial reduction ----------------------------------------------------

/** Rotation taking an initial condition into the equatorial plane.
 *
 *  Null geodesics are planar; the conserved angular-momentum vector fixes the
 *  orbital plane, so a trajectory can be integrated with theta = pi/2 and
 *  v_theta = 0 and mapped back afterwards. v_t, v_rstar and ell are invariant.
 */
struct EquatorialFrame {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();  // original -> reduced
  double L = 0.0;
  bool identity = true;
};

inline PhasePoint equatorial_reduce(const PhasePoint& p, EquatorialFrame& frame) {
  if (std::abs(std::sin(p.theta)) < 1e-12)
    throw std::domain_error("equatorial_reduce: polar chart degeneracy in the input");
  const Eigen::Vector3d n = sphere_direction(p.theta, p.phi);
  const Eigen::Vector3d ell = angular_momentum_vector(p);
  frame.L = ell.norm();
  if (p.theta == M_PI / 2 && p.v_theta == 0.0 && p.phi == 0.0 && p.v_phi >= 0.0) {
    frame.rot.setIdentity();
    frame.identity = true;
    return p;
  }
  Eigen::Vector3d zp;
  if (frame.L > 1e-300) {
    zp = ell / frame.L;
  } else {
    // radial ray: any plane through the position direction works
    zp = n.cross((std::abs(n.x()) < 0.9) ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY());
    zp.normalize();
  }
  const Eigen::Vector3d xp = n;
  const Eigen::Vector3d yp = zp.cross(xp);
  frame.rot.row(0) = xp;
  frame.rot.row(1) = yp;
  frame.rot.row(2) = zp;
  frame.identity = false;
  PhasePoint q = p;
  q.theta = M_PI / 2;
  q.phi = 0.0;
  q.v_theta = 0.0;
  q.v_phi = frame.L;
  return q;
}

/// Map a reduced-frame point back to the original frame.
inline PhasePoint equatorial_restore(const PhasePoint& reduced, const EquatorialFrame& frame) {
  if (frame.identity) return reduced;
  PhasePoint q = reduced;
  const Eigen::Vector3d np = sphere_direction(reduced.theta, reduced.phi);
  const Eigen::Vector3d n = frame.rot.transpose() * np;
  const Eigen::Vector3d ell = frame.rot.transpose() * Eigen::Vector3d(0.0, 0.0, frame.L);
  angular_from_vector(n, ell, q.theta, q.phi, q.v_theta, q.v_phi);
  return q;
}

// --- right-hand sides ---------------------------------------------------------

/// Reduced system y = (t, r*, r, phi, v_rstar) at theta = pi/2, v_phi = L.
struct ReducedRhs {
  double M;
  double L;
  static constexpr int dim = 5;
  void operator()(const std::array<double, 5>& y, std::array<double, 5>& dy) const {
    const double r = y[2];
    const double Delta = 1.0 - 2.0 * M / r;
    const double r2 = r * r;
    const double vr = y[4];
    const double vt_abs = std::sqrt(vr * vr + Delta * L * L / r2);
    dy[0] = vt_abs / Delta;
    dy[1] = vr / Delta;
    dy[2] = vr;
    dy[3] = L / r2;
    dy[4] = (r - 3.0 * M) * L * L / (r2 * r2);
  }
};

/// Full system y = (t, r*, r, theta, phi, v_rstar, v_theta, v_phi).
struct FullRhs {
  double M;
  static constexpr int dim = 8;
  void operator()(const std::array<double, 8>& y, std::array<double, 8>& dy) const {
    PhasePointT<double> p{y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]};
    const PhaseVelocityT<double> d = liouville_rhs(p, M);
    dy = {d.dt, d.dr_star, d.dr, d.dtheta, d.dphi, d.dv_rstar, d.dv_theta, d.dv_phi};
  }
};

template <int N>
PhasePoint state_to_point(const std::array<double, N>& y, double L) {
  if constexpr (N == 5) return {y[0], y[1], y[2], M_PI / 2, y[3], y[4], 0.0, L};
  else return {y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]};
}

// --- Dormand-Prince 5(4) with dense output ------------------------------------

struct StepControls {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_max = 1e8;
  double tol_event = 1e-10;
  double tol_consistency = 1e-7;  // acceptable conserved-quantity drift
};

namespace dp5 {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// continuous extension, one quartic polynomial in theta per stage
constexpr double P[7][4] = {
    {1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0},
    {0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0},
    {0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0},
    {0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0},
    {0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0}};
}  // namespace dp5

/// One accepted step with its stage derivatives; evaluates the solution
/// anywhere inside the step.
template <int N>
struct DenseSegment {
  double s0 = 0.0, h = 0.0;
  std::array<double, N> y0{};
  std::array<std::array<double, N>, 7> K{};

  std::array<double, N> eval(double s) const {
    const double th = (s - s0) / h;
    std::array<double, N> out = y0;
    for (int stage = 0; stage < 7; ++stage) {
      const auto& P = dp5::P[stage];
      const double w = th * (P[0] + th * (P[1] + th * (P[2] + th * P[3])));
      if (w == 0.0) continue;
      for (int i = 0; i < N; ++i) out[i] += h * w * K[stage][i];
    }
    return out;
  }
};

/** Fixed-dimension adaptive Dormand-Prince stepper (FSAL). The independent
 *  variable sigma always increases; callers flip the RHS for backward runs.
 */
template <class Rhs>
class DormandPrince {
 public:
  static constexpr int N = Rhs::dim;
  using State = std::array<double, N>;

  DormandPrince(const Rhs& rhs, const State& y0, const StepControls& ctl)
      : rhs_(rhs), ctl_(ctl), y_(y0) {
    rhs_(y0, k1_);
    h_ = initial_step(y0, k1_);
  }

  /// Step once (retrying with smaller h on rejection); false on underflow.
  bool advance(double h_cap) {
    State y1{};
    for (int tries = 0; tries < 90; ++tries) {
      const double h = std::min({h_, h_cap, ctl_.h_max});
      if (!(h > s_ * 1e-16 + 1e-300)) return false;
      double err = attempt(h, y1);
      if (!std::isfinite(err)) err = 1e10;
      if (err <= 1.0) {
        s_ += h;
        y_ = y1;
        k1_ = k7_;  // FSAL
        h_ = h * std::min(6.0, std::max(0.3, 0.9 * std::pow(std::max(err, 1e-12), -0.2)));
        return true;
      }
      h_ = h * std::min(1.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    }
    return false;
  }

  const DenseSegment<N>& segment() const { return seg_; }  // last accepted step
  const State& y() const { return y_; }
  double s() const { return s_; }

 private:
  double attempt(double h, State& y1) {
    using namespace dp5;
    const State& y0 = y_;
    State t{}, k2, k3, k4, k5, k6;
    auto stage = [&](std::initializer_list<std::pair<double, const State*>> terms, State& out) {
      for (int i = 0; i < N; ++i) {
        double acc = y0[i];
        for (const auto& [a, k] : terms) acc += h * a * (*k)[i];
        t[i] = acc;
      }
      rhs_(t, out);
    };
    stage({{a21, &k1_}}, k2);
    stage({{a31, &k1_}, {a32, &k2}}, k3);
    stage({{a41, &k1_}, {a42, &k2}, {a43, &k3}}, k4);
    stage({{a51, &k1_}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, k5);
    stage({{a61, &k1_}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, k6);
    for (int i = 0; i < N; ++i)
      y1[i] = y0[i] + h * (b1 * k1_[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs_(y1, k7_);
    double err2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double e =
          h * (e1 * k1_[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7_[i]);
      const double sc = ctl_.atol + ctl_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      err2 += (e / sc) * (e / sc);
    }
    seg_.s0 = s_;
    seg_.h = h;
    seg_.y0 = y0;
    seg_.K = {k1_, k2, k3, k4, k5, k6, k7_};
    return std::sqrt(err2 / N);
  }

  double initial_step(const State& y0, const State& f0) const {
    double dy = 0.0, df = 0.0;
    for (int i = 0; i < N; ++i) {
      const double sc = ctl_.atol + ctl_.rtol * std::abs(y0[i]);
      dy = std::max(dy, std::abs(y0[i]) / sc);
      df = std::max(df, std::abs(f0[i]) / sc);
    }
    const double h = (df > 0.0) ? 0.01 * std::max(1.0, dy) / df : 1e-6;
    return std::min({h, 1.0, ctl_.h_max});
  }

  Rhs rhs_;
  StepControls ctl_;
  DenseSegment<N> seg_{};
  State k1_{}, k7_{};
  State y_{};
  double h_ = 1e-6, s_ = 0.0;
};

// --- event-driven integration ---------------------------------------------------

enum class EventAction { Stop, Record };

struct SurfaceEvent {
  Surface surface;
  EventAction action = EventAction::Record;
  bool once = true;  // deactivate after the first located crossing
  int id = 0;        // caller ids must be >= 0; -1 marks the built-in horizon proxy
};

enum class StopReason {
  SurfaceStop,
  HorizonProxy,
  OuterEscape,
  ParameterBudget,
  StepUnderflow,
};

struct EventRecord {
  int surface_id = 0;
  double s = 0.0;
  int direction = +1;  // sign of the level-function change at the crossing
  PhasePoint point;    // in the integration frame
};

struct Budget {
  double s_max = 1e4;
  double r_max = 2e4;
  double ubar_max = 4e4;
};

struct IntegrationStats {
  double max_vt_drift = 0.0;        // relative to the initial v_t
  double max_rstar_mismatch = 0.0;  // |r*(r) - r*| along the run
  double max_shell_drift = 0.0;     // |g^{-1}(v,v)| / v_t0^2, full chart only
  long n_steps = 0;
};

struct IntegrationResult {
  std::vector<EventRecord> records;
  StopReason reason = StopReason::ParameterBudget;
  double s_end = 0.0;
  PhasePoint end_point;
  IntegrationStats stats;
};

/// Dense-output view of one accepted step handed to accumulation observers.
/// s0 -> s1 in signed flow parameter; interior_splits lists located crossings.
struct StepView {
  double s0, s1;
  const std::function<PhasePoint(double)>& at;
  const std::vector<double>& interior_splits;
};

using StepObserver = std::function<void(const StepView&)>;

namespace detail {

template <class Rhs>
struct FlippableRhs {
  Rhs base;
  double sign;
  static constexpr int dim = Rhs::dim;
  void operator()(const std::array<double, dim>& y, std::array<double, dim>& dy) const {
    base(y, dy);
    if (sign < 0)
      for (auto& v : dy) v = -v;
  }
};

inline double brent_root(const std::function<double(double)>& g, double a, double b, double fa,
                         double fb) {
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < 120; ++it) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 1e-15;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol || fb == 0.0) return b;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc, rr = fb / fc;
        p = s * (2.0 * xm * qq * (qq - rr) - (b - a) * (rr - 1.0));
        q = (qq - 1.0) * (rr - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      const double r_ = e;
      e = d;
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol * q), std::abs(r_ * q))) d = p / q;
      else { d = xm; e = d; }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol) ? d : (xm > 0 ? tol : -tol);
    fb = g(b);
    if ((fb > 0.0) == (fc > 0.0)) { c = a; fc = fa; d = b - a; e = d; }
  }
  return b;
}

}  // namespace detail

/** Integrate one characteristic with surface-crossing detection.
 *
 *  `start` must be a mass-shell point in the integration frame (already
 *  equatorially reduced for the 5-dimensional path). `direction` +1 pushes to
 *  the future, -1 traces backward; recorded s values are signed accordingly.
 *  The horizon proxy always stops the run; outer escape is triggered by the
 *  budget caps on r and ubar.
 */
template <class Rhs>
IntegrationResult integrate_characteristic(const Rhs& rhs_fwd, const PhasePoint& start,
                                           const BlackHoleParams& bh,
                                           std::vector<SurfaceEvent> surfaces,
                                           const Budget& budget, const StepControls& ctl,
                                           int direction = +1,
                                           const StepObserver& observer = nullptr) {
  constexpr int N = Rhs::dim;
  using State = std::array<double, N>;

  const double L = (N == 5) ? start.v_phi : 0.0;
  State y0{};
  if constexpr (N == 5) y0 = {start.t, start.r_star, start.r, start.phi, start.v_rstar};
  else y0 = {start.t, start.r_star, start.r, start.theta, start.phi,
             start.v_rstar, start.v_theta, start.v_phi};

  detail::FlippableRhs<Rhs> rhs{rhs_fwd, double(direction)};
  DormandPrince<detail::FlippableRhs<Rhs>> stepper(rhs, y0, ctl);

  IntegrationResult out;
  out.end_point = start;
  const double vt0 = mass_shell_vt(start, bh.M);

  auto point_of = [&](const State& y) { return state_to_point<N>(y, L); };

  const double rstar_cap = tortoise_from_radius(budget.r_max, bh);
  auto cap_value = [&](const State& y, int which) {
    if (which == 0) return y[1] - rstar_cap;  // r >= r_max
    return (y[0] + y[1]) - budget.ubar_max;   // ubar >= ubar_max
  };

  std::vector<SurfaceEvent> evs = std::move(surfaces);
  evs.push_back({Surface::horizon_proxy(), EventAction::Stop, true, -1});
  std::vector<char> active(evs.size(), 1);
  std::vector<double> F_prev(evs.size());
  for (size_t i = 0; i < evs.size(); ++i)
    F_prev[i] = crossing_value(evs[i].surface, start.t, start.r_star, start.r, bh);

  // starting exactly on a surface counts as a crossing only when moving to F > 0
  {
    State dy{};
    rhs(y0, dy);
    const double eps = 1e-7 / (1.0 + std::abs(dy[1]));
    State yy = y0;
    for (int i = 0; i < N; ++i) yy[i] += eps * dy[i];
    const PhasePoint p1 = point_of(yy);
    for (size_t i = 0; i < evs.size(); ++i) {
      if (std::abs(F_prev[i]) <= ctl.tol_event) {
        const double Fnext = crossing_value(evs[i].surface, p1.t, p1.r_star, p1.r, bh);
        if (Fnext > F_prev[i]) {
          out.records.push_back({evs[i].id, 0.0, +1, start});
          if (evs[i].action == EventAction::Stop) {
            out.reason = (evs[i].id == -1) ? StopReason::HorizonProxy : StopReason::SurfaceStop;
            return out;
          }
          if (evs[i].once) active[i] = 0;
        }
        F_prev[i] = (Fnext > F_prev[i]) ? 1e-300 : -1e-300;
      }
    }
  }
  double cap_prev[2] = {cap_value(y0, 0), cap_value(y0, 1)};

  std::vector<double> splits;

  while (true) {
    const double sigma_left = budget.s_max - stepper.s();
    if (sigma_left <= 0.0) { out.reason = StopReason::ParameterBudget; break; }
    if (!stepper.advance(sigma_left)) { out.reason = StopReason::StepUnderflow; break; }
    out.stats.n_steps++;

    const auto& seg = stepper.segment();
    const double sig0 = seg.s0, sig1 = seg.s0 + seg.h;
    const State& y1 = stepper.y();
    const PhasePoint p1 = point_of(y1);

    if (p1.r > 2.0 * bh.M) {
      const double vt1 = mass_shell_vt(p1, bh.M);
      out.stats.max_vt_drift =
          std::max(out.stats.max_vt_drift, std::abs(vt1 - vt0) / std::abs(vt0));
      out.stats.max_rstar_mismatch = std::max(
          out.stats.max_rstar_mismatch, std::abs(tortoise_from_radius(p1.r, bh.M) - p1.r_star));
      if constexpr (N == 8) {
        const double Delta = lapse(p1.r, bh.M);
        const double L2 = angular_momentum_sq(p1);
        const double vtt = mass_shell_vt(p1, bh.M);
        const double shell = (-vtt * vtt + p1.v_rstar * p1.v_rstar) / Delta + L2 / (p1.r * p1.r);
        out.stats.max_shell_drift =
            std::max(out.stats.max_shell_drift, std::abs(shell) / (vt0 * vt0));
      }
    }

    struct Hit { double sigma; size_t idx; bool is_cap; double dF; };
    std::vector<Hit> hits;

    for (size_t i = 0; i < evs.size(); ++i) {
      if (!active[i]) continue;
      const double F1 = crossing_value(evs[i].surface, p1.t, p1.r_star, p1.r, bh);
      if ((F_prev[i] < 0.0 && F1 >= 0.0) || (F_prev[i] > 0.0 && F1 <= 0.0)) {
        std::function<double(double)> G = [&, i](double sg) {
          const PhasePoint p = point_of(seg.eval(sg));
          return crossing_value(evs[i].surface, p.t, p.r_star, p.r, bh);
        };
        hits.push_back({detail::brent_root(G, sig0, sig1, F_prev[i], F1), i, false,
                        F1 - F_prev[i]});
      }
      F_prev[i] = F1;
    }
    for (int w = 0; w < 2; ++w) {
      const double C1 = cap_value(y1, w);
      if (cap_prev[w] < 0.0 && C1 >= 0.0) {
        std::function<double(double)> G = [&, w](double sg) { return cap_value(seg.eval(sg), w); };
        hits.push_back({detail::brent_root(G, sig0, sig1, cap_prev[w], C1), 0, true, 1.0});
      }
      cap_prev[w] = C1;
    }
    std::sort(hits.begin(), hits.end(),
              [](const Hit& a, const Hit& b) { return a.sigma < b.sigma; });

    double stop_sigma = sig1;
    StopReason stop_reason = StopReason::ParameterBudget;
    bool stopping = false;

    splits.clear();
    for (const Hit& h : hits) {
      const PhasePoint ph = point_of(seg.eval(h.sigma));
      if (h.is_cap) {
        stop_sigma = h.sigma;
        stop_reason = StopReason::OuterEscape;
        stopping = true;
        break;
      }
      const SurfaceEvent& ev = evs[h.idx];
      out.records.push_back({ev.id, direction * h.sigma, h.dF > 0 ? +1 : -1, ph});
      if (ev.action == EventAction::Stop) {
        stop_sigma = h.sigma;
        stop_reason = (ev.id == -1) ? StopReason::HorizonProxy : StopReason::SurfaceStop;
        stopping = true;
        break;
      }
      if (ev.once) active[h.idx] = 0;
      splits.push_back(direction * h.sigma);
    }

    if (observer) {
      std::function<PhasePoint(double)> eval_at = [&](double s) {
        return point_of(seg.eval(direction * s));
      };
      StepView view{direction * sig0, direction * stop_sigma, eval_at, splits};
      observer(view);
    }

    if (stopping) {
      out.reason = stop_reason;
      out.s_end = direction * stop_sigma;
      out.end_point = point_of(seg.eval(stop_sigma));
      return out;
    }
  }

  out.s_end = direction * stepper.s();
  out.end_point = point_of(stepper.y());
  return out;
}

/// Convenience wrappers choosing the reduced or the full chart.
inline IntegrationResult integrate_reduced(const PhasePoint& equatorial_start,
                                           const BlackHoleParams& bh,
                                           const std::vector<SurfaceEvent>& surfaces,
                                           const Budget& budget, const StepControls& ctl,
                                           int direction = +1,
                                           const StepObserver& observer = nullptr) {
  ReducedRhs rhs{bh.M, equatorial_start.v_phi};
  return integrate_characteristic(rhs, equatorial_start, bh, surfaces, budget, ctl, direction,
                                  observer);
}

inline IntegrationResult integrate_full(const PhasePoint& start, const BlackHoleParams& bh,
                                        const std::vector<SurfaceEvent>& surfaces,
                                        const Budget& budget, const StepControls& ctl,
                                        int direction = +1,
                                        const StepObserver& observer = nullptr) {
  FullRhs rhs{bh.M};
  return integrate_characteristic(rhs, start, bh, surfaces, budget, ctl, direction, observer);
}

}  // namespace svl
