#ifndef REACHTRACK_DYNAMICS_HPP
#define REACHTRACK_DYNAMICS_HPP

// control-affine relative dynamics between a tracking model and a simpler
// planning model, plus the pointwise game quantities built on them:
//   rdot = drift(r) + sum_i us[i]*tcol_i(r) + sum_j up[j]*pcol_j(r) + sum_k d[k]*dcol_k(r)
// the planner input box scales with the authority parameter beta.

#include <functional>
#include <string>
#include <vector>

#include "reachtrack/common.hpp"

namespace reachtrack {

struct BoxBounds {
  Vec lo, hi;
  std::size_t size() const { return lo.size(); }
  void validate(const std::string& who) const {
    require(lo.size() == hi.size(), who + ": bound arrays differ in length");
    for (std::size_t i = 0; i < lo.size(); ++i)
      require(lo[i] <= hi[i], who + ": lower bound exceeds upper bound");
  }
};

using FieldFn = std::function<void(const double* r, double* out)>;

struct RelSys {
  std::string id;
  int n_r = 0;  // relative-state dimension
  FieldFn drift;
  std::vector<FieldFn> tracker_cols, planner_cols, dist_cols;
  BoxBounds tracker_bounds;  // one interval per tracker input
  BoxBounds dist_bounds;     // one interval per disturbance input
  Vec beta_lo, beta_hi;      // componentwise authority range, one per planner input
  std::vector<int> periodic_dims;  // angle states, wrapped to [-pi, pi)
  std::vector<int> error_dims;     // components of r that live in planner space
  std::vector<Vec> Q_cols;         // s = r + Q p; one column (length n_r) per planner dim

  int n_tracker() const { return int(tracker_cols.size()); }
  int n_planner() const { return int(planner_cols.size()); }
  int n_dist() const { return int(dist_cols.size()); }
  int n_beta() const { return int(beta_lo.size()); }

  // planner input box at authority beta: [-beta_j, beta_j] per planner input
  BoxBounds planner_bounds(const Vec& beta) const {
    require(int(beta.size()) == n_beta(), id + ": beta dimension mismatch");
    BoxBounds b;
    b.lo.resize(beta.size());
    b.hi.resize(beta.size());
    for (std::size_t j = 0; j < beta.size(); ++j) {
      require(beta[j] >= 0.0, id + ": negative planner authority");
      b.lo[j] = -beta[j];
      b.hi[j] = beta[j];
    }
    return b;
  }

  // all builtins share one scalar authority: every beta component moves together
  Vec beta_vector(double b) const { return Vec(std::size_t(n_beta()), b); }
  double beta_scalar_lo() const { return beta_lo.empty() ? 0.0 : beta_lo[0]; }
  double beta_scalar_hi() const { return beta_hi.empty() ? 0.0 : beta_hi[0]; }

  // separation cost: euclidean distance in planner space
  double cost_at(const double* r) const {
    double s = 0;
    for (int e : error_dims) s += r[e] * r[e];
    return std::sqrt(s);
  }

  void validate() const {
    require(n_r > 0, "system: empty state");
    require(bool(drift), "system: missing drift");
    tracker_bounds.validate(id + " tracker bounds");
    dist_bounds.validate(id + " disturbance bounds");
    require(tracker_bounds.size() == tracker_cols.size(), id + ": tracker bound count mismatch");
    require(dist_bounds.size() == dist_cols.size(), id + ": disturbance bound count mismatch");
    require(beta_lo.size() == beta_hi.size(), id + ": beta range arrays differ");
    require(beta_lo.size() == planner_cols.size(), id + ": beta count != planner inputs");
    for (std::size_t j = 0; j < beta_lo.size(); ++j)
      require(0.0 <= beta_lo[j] && beta_lo[j] <= beta_hi[j], id + ": bad beta range");
    require(Q_cols.size() == planner_cols.size(), id + ": Q column count mismatch");
    for (const auto& q : Q_cols) require(int(q.size()) == n_r, id + ": Q column length mismatch");
    for (int e : error_dims) require(e >= 0 && e < n_r, id + ": error dim out of range");
    for (int pd : periodic_dims) require(pd >= 0 && pd < n_r, id + ": periodic dim out of range");
  }
};

// ---- pointwise operations ----------------------------------------------------

inline void check_inputs(const RelSys& sys, const Vec& r, const Vec& us, const Vec& up,
                         const Vec& d) {
  require(int(r.size()) == sys.n_r, sys.id + ": state dimension mismatch");
  require(int(us.size()) == sys.n_tracker(), sys.id + ": tracker input dimension mismatch");
  require(int(up.size()) == sys.n_planner(), sys.id + ": planner input dimension mismatch");
  require(int(d.size()) == sys.n_dist(), sys.id + ": disturbance dimension mismatch");
}

inline Vec rel_deriv(const RelSys& sys, const Vec& r, const Vec& us, const Vec& up,
                     const Vec& d) {
  check_inputs(sys, r, us, up, d);
  Vec out(std::size_t(sys.n_r), 0.0), col(std::size_t(sys.n_r));
  sys.drift(r.data(), out.data());
  auto add = [&](const FieldFn& f, double u) {
    f(r.data(), col.data());
    for (int i = 0; i < sys.n_r; ++i) out[std::size_t(i)] += u * col[std::size_t(i)];
  };
  for (int i = 0; i < sys.n_tracker(); ++i) add(sys.tracker_cols[std::size_t(i)], us[std::size_t(i)]);
  for (int j = 0; j < sys.n_planner(); ++j) add(sys.planner_cols[std::size_t(j)], up[std::size_t(j)]);
  for (int k = 0; k < sys.n_dist(); ++k) add(sys.dist_cols[std::size_t(k)], d[std::size_t(k)]);
  return out;
}

// classic RK4 with zero-order-hold inputs; periodic dims wrapped at the end
inline Vec rk4_step(const RelSys& sys, const Vec& r, const Vec& us, const Vec& up,
                    const Vec& d, double dt) {
  require(dt > 0.0, sys.id + ": nonpositive step");
  auto f = [&](const Vec& x) { return rel_deriv(sys, x, us, up, d); };
  Vec k1 = f(r);
  Vec x2(r);
  for (int i = 0; i < sys.n_r; ++i) x2[std::size_t(i)] = r[std::size_t(i)] + 0.5 * dt * k1[std::size_t(i)];
  Vec k2 = f(x2);
  Vec x3(r);
  for (int i = 0; i < sys.n_r; ++i) x3[std::size_t(i)] = r[std::size_t(i)] + 0.5 * dt * k2[std::size_t(i)];
  Vec k3 = f(x3);
  Vec x4(r);
  for (int i = 0; i < sys.n_r; ++i) x4[std::size_t(i)] = r[std::size_t(i)] + dt * k3[std::size_t(i)];
  Vec k4 = f(x4);
  Vec out(r);
  for (int i = 0; i < sys.n_r; ++i)
    out[std::size_t(i)] += dt / 6.0 *
        (k1[std::size_t(i)] + 2.0 * k2[std::size_t(i)] + 2.0 * k3[std::size_t(i)] + k4[std::size_t(i)]);
  for (int pd : sys.periodic_dims) out[std::size_t(pd)] = wrap_angle(out[std::size_t(pd)]);
  return out;
}

// extremes of c*u over u in [lo, hi]; ties (c == 0) take the lower bound
inline double optval_min(double c, double lo, double hi) { return c < 0.0 ? c * hi : c * lo; }
inline double optval_max(double c, double lo, double hi) { return c > 0.0 ? c * hi : c * lo; }
inline double optarg_min(double c, double lo, double hi) { return c < 0.0 ? hi : lo; }
inline double optarg_max(double c, double lo, double hi) { return c > 0.0 ? hi : lo; }

inline double tracker_lo(const RelSys& sys, int i) { return sys.tracker_bounds.lo[std::size_t(i)]; }
inline double tracker_hi(const RelSys& sys, int i) { return sys.tracker_bounds.hi[std::size_t(i)]; }

// game Hamiltonian: min over tracker, max over planner and disturbance of p . rdot
inline double hamiltonian(const RelSys& sys, const Vec& r, const Vec& p, const Vec& beta) {
  require(int(r.size()) == sys.n_r && int(p.size()) == sys.n_r,
          sys.id + ": hamiltonian dimension mismatch");
  BoxBounds pb = sys.planner_bounds(beta);
  Vec col(std::size_t(sys.n_r));
  auto dotcol = [&](const FieldFn& f) {
    f(r.data(), col.data());
    double s = 0;
    for (int i = 0; i < sys.n_r; ++i) s += p[std::size_t(i)] * col[std::size_t(i)];
    return s;
  };
  sys.drift(r.data(), col.data());
  double h = 0;
  for (int i = 0; i < sys.n_r; ++i) h += p[std::size_t(i)] * col[std::size_t(i)];
  for (int i = 0; i < sys.n_tracker(); ++i)
    h += optval_min(dotcol(sys.tracker_cols[std::size_t(i)]), tracker_lo(sys, i), tracker_hi(sys, i));
  for (int j = 0; j < sys.n_planner(); ++j)
    h += optval_max(dotcol(sys.planner_cols[std::size_t(j)]), pb.lo[std::size_t(j)], pb.hi[std::size_t(j)]);
  for (int k = 0; k < sys.n_dist(); ++k)
    h += optval_max(dotcol(sys.dist_cols[std::size_t(k)]), sys.dist_bounds.lo[std::size_t(k)],
                    sys.dist_bounds.hi[std::size_t(k)]);
  return h;
}

// minimizing tracker input given the local value gradient
inline Vec optimal_tracker_control(const RelSys& sys, const Vec& r, const Vec& grad) {
  require(int(grad.size()) == sys.n_r, sys.id + ": gradient dimension mismatch");
  Vec out(std::size_t(sys.n_tracker())), col(std::size_t(sys.n_r));
  for (int i = 0; i < sys.n_tracker(); ++i) {
    sys.tracker_cols[std::size_t(i)](r.data(), col.data());
    double c = 0;
    for (int k = 0; k < sys.n_r; ++k) c += grad[std::size_t(k)] * col[std::size_t(k)];
    out[std::size_t(i)] = optarg_min(c, tracker_lo(sys, i), tracker_hi(sys, i));
  }
  return out;
}

// maximizing planner input at authority beta
inline Vec adversarial_planner_control(const RelSys& sys, const Vec& r, const Vec& grad,
                                       const Vec& beta) {
  require(int(grad.size()) == sys.n_r, sys.id + ": gradient dimension mismatch");
  BoxBounds pb = sys.planner_bounds(beta);
  Vec out(std::size_t(sys.n_planner())), col(std::size_t(sys.n_r));
  for (int j = 0; j < sys.n_planner(); ++j) {
    sys.planner_cols[std::size_t(j)](r.data(), col.data());
    double c = 0;
    for (int k = 0; k < sys.n_r; ++k) c += grad[std::size_t(k)] * col[std::size_t(k)];
    out[std::size_t(j)] = optarg_max(c, pb.lo[std::size_t(j)], pb.hi[std::size_t(j)]);
  }
  return out;
}

// maximizing disturbance
inline Vec adversarial_disturbance(const RelSys& sys, const Vec& r, const Vec& grad) {
  require(int(grad.size()) == sys.n_r, sys.id + ": gradient dimension mismatch");
  Vec out(std::size_t(sys.n_dist())), col(std::size_t(sys.n_r));
  for (int k = 0; k < sys.n_dist(); ++k) {
    sys.dist_cols[std::size_t(k)](r.data(), col.data());
    double c = 0;
    for (int i = 0; i < sys.n_r; ++i) c += grad[std::size_t(i)] * col[std::size_t(i)];
    out[std::size_t(k)] = optarg_max(c, sys.dist_bounds.lo[std::size_t(k)],
                                     sys.dist_bounds.hi[std::size_t(k)]);
  }
  return out;
}

// tracker position = planner-space projection of the full state
inline Vec tracker_position(const RelSys& sys, const Vec& s) {
  Vec e(sys.error_dims.size());
  for (std::size_t i = 0; i < sys.error_dims.size(); ++i) e[i] = s[std::size_t(sys.error_dims[i])];
  return e;
}

// relative state r = s - Q p
inline Vec relative_state(const RelSys& sys, const Vec& s, const Vec& p) {
  require(int(s.size()) == sys.n_r, sys.id + ": tracker state dimension mismatch");
  require(p.size() == sys.Q_cols.size(), sys.id + ": planner state dimension mismatch");
  Vec r(s);
  for (std::size_t j = 0; j < p.size(); ++j)
    for (int i = 0; i < sys.n_r; ++i) r[std::size_t(i)] -= sys.Q_cols[j][std::size_t(i)] * p[j];
  return r;
}

// tracker state embedding s = r + Q p
inline Vec embed_state(const RelSys& sys, const Vec& r, const Vec& p) {
  require(int(r.size()) == sys.n_r, sys.id + ": relative state dimension mismatch");
  require(p.size() == sys.Q_cols.size(), sys.id + ": planner state dimension mismatch");
  Vec s(r);
  for (std::size_t j = 0; j < p.size(); ++j)
    for (int i = 0; i < sys.n_r; ++i) s[std::size_t(i)] += sys.Q_cols[j][std::size_t(i)] * p[j];
  return s;
}

// ---- builtin systems ----------------------------------------------------------

// 1D double integrator chasing a velocity-bounded point:
//   r1' = r2 - up, r2' = us - d        cost |r1|
inline RelSys double_integrator_rel(double u_max = 1.0, double d_max = 0.0,
                                    double beta_lo = 0.25, double beta_hi = 0.5) {
  RelSys s;
  s.id = "double_integrator";
  s.n_r = 2;
  s.drift = [](const double* r, double* o) {
    o[0] = r[1];
    o[1] = 0.0;
  };
  s.tracker_cols = {[](const double*, double* o) { o[0] = 0.0; o[1] = 1.0; }};
  s.tracker_bounds = {{-u_max}, {u_max}};
  s.planner_cols = {[](const double*, double* o) { o[0] = -1.0; o[1] = 0.0; }};
  s.dist_cols = {[](const double*, double* o) { o[0] = 0.0; o[1] = -1.0; }};
  s.dist_bounds = {{-d_max}, {d_max}};
  s.beta_lo = {beta_lo};
  s.beta_hi = {beta_hi};
  s.error_dims = {0};
  s.Q_cols = {{1.0, 0.0}};
  s.validate();
  return s;
}

// planar kinematic car chasing a velocity-bounded point (positions world-frame):
//   r1' = r4 sin r3 - upx, r2' = r4 cos r3 - upy, r3' = w, r4' = a
inline RelSys dubins_rel(double omega_max = 5.0, double accel_max = 1.0,
                         double beta_lo = 0.5, double beta_hi = 1.25) {
  RelSys s;
  s.id = "dubins";
  s.n_r = 4;
  s.drift = [](const double* r, double* o) {
    o[0] = r[3] * std::sin(r[2]);
    o[1] = r[3] * std::cos(r[2]);
    o[2] = 0.0;
    o[3] = 0.0;
  };
  s.tracker_cols = {
      [](const double*, double* o) { o[0] = o[1] = o[3] = 0.0; o[2] = 1.0; },
      [](const double*, double* o) { o[0] = o[1] = o[2] = 0.0; o[3] = 1.0; }};
  s.tracker_bounds = {{-omega_max, -accel_max}, {omega_max, accel_max}};
  s.planner_cols = {
      [](const double*, double* o) { o[0] = -1.0; o[1] = o[2] = o[3] = 0.0; },
      [](const double*, double* o) { o[1] = -1.0; o[0] = o[2] = o[3] = 0.0; }};
  s.beta_lo = {beta_lo, beta_lo};
  s.beta_hi = {beta_hi, beta_hi};
  s.periodic_dims = {2};
  s.error_dims = {0, 1};
  s.Q_cols = {{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}};
  s.validate();
  return s;
}

// near-hover quadrotor (10 relative states) chasing a 3D velocity-bounded point.
// per-axis attitude loops with fixed inner-loop gains; thrust axis decoupled.
inline RelSys quad13_rel(double beta_lo = 0.5, double beta_hi = 1.5) {
  constexpr double g = 9.81, n0 = 10.0, d1 = 8.0, d0 = 10.0, kT = 0.91;
  RelSys s;
  s.id = "quad13";
  s.n_r = 10;
  s.drift = [](const double* r, double* o) {
    o[0] = r[1];
    o[1] = g * std::tan(r[2]);
    o[2] = -d1 * r[2] + r[3];
    o[3] = -d0 * r[2];
    o[4] = r[5];
    o[5] = g * std::tan(r[6]);
    o[6] = -d1 * r[6] + r[7];
    o[7] = -d0 * r[6];
    o[8] = r[9];
    o[9] = -g;
  };
  auto unit_col = [](int k, double scale) {
    return FieldFn([k, scale](const double*, double* o) {
      for (int i = 0; i < 10; ++i) o[i] = 0.0;
      o[k] = scale;
    });
  };
  s.tracker_cols = {unit_col(3, n0), unit_col(7, n0), unit_col(9, kT)};
  s.tracker_bounds = {{-kPi / 9.0, -kPi / 9.0, 0.0}, {kPi / 9.0, kPi / 9.0, 1.5 * g}};
  s.planner_cols = {unit_col(0, -1.0), unit_col(4, -1.0), unit_col(8, -1.0)};
  s.beta_lo = {beta_lo, beta_lo, beta_lo};
  s.beta_hi = {beta_hi, beta_hi, beta_hi};
  s.error_dims = {0, 4, 8};
  Vec q1(10, 0.0), q2(10, 0.0), q3(10, 0.0);
  q1[0] = 1.0;
  q2[4] = 1.0;
  q3[8] = 1.0;
  s.Q_cols = {q1, q2, q3};
  s.validate();
  return s;
}

inline RelSys builtin_system(const std::string& name) {
  if (name == "double_integrator") return double_integrator_rel();
  if (name == "dubins") return dubins_rel();
  if (name == "quad13") return quad13_rel();
  throw config_error("unknown system: " + name);
}

}  // namespace reachtrack

#endif
