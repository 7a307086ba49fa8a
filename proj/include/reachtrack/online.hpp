#ifndef REACHTRACK_ONLINE_HPP
#define REACHTRACK_ONLINE_HPP

// the online loop: sense, pick the largest planner authority whose error bound
// fits the observed clearance, replan on new information, advance the planner,
// and drive the tracker with the value-gradient feedback law. the invariant
// maintained (and logged) each step is V(r; beta_applied) <= level(beta) + kappa,
// i.e. the relative state stays inside the certified bound up to interpolation slack.

#include <fstream>

#include "reachtrack/dynamics.hpp"
#include "reachtrack/environment.hpp"
#include "reachtrack/planning.hpp"
#include "reachtrack/teb.hpp"

namespace reachtrack {

struct QueryResult {
  double beta = 0.0;
  Teb K;
};

// largest table entry whose bound radius still fits inside half the observed
// clearance; clamps to the lowest entry when even the static bound does not fit,
// and to the highest when nothing is sensed (d_obs = +inf).
inline QueryResult query_planner_control(const TebTable& table, double d_obs) {
  table.validate();
  require(d_obs >= 0.0, "query: negative clearance");
  double half = 0.5 * d_obs;
  const auto& es = table.entries;
  if (es.front().radius >= half) return {es.front().beta, es.front()};
  std::size_t last_fit = 0;
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (es[i].radius < half) last_fit = i;
    else break;
  }
  return {es[last_fit].beta, es[last_fit]};
}

enum StepEvent : unsigned {
  kEvSensed = 1u,
  kEvReplanned = 2u,
  kEvReset = 4u,
  kEvStall = 8u,
  kEvInvariant = 16u,
  kEvClearance = 32u,
  kEvGoal = 64u,
  kEvCollided = 128u,
};

inline std::string event_names(unsigned ev) {
  if (ev == 0) return "-";
  std::string s;
  auto add = [&](unsigned bit, const char* name) {
    if (ev & bit) {
      if (!s.empty()) s += ',';
      s += name;
    }
  };
  add(kEvSensed, "sensed");
  add(kEvReplanned, "replanned");
  add(kEvReset, "reset");
  add(kEvStall, "stall");
  add(kEvInvariant, "invariant");
  add(kEvClearance, "clearance");
  add(kEvGoal, "goal");
  add(kEvCollided, "collided");
  return s;
}

struct StepRecord {
  double t = 0.0;
  Vec s;      // tracker state after the step
  Vec p;      // committed planner position
  double beta = 0.0;
  double d_obs = 0.0;
  double value = 0.0;  // V(r; beta) after the step
  unsigned events = 0;
};

enum class RunOutcome { reached, collided, timeout, stalled };

inline const char* outcome_name(RunOutcome o) {
  switch (o) {
    case RunOutcome::reached: return "reached";
    case RunOutcome::collided: return "collided";
    case RunOutcome::timeout: return "timeout";
    case RunOutcome::stalled: return "stalled";
  }
  return "?";
}

struct AdjustResult {
  Vec p;
  bool replan = false;
  bool reset = false;
  bool stalled = false;
};

// planner-state adjustment on an authority drop: keep the tracker's nearest
// path point if the relative state is already inside the new bound, otherwise
// resample the planner inside the bound and outside the augmented obstacles.
// on no drop, advance along the path at the granted rate.
inline AdjustResult adjust_planner_control(const RelSys& sys, const ValueSource& src,
                                           const Teb& K, double beta_query, double beta_old,
                                           RawPath& path, const Vec& p_cur, const Vec& s,
                                           const std::function<bool(const Vec&)>& aug,
                                           const Vec& world_lo, const Vec& world_hi,
                                           double dt, std::mt19937_64& rng,
                                           int attempts = 500) {
  AdjustResult out;
  if (beta_query < beta_old - 1e-12) {
    Vec e_s = tracker_position(sys, s);
    std::size_t idx = nearest_path_index(path, e_s);
    const Vec p_star = path.pts[idx];
    Vec r_star = relative_state(sys, s, p_star);
    if (membership(src, r_star, beta_query, K.level)) {
      consume_through(path, idx);
      out.p = p_star;
      out.replan = false;
      return out;
    }
    for (int a = 0; a < attempts; ++a) {
      double ang = uniform(rng, 0.0, 2.0 * kPi);
      double rad = K.radius * std::sqrt(uniform01(rng));
      Vec p = {e_s[0] - rad * std::cos(ang), e_s[1] - rad * std::sin(ang)};
      if (p[0] < world_lo[0] || p[0] > world_hi[0] || p[1] < world_lo[1] || p[1] > world_hi[1])
        continue;
      if (aug(p)) continue;
      Vec rp = relative_state(sys, s, p);
      if (!membership(src, rp, beta_query, K.level)) continue;
      out.p = p;
      out.replan = true;
      out.reset = true;
      return out;
    }
    out.p = p_cur;  // hold position; the caller drops to the lowest authority
    out.replan = true;
    out.stalled = true;
    return out;
  }
  out.p = step_along(path, p_cur, beta_query, dt);
  out.replan = false;
  return out;
}

// when the relative state drifts outside the solved domain box, clamped
// interpolation stops reflecting the true state and the gradient feedback law
// can latch a runaway (e.g. a speed coordinate sailing past the box edge under
// full throttle while the clamped gradient keeps approving). steer every
// out-of-range coordinate back toward the box at its fastest rate; inputs with
// no influence on those coordinates keep following the value gradient.
inline Vec boxed_tracker_control(const RelSys& sys, const Vec& r, const Vec& grad,
                                 const Vec& lo, const Vec& hi) {
  Vec out(std::size_t(sys.n_tracker())), col(std::size_t(sys.n_r));
  for (int i = 0; i < sys.n_tracker(); ++i) {
    sys.tracker_cols[std::size_t(i)](r.data(), col.data());
    double c_box = 0.0, c_val = 0.0;
    for (int k = 0; k < sys.n_r; ++k) {
      if (r[std::size_t(k)] > hi[std::size_t(k)]) c_box += col[std::size_t(k)];
      else if (r[std::size_t(k)] < lo[std::size_t(k)]) c_box -= col[std::size_t(k)];
      else c_val += grad[std::size_t(k)] * col[std::size_t(k)];
    }
    double c = std::fabs(c_box) > 1e-12 ? c_box : c_val;
    out[std::size_t(i)] = optarg_min(c, tracker_lo(sys, i), tracker_hi(sys, i));
  }
  return out;
}

enum class BetaPolicy { full, fixed_low, two_point };

struct RunConfig {
  double dt = 0.05;
  double max_time = 60.0;
  double goal_tol = -1.0;         // < 0: static bound radius
  double plan_resolution = -1.0;  // < 0: steb_radius / 2
  double plan_margin = -1.0;      // < 0: resolution * sqrt(2)/2
  double kappa = -1.0;            // < 0: source interpolation slack
  int reset_attempts = 500;
  int stall_limit = 100;
  std::uint64_t seed = 1;
  BetaPolicy policy = BetaPolicy::full;
};

struct RunResult {
  RunOutcome outcome = RunOutcome::timeout;
  double time = 0.0;
  int steps = 0;
  int invariant_violations = 0;
  int clearance_violations = 0;
  int resets = 0;
  int stalls = 0;
  int replans = 0;
  double min_d_obs = std::numeric_limits<double>::infinity();
  std::vector<StepRecord> log;
};

inline RunResult run_online(const RelSys& sys, const ValueSource& src, const TebTable& table,
                            const ObstacleMap& map, const RunConfig& cfg) {
  table.validate();
  map.validate();
  require(sys.error_dims.size() == 2, sys.id + ": online loop needs a 2D planner space");
  const Teb& steb = table.steb();
  double res = cfg.plan_resolution > 0 ? cfg.plan_resolution : 0.5 * steb.radius;
  require(res <= 0.5 * steb.radius + 1e-12, "run: plan resolution coarser than half the bound");
  double margin = cfg.plan_margin >= 0 ? cfg.plan_margin : res * std::sqrt(2.0) / 2.0;
  double goal_tol = cfg.goal_tol > 0 ? cfg.goal_tol : steb.radius;
  double sensing_radius = 2.0 * table.entries.back().radius;

  std::mt19937_64 rng(derive_seed(cfg.seed, 0x6f6e6c696e65ull));
  TebTable two_point;
  two_point.delta_beta = table.entries.back().beta - table.entries.front().beta;
  two_point.epsilon = table.epsilon;
  two_point.entries = {table.entries.front(), table.entries.back()};

  RunResult out;
  Vec dom_lo, dom_hi;
  src.extents(dom_lo, dom_hi);
  Vec dom_margin = src.domain_margin();
  Vec p = map.start;
  Vec r0 = src.min_state(table.entries.front().beta, cfg.seed);
  Vec s = embed_state(sys, r0, p);
  SensedSet sensed = make_sensed(map, sensing_radius);
  RawPath path;
  bool have_path = false;
  bool replan_flag = true;
  bool force_low = false;
  double beta_query = table.entries.back().beta;
  double t = 0.0;
  int consecutive_stalls = 0;

  int max_steps = int(std::ceil(cfg.max_time / cfg.dt - 1e-9));
  for (int step = 0; step < max_steps; ++step) {
    unsigned events = 0;
    Vec e_s = tracker_position(sys, s);
    if (sense(map, sensed, e_s)) {
      events |= kEvSensed;
      replan_flag = true;
    }
    double d_obs = min_obstacle_distance(map, sensed, e_s);
    out.min_d_obs = std::min(out.min_d_obs, d_obs);

    double beta_old = beta_query;
    QueryResult q;
    if (force_low) {
      q = {table.entries.front().beta, table.entries.front()};
      force_low = false;
    } else {
      switch (cfg.policy) {
        case BetaPolicy::full: q = query_planner_control(table, d_obs); break;
        case BetaPolicy::fixed_low: q = {table.entries.front().beta, table.entries.front()}; break;
        case BetaPolicy::two_point:
          q = replan_flag ? query_planner_control(two_point, d_obs)
                          : QueryResult{beta_old, table.at_beta(beta_old)};
          break;
      }
    }
    beta_query = q.beta;
    const Teb& K = q.K;

    auto aug_exact = augment(map, sensed, steb.radius);
    if (replan_flag) {
      auto aug_plan = augment(map, sensed, steb.radius + margin);
      try {
        PlanGrid pgrid = make_plan_grid(map.world_lo, map.world_hi, res, aug_plan);
        path = plan(pgrid, p, map.goal);
        have_path = true;
        replan_flag = false;
        events |= kEvReplanned;
        ++out.replans;
      } catch (const contract_error&) {
        replan_flag = true;  // keep the previous path and retry next iteration
      }
    }

    if (!have_path) {
      // nowhere to go yet: hold, drop to the lowest authority, count as a stall
      events |= kEvStall;
      ++out.stalls;
      ++consecutive_stalls;
      force_low = true;
    } else {
      AdjustResult adj = adjust_planner_control(sys, src, K, beta_query, beta_old, path, p, s,
                                                augment(map, sensed, steb.radius + margin),
                                                map.world_lo, map.world_hi, cfg.dt, rng,
                                                cfg.reset_attempts);
      p = adj.p;
      if (adj.reset) {
        events |= kEvReset;
        ++out.resets;
        replan_flag = true;
      }
      if (adj.stalled) {
        events |= kEvStall;
        ++out.stalls;
        ++consecutive_stalls;
        force_low = true;
        replan_flag = true;
      } else {
        consecutive_stalls = 0;
      }
    }
    if (consecutive_stalls > cfg.stall_limit) {
      out.outcome = RunOutcome::stalled;
      out.time = t;
      break;
    }

    // tracker step against the committed planner position
    Vec r = relative_state(sys, s, p);
    Vec grad = src.gradient(r, beta_query);
    bool outside = false;
    for (int d = 0; d < sys.n_r; ++d)
      outside = outside || r[std::size_t(d)] < dom_lo[std::size_t(d)] ||
                r[std::size_t(d)] > dom_hi[std::size_t(d)];
    Vec u_s = outside ? boxed_tracker_control(sys, r, grad, dom_lo, dom_hi)
                      : optimal_tracker_control(sys, r, grad);
    Vec r_next = rk4_step(sys, r, u_s, Vec(std::size_t(sys.n_planner()), 0.0),
                          Vec(std::size_t(sys.n_dist()), 0.0), cfg.dt);
    s = embed_state(sys, r_next, p);
    t += cfg.dt;

    double V = src.value(r_next, beta_query);
    double kappa = cfg.kappa >= 0 ? cfg.kappa : src.interp_slack(beta_query);
    bool escaped = false;  // left the domain beyond discretization-scale slack
    for (int d = 0; d < sys.n_r; ++d)
      escaped = escaped ||
                r_next[std::size_t(d)] < dom_lo[std::size_t(d)] - dom_margin[std::size_t(d)] ||
                r_next[std::size_t(d)] > dom_hi[std::size_t(d)] + dom_margin[std::size_t(d)];
    if (V > K.level + kappa || escaped) {
      events |= kEvInvariant;
      ++out.invariant_violations;
    }
    if (aug_exact(p)) {
      events |= kEvClearance;
      ++out.clearance_violations;
    }

    Vec e_after = tracker_position(sys, s);
    bool hit = collision(map, e_after);
    // arrival: the tracker itself inside the goal tolerance, or the committed
    // planner point there — the tracker is then certified to sit within the
    // applied error bound of it, which is how the loop's guarantee is stated
    bool at_goal = !hit && (dist2(e_after, map.goal) <= goal_tol ||
                            dist2(p, map.goal) <= goal_tol);
    if (hit) events |= kEvCollided;
    if (at_goal) events |= kEvGoal;

    StepRecord rec;
    rec.t = t;
    rec.s = s;
    rec.p = p;
    rec.beta = beta_query;
    rec.d_obs = d_obs;
    rec.value = V;
    rec.events = events;
    out.log.push_back(rec);
    ++out.steps;

    if (hit) {
      out.outcome = RunOutcome::collided;
      out.time = t;
      break;
    }
    if (at_goal) {
      out.outcome = RunOutcome::reached;
      out.time = t;
      break;
    }
    out.outcome = RunOutcome::timeout;
    out.time = t;
  }
  return out;
}

// ---- trajectory log: delimited text ------------------------------------------

inline void save_trajectory(const std::string& path, const RunResult& run,
                            const std::string& system_id, std::uint64_t seed) {
  std::ofstream os(path);
  require(bool(os), "cannot open for writing: " + path);
  os << "# reachtrack-trajectory v1 system=" << system_id << " seed=" << seed
     << " outcome=" << outcome_name(run.outcome) << " time=" << fmt_g17(run.time) << "\n";
  int ns = run.log.empty() ? 0 : int(run.log.front().s.size());
  os << "t";
  for (int i = 0; i < ns; ++i) os << "\ts" << i;
  os << "\tp0\tp1\tbeta\td_obs\tvalue\tevents\n";
  for (const auto& r : run.log) {
    os << fmt_g17(r.t);
    for (double v : r.s) os << '\t' << fmt_g17(v);
    os << '\t' << fmt_g17(r.p[0]) << '\t' << fmt_g17(r.p[1]);
    os << '\t' << fmt_g17(r.beta) << '\t' << fmt_g17(r.d_obs) << '\t' << fmt_g17(r.value);
    os << '\t' << event_names(r.events) << "\n";
  }
  require(bool(os), "write failed: " + path);
}

}  // namespace reachtrack

#endif
