#ifndef REACHTRACK_MPPI_HPP
#define REACHTRACK_MPPI_HPP

// sampling-based path-following baseline: model-predictive path integral control
// on the tracker model (relative dynamics with the planner input and disturbance
// held at zero). it follows a shortest grid path computed on the RAW sensed
// obstacles -- no error-bound augmentation -- so collisions are possible by
// design; it exists as a contrast baseline, not a safety method.

#include "reachtrack/dynamics.hpp"
#include "reachtrack/environment.hpp"
#include "reachtrack/online.hpp"
#include "reachtrack/planning.hpp"

namespace reachtrack {

struct MppiConfig {
  int samples = 256;
  int horizon_steps = 20;
  double horizon_dt = 0.05;  // 20 x 0.05 = 1 s receding horizon
  double temperature = 1.0;
  double noise_frac = 0.3;  // input noise sigma as a fraction of half the bound width
  double lookahead = 0.5;   // target point this far ahead along the path
  double collision_penalty = 1000.0;  // per rollout step inside a sensed obstacle
  double dt = 0.05;
  double max_time = 60.0;
  double goal_tol = 0.15;
  double sensing_radius = 2.0;
  double plan_resolution = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    require(samples > 0 && horizon_steps > 0, "mppi: empty rollout set");
    require(horizon_dt > 0 && dt > 0 && max_time > 0, "mppi: nonpositive timing");
    require(temperature > 0, "mppi: nonpositive temperature");
    require(noise_frac > 0, "mppi: nonpositive noise");
    require(goal_tol > 0 && sensing_radius > 0 && plan_resolution > 0, "mppi: bad geometry");
  }
};

namespace detail {

// point on the unconsumed path roughly `ahead` arc length past the nearest vertex
inline Vec mppi_target(const RawPath& path, const Vec& e, double ahead) {
  std::size_t idx = nearest_path_index(path, e);
  double walked = 0.0;
  while (idx + 1 < path.pts.size() && walked < ahead) {
    walked += dist2(path.pts[idx], path.pts[idx + 1]);
    ++idx;
  }
  return path.pts[idx];
}

}  // namespace detail

inline RunResult run_mppi(const RelSys& sys, const ObstacleMap& map, const MppiConfig& cfg) {
  cfg.validate();
  map.validate();
  require(sys.error_dims.size() == 2, sys.id + ": mppi needs a 2D planner space");
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x6d707069ull));

  const int n_u = sys.n_tracker();
  Vec sigma(std::size_t(n_u), 0.0);
  for (int j = 0; j < n_u; ++j)
    sigma[std::size_t(j)] =
        cfg.noise_frac * 0.5 * (tracker_hi(sys, j) - tracker_lo(sys, j));

  RunResult out;
  Vec s(std::size_t(sys.n_r), 0.0);  // tracker starts at rest at the map start
  {
    Vec e0 = tracker_position(sys, s);
    for (std::size_t k = 0; k < sys.error_dims.size(); ++k)
      s[std::size_t(sys.error_dims[k])] += map.start[k] - e0[k];
  }
  SensedSet sensed = make_sensed(map, cfg.sensing_radius);
  RawPath path;
  bool have_path = false;
  bool replan = true;

  // nominal control sequence, receding horizon
  std::vector<Vec> U(std::size_t(cfg.horizon_steps), Vec(std::size_t(n_u), 0.0));
  std::vector<Vec> cand(std::size_t(cfg.horizon_steps), Vec(std::size_t(n_u), 0.0));
  std::vector<std::vector<Vec>> all_cands(
      std::size_t(cfg.samples),
      std::vector<Vec>(std::size_t(cfg.horizon_steps), Vec(std::size_t(n_u), 0.0)));
  Vec costs(std::size_t(cfg.samples), 0.0);
  Vec up0(std::size_t(sys.n_planner()), 0.0), d0(std::size_t(sys.n_dist()), 0.0);

  double t = 0.0;
  int max_steps = int(std::ceil(cfg.max_time / cfg.dt - 1e-9));
  for (int step = 0; step < max_steps; ++step) {
    unsigned events = 0;
    Vec e = tracker_position(sys, s);
    if (sense(map, sensed, e)) {
      events |= kEvSensed;
      replan = true;
    }
    double d_obs = min_obstacle_distance(map, sensed, e);
    out.min_d_obs = std::min(out.min_d_obs, d_obs);

    if (replan) {
      // raw sensed obstacles, zero dilation: the baseline plans straight through
      // the clearance an error-bound method would have reserved
      auto occupied = augment(map, sensed, 0.0);
      try {
        PlanGrid pg = make_plan_grid(map.world_lo, map.world_hi, cfg.plan_resolution, occupied);
        path = plan(pg, e, map.goal);
        have_path = true;
        replan = false;
        events |= kEvReplanned;
        ++out.replans;
      } catch (const contract_error&) {
        replan = true;  // keep the previous path if any
      }
    }
    Vec target = have_path ? detail::mppi_target(path, e, cfg.lookahead) : map.goal;

    // sample perturbed control sequences around the nominal, roll out, score
    for (int k = 0; k < cfg.samples; ++k) {
      auto& ck = all_cands[std::size_t(k)];
      for (int h = 0; h < cfg.horizon_steps; ++h) {
        for (int j = 0; j < n_u; ++j) {
          double u = U[std::size_t(h)][std::size_t(j)] + sigma[std::size_t(j)] * gauss(rng);
          ck[std::size_t(h)][std::size_t(j)] =
              std::min(tracker_hi(sys, j), std::max(tracker_lo(sys, j), u));
        }
      }
      Vec x = s;
      double cost = 0.0;
      for (int h = 0; h < cfg.horizon_steps; ++h) {
        x = rk4_step(sys, x, ck[std::size_t(h)], up0, d0, cfg.horizon_dt);
        Vec ex = tracker_position(sys, x);
        double dx = ex[0] - target[0], dy = ex[1] - target[1];
        cost += dx * dx + dy * dy;
        if (min_obstacle_distance(map, sensed, ex) <= 0.0) cost += cfg.collision_penalty;
      }
      Vec ex = tracker_position(sys, x);
      double dx = ex[0] - target[0], dy = ex[1] - target[1];
      cost += 5.0 * (dx * dx + dy * dy);
      costs[std::size_t(k)] = cost;
    }
    double cmin = costs[0];
    for (double c : costs) cmin = std::min(cmin, c);
    double wsum = 0.0;
    for (int h = 0; h < cfg.horizon_steps; ++h)
      for (int j = 0; j < n_u; ++j) cand[std::size_t(h)][std::size_t(j)] = 0.0;
    for (int k = 0; k < cfg.samples; ++k) {
      double w = std::exp(-(costs[std::size_t(k)] - cmin) / cfg.temperature);
      wsum += w;
      const auto& ck = all_cands[std::size_t(k)];
      for (int h = 0; h < cfg.horizon_steps; ++h)
        for (int j = 0; j < n_u; ++j)
          cand[std::size_t(h)][std::size_t(j)] += w * ck[std::size_t(h)][std::size_t(j)];
    }
    for (int h = 0; h < cfg.horizon_steps; ++h)
      for (int j = 0; j < n_u; ++j) U[std::size_t(h)][std::size_t(j)] =
          cand[std::size_t(h)][std::size_t(j)] / wsum;

    s = rk4_step(sys, s, U[0], up0, d0, cfg.dt);
    t += cfg.dt;
    for (int h = 0; h + 1 < cfg.horizon_steps; ++h) U[std::size_t(h)] = U[std::size_t(h) + 1];

    Vec e_after = tracker_position(sys, s);
    bool hit = collision(map, e_after);
    bool at_goal = !hit && dist2(e_after, map.goal) <= cfg.goal_tol;
    if (hit) events |= kEvCollided;
    if (at_goal) events |= kEvGoal;

    StepRecord rec;
    rec.t = t;
    rec.s = s;
    rec.p = target;
    rec.beta = 0.0;  // no planner-authority parameter in this baseline
    rec.d_obs = d_obs;
    rec.value = 0.0;
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

}  // namespace reachtrack

#endif
