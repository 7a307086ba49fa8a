// the online loop: authority queries against the bound table, planner-state
// adjustment on authority drops, the boxed tracker feedback, full closed-loop
// runs, and the trajectory log format.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "reachtrack/online.hpp"

using namespace reachtrack;

namespace {

// ---- oracles -------------------------------------------------------------------
// reference for the authority query: scan every entry, keep the largest index
// whose radius is strictly below half the clearance, fall back to the lowest.
QueryResult query_reference(const TebTable& t, double d_obs) {
  double half = 0.5 * d_obs;
  std::size_t pick = 0;
  bool any = false;
  for (std::size_t i = 0; i < t.entries.size(); ++i)
    if (t.entries[i].radius < half) {
      pick = i;
      any = true;
    }
  if (!any) pick = 0;
  return {t.entries[pick].beta, t.entries[pick]};
}

TebTable ladder_table() {
  TebTable t;
  t.delta_beta = 0.25;
  t.epsilon = 0.05;
  t.entries = {{0.5, 0.10, 0.3}, {0.75, 0.12, 0.45}, {1.0, 0.14, 0.6}, {1.25, 0.16, 0.8}};
  return t;
}

// planar point tracker: state is the 2D offset from the planner point
RelSys point2_system() {
  RelSys s;
  s.id = "point2";
  s.n_r = 2;
  s.drift = [](const double*, double* o) { o[0] = o[1] = 0.0; };
  s.tracker_cols = {[](const double*, double* o) { o[0] = 1.0; o[1] = 0.0; },
                    [](const double*, double* o) { o[0] = 0.0; o[1] = 1.0; }};
  s.tracker_bounds = {{-1.0, -1.0}, {1.0, 1.0}};
  s.planner_cols = {[](const double*, double* o) { o[0] = -1.0; o[1] = 0.0; },
                    [](const double*, double* o) { o[0] = 0.0; o[1] = -1.0; }};
  s.beta_lo = {0.1, 0.1};
  s.beta_hi = {1.0, 1.0};
  s.error_dims = {0, 1};
  s.Q_cols = {{1.0, 0.0}, {0.0, 1.0}};
  s.validate();
  return s;
}

// analytic backend for the point tracker: V(r) = |r|
struct NormSource : ValueSource {
  std::string system_id() const override { return "point2"; }
  int state_dims() const override { return 2; }
  std::vector<int> error_dims() const override { return {0, 1}; }
  double beta_min() const override { return 0.1; }
  double beta_max() const override { return 1.0; }
  void extents(Vec& lo, Vec& hi) const override {
    lo = {-2.0, -2.0};
    hi = {2.0, 2.0};
  }
  double value(const Vec& r, double) const override { return norm2(r); }
  Vec gradient(const Vec& r, double) const override {
    double n = std::max(norm2(r), 1e-9);
    return {r[0] / n, r[1] / n};
  }
  double interp_slack(double) const override { return 0.0; }
};

// solved artifacts for closed-loop runs, built once per binary
struct Rig {
  RelSys sys = dubins_rel();
  std::shared_ptr<GridValueSource> src;
  TebTable table;
};

const Rig& rig() {
  static Rig r = [] {
    Rig out;
    GridSpec g = grid_for(out.sys, {-3, -3, -kPi, -2}, {3, 3, kPi, 2}, {15, 15, 13, 7});
    ValueFamily fam = solve_family(out.sys, g, {0.5, 1.25});
    out.src = make_grid_source(out.sys, std::move(fam));
    out.table = build_teb_table(*out.src, 0.75);
    return out;
  }();
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

// ---- authority queries ------------------------------------------------------------

TEST_CASE("the authority query walks the ladder by clearance") {
  TebTable t = ladder_table();
  REQUIRE(query_planner_control(t, 1.0).beta == 0.75);   // fits 0.3 and 0.45, not 0.6
  REQUIRE(query_planner_control(t, 0.4).beta == 0.5);    // nothing fits: clamp low
  REQUIRE(query_planner_control(t, 1.2).beta == 0.75);   // 0.6 == half exactly: excluded
  REQUIRE(query_planner_control(t, 0.0).beta == 0.5);
  double inf = std::numeric_limits<double>::infinity();
  REQUIRE(query_planner_control(t, inf).beta == 1.25);   // nothing sensed: full authority
  QueryResult q = query_planner_control(t, 1.0);
  REQUIRE(q.K.level == 0.12);
  REQUIRE(q.K.radius == 0.45);
  REQUIRE_THROWS_AS(query_planner_control(t, -0.1), contract_error);
}

TEST_CASE("the authority query matches a brute-force scan on random tables") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    TebTable t;
    int n = 1 + int(uniform_index(rng, 8));
    double beta = uniform(rng, 0.1, 0.5);
    double radius = uniform(rng, 0.05, 0.3);
    for (int i = 0; i < n; ++i) {
      t.entries.push_back({beta, 0.1 + 0.01 * i, radius});
      beta += uniform(rng, 0.05, 0.4);
      if (uniform01(rng) < 0.3) radius += 0.0;  // equal-radius runs from the envelope
      else radius += uniform(rng, 0.0, 0.5);
    }
    for (int k = 0; k < 12; ++k) {
      double d;
      switch (k) {
        case 0: d = 0.0; break;
        case 1: d = std::numeric_limits<double>::infinity(); break;
        case 2: d = 2.0 * t.entries[std::size_t(uniform_index(rng, t.entries.size()))].radius; break;
        default: d = uniform(rng, 0.0, 3.0);
      }
      QueryResult got = query_planner_control(t, d);
      QueryResult want = query_reference(t, d);
      REQUIRE(got.beta == want.beta);
      REQUIRE(got.K.level == want.K.level);
      REQUIRE(got.K.radius == want.K.radius);
    }
  }
}

// ---- the boxed feedback law ----------------------------------------------------------

TEST_CASE("out-of-range coordinates are steered back at the fastest rate") {
  RelSys din = double_integrator_rel(1.0, 0.0);
  Vec lo = {-2.0, -2.0}, hi = {2.0, 2.0};
  // the speed coordinate sits above the box: full braking regardless of gradient
  Vec u = boxed_tracker_control(din, {0.0, 3.0}, {9.9, -9.9}, lo, hi);
  REQUIRE(u == Vec{-1.0});
  Vec u2 = boxed_tracker_control(din, {0.0, -3.0}, {9.9, 9.9}, lo, hi);
  REQUIRE(u2 == Vec{1.0});
}

TEST_CASE("inputs with no grip on the escaped coordinate keep following the gradient") {
  RelSys dub = dubins_rel();
  Vec lo = {-3, -3, -kPi, -2}, hi = {3, 3, kPi, 2};
  Vec r = {0.0, 0.0, 0.0, 5.0};           // speed beyond the box
  Vec grad = {0.0, 0.0, 1.0, 0.0};        // the value wants a lower heading
  Vec u = boxed_tracker_control(dub, r, grad, lo, hi);
  REQUIRE(u[0] == -5.0);  // turn input: gradient descent as usual
  REQUIRE(u[1] == -1.0);  // acceleration input: brake the runaway coordinate
  Vec r2 = {0.0, 0.0, 0.0, -5.0};
  Vec u3 = boxed_tracker_control(dub, r2, grad, lo, hi);
  REQUIRE(u3[1] == 1.0);
}

// ---- planner adjustment ----------------------------------------------------------------

TEST_CASE("without an authority drop the planner advances along the path") {
  RelSys sys = point2_system();
  NormSource src;
  auto free_pred = [](const Vec&) { return false; };
  PlanGrid g = make_plan_grid({0.0, 0.0}, {1.0, 1.0}, 0.25, free_pred);
  RawPath path = plan(g, {0.0, 0.0}, {1.0, 0.0});
  RawPath twin = path;
  std::mt19937_64 rng(3);
  Teb K{0.5, 0.1, 0.1};
  Vec p_cur = {0.0, 0.0}, s = {0.05, 0.0};
  AdjustResult a = adjust_planner_control(sys, src, K, 0.5, 0.5, path, p_cur, s, free_pred,
                                          {0.0, 0.0}, {1.0, 1.0}, 0.1, rng);
  REQUIRE_FALSE(a.replan);
  REQUIRE_FALSE(a.reset);
  REQUIRE_FALSE(a.stalled);
  REQUIRE(a.p == step_along(twin, p_cur, 0.5, 0.1));
}

TEST_CASE("an authority drop keeps the nearest waypoint when already inside the bound") {
  RelSys sys = point2_system();
  NormSource src;
  auto free_pred = [](const Vec&) { return false; };
  PlanGrid g = make_plan_grid({0.0, 0.0}, {1.0, 1.0}, 0.25, free_pred);
  RawPath path = plan(g, {0.0, 0.0}, {1.0, 0.0});
  std::mt19937_64 rng(3);
  Teb K{0.5, 0.1, 0.1};
  Vec s = {0.52, 0.05};  // 0.054 from the waypoint at x = 0.5
  AdjustResult a = adjust_planner_control(sys, src, K, 0.5, 1.0, path, {0.0, 0.0}, s,
                                          free_pred, {0.0, 0.0}, {1.0, 1.0}, 0.1, rng);
  REQUIRE(a.p == Vec{0.5, 0.0});
  REQUIRE_FALSE(a.replan);
  REQUIRE_FALSE(a.reset);
  REQUIRE(path.cursor == 2);  // waypoints behind the kept one are consumed
}

TEST_CASE("an authority drop outside the bound resamples the planner next to the tracker") {
  RelSys sys = point2_system();
  NormSource src;
  auto free_pred = [](const Vec&) { return false; };
  PlanGrid g = make_plan_grid({0.0, 0.0}, {1.0, 1.0}, 0.25, free_pred);
  RawPath path = plan(g, {0.0, 0.0}, {1.0, 0.0});
  std::mt19937_64 rng(3);
  std::mt19937_64 rng_twin(3);
  Teb K{0.5, 0.1, 0.1};
  Vec s = {0.52, 0.4};  // 0.4 away from the path: outside the new bound
  AdjustResult a = adjust_planner_control(sys, src, K, 0.5, 1.0, path, {0.0, 0.0}, s,
                                          free_pred, {0.0, 0.0}, {1.0, 1.0}, 0.1, rng);
  REQUIRE(a.reset);
  REQUIRE(a.replan);
  REQUIRE_FALSE(a.stalled);
  REQUIRE(dist2(a.p, s) <= K.radius + 1e-12);
  REQUIRE(norm2(Vec{s[0] - a.p[0], s[1] - a.p[1]}) <= K.level + 1e-12);
  RawPath path2 = plan(g, {0.0, 0.0}, {1.0, 0.0});
  AdjustResult b = adjust_planner_control(sys, src, K, 0.5, 1.0, path2, {0.0, 0.0}, s,
                                          free_pred, {0.0, 0.0}, {1.0, 1.0}, 0.1, rng_twin);
  REQUIRE(a.p == b.p);  // resampling is a pure function of the generator state
}

TEST_CASE("a hopeless drop holds position and reports the stall") {
  RelSys sys = point2_system();
  NormSource src;
  auto free_pred = [](const Vec&) { return false; };
  auto blocked = [](const Vec&) { return true; };
  PlanGrid g = make_plan_grid({0.0, 0.0}, {1.0, 1.0}, 0.25, free_pred);
  RawPath path = plan(g, {0.0, 0.0}, {1.0, 0.0});
  std::mt19937_64 rng(3);
  Teb K{0.5, 0.1, 0.1};
  Vec s = {0.52, 0.4};
  Vec p_cur = {0.25, 0.0};
  AdjustResult a = adjust_planner_control(sys, src, K, 0.5, 1.0, path, p_cur, s, blocked,
                                          {0.0, 0.0}, {1.0, 1.0}, 0.1, rng, 25);
  REQUIRE(a.stalled);
  REQUIRE(a.replan);
  REQUIRE(a.p == p_cur);
}

// ---- events and outcomes -----------------------------------------------------------

TEST_CASE("event words join in declaration order") {
  REQUIRE(event_names(0) == "-");
  REQUIRE(event_names(kEvSensed) == "sensed");
  REQUIRE(event_names(kEvSensed | kEvGoal) == "sensed,goal");
  REQUIRE(event_names(kEvReplanned | kEvReset | kEvStall) == "replanned,reset,stall");
  REQUIRE(event_names(kEvInvariant | kEvClearance | kEvCollided) ==
          "invariant,clearance,collided");
  REQUIRE(std::string(outcome_name(RunOutcome::reached)) == "reached");
  REQUIRE(std::string(outcome_name(RunOutcome::collided)) == "collided");
  REQUIRE(std::string(outcome_name(RunOutcome::timeout)) == "timeout");
  REQUIRE(std::string(outcome_name(RunOutcome::stalled)) == "stalled");
}

// ---- closed-loop runs ------------------------------------------------------------------

TEST_CASE("an empty world is crossed cleanly at full authority") {
  const Rig& R = rig();
  MapGenParams mp;
  mp.n_obstacles = 0;
  ObstacleMap map = random_map(1, mp, R.table.steb().radius);
  RunConfig cfg;
  RunResult run = run_online(R.sys, *R.src, R.table, map, cfg);
  REQUIRE(run.outcome == RunOutcome::reached);
  REQUIRE(run.invariant_violations == 0);
  REQUIRE(run.clearance_violations == 0);
  REQUIRE(run.min_d_obs == std::numeric_limits<double>::infinity());
  // nothing sensed, so the query grants the top of the ladder every step
  for (const auto& rec : run.log) REQUIRE(rec.beta == R.table.entries.back().beta);
  REQUIRE(run.steps == int(run.log.size()));
  REQUIRE(run.time == Catch::Approx(cfg.dt * run.steps).margin(1e-9));
}

TEST_CASE("closed-loop runs are a pure function of the configuration") {
  const Rig& R = rig();
  MapGenParams mp;
  mp.n_obstacles = 3;
  ObstacleMap map = random_map(7, mp, R.table.steb().radius);
  RunConfig cfg;
  cfg.seed = 11;
  RunResult a = run_online(R.sys, *R.src, R.table, map, cfg);
  RunResult b = run_online(R.sys, *R.src, R.table, map, cfg);
  REQUIRE(a.outcome == b.outcome);
  REQUIRE(a.steps == b.steps);
  REQUIRE(a.replans == b.replans);
  REQUIRE(a.resets == b.resets);
  REQUIRE(a.stalls == b.stalls);
  save_trajectory("test_traj_a.tsv", a, R.sys.id, cfg.seed);
  save_trajectory("test_traj_b.tsv", b, R.sys.id, cfg.seed);
  std::string ta = slurp("test_traj_a.tsv"), tb = slurp("test_traj_b.tsv");
  std::remove("test_traj_a.tsv");
  std::remove("test_traj_b.tsv");
  REQUIRE_FALSE(ta.empty());
  REQUIRE(ta == tb);
}

TEST_CASE("logged counters agree with the logged events") {
  const Rig& R = rig();
  MapGenParams mp;
  mp.n_obstacles = 3;
  ObstacleMap map = random_map(7, mp, R.table.steb().radius);
  RunConfig cfg;
  RunResult run = run_online(R.sys, *R.src, R.table, map, cfg);
  REQUIRE(run.outcome != RunOutcome::collided);
  int inv = 0, clr = 0, resets = 0, replans = 0;
  double dmin = std::numeric_limits<double>::infinity();
  std::set<double> betas;
  for (const auto& e : R.table.entries) betas.insert(e.beta);
  for (const auto& rec : run.log) {
    if (rec.events & kEvInvariant) ++inv;
    if (rec.events & kEvClearance) ++clr;
    if (rec.events & kEvReset) ++resets;
    if (rec.events & kEvReplanned) ++replans;
    dmin = std::min(dmin, rec.d_obs);
    REQUIRE(betas.count(rec.beta) == 1);  // applied authority is always a ladder entry
  }
  REQUIRE(inv == run.invariant_violations);
  REQUIRE(clr == run.clearance_violations);
  REQUIRE(resets == run.resets);
  REQUIRE(replans == run.replans);
  REQUIRE(dmin == run.min_d_obs);
}

TEST_CASE("the low-authority policy never leaves the bottom rung") {
  const Rig& R = rig();
  MapGenParams mp;
  mp.n_obstacles = 3;
  ObstacleMap map = random_map(7, mp, R.table.steb().radius);
  RunConfig cfg;
  cfg.policy = BetaPolicy::fixed_low;
  RunResult run = run_online(R.sys, *R.src, R.table, map, cfg);
  for (const auto& rec : run.log) REQUIRE(rec.beta == R.table.entries.front().beta);
}

TEST_CASE("the two-point policy only ever uses the ladder ends") {
  const Rig& R = rig();
  MapGenParams mp;
  mp.n_obstacles = 3;
  ObstacleMap map = random_map(9, mp, R.table.steb().radius);
  RunConfig cfg;
  cfg.policy = BetaPolicy::two_point;
  RunResult run = run_online(R.sys, *R.src, R.table, map, cfg);
  for (const auto& rec : run.log) {
    bool ends = rec.beta == R.table.entries.front().beta ||
                rec.beta == R.table.entries.back().beta;
    REQUIRE(ends);
  }
}

TEST_CASE("runs demand a planar planner space") {
  RelSys din = double_integrator_rel(1.0, 0.0, 0.25, 0.5);
  GridSpec g = grid_for(din, {-2, -2}, {2, 2}, {11, 11});
  auto src = make_grid_source(din, solve_family(din, g, {0.25, 0.5}));
  TebTable t = build_teb_table(*src, 0.25);
  MapGenParams mp;
  mp.n_obstacles = 0;
  ObstacleMap map = random_map(1, mp, 0.3);
  REQUIRE_THROWS_AS(run_online(din, *src, t, map, RunConfig{}), contract_error);
}

// ---- the trajectory file ------------------------------------------------------------

TEST_CASE("trajectory files carry the run header and one row per step") {
  RunResult run;
  run.outcome = RunOutcome::reached;
  run.time = 0.1;
  StepRecord r1;
  r1.t = 0.05;
  r1.s = {1.0, 2.0, 0.5, -0.25};
  r1.p = {0.5, 0.5};
  r1.beta = 0.75;
  r1.d_obs = std::numeric_limits<double>::infinity();
  r1.value = 0.125;
  r1.events = kEvSensed | kEvReplanned;
  StepRecord r2 = r1;
  r2.t = 0.1;
  r2.events = kEvGoal;
  run.log = {r1, r2};
  run.steps = 2;
  save_trajectory("test_traj_fmt.tsv", run, "dubins", 9);
  std::ifstream is("test_traj_fmt.tsv");
  std::string line;
  std::getline(is, line);
  REQUIRE(line == "# reachtrack-trajectory v1 system=dubins seed=9 outcome=reached time=" +
                      fmt_g17(0.1));
  std::getline(is, line);
  REQUIRE(line == "t\ts0\ts1\ts2\ts3\tp0\tp1\tbeta\td_obs\tvalue\tevents");
  std::getline(is, line);
  std::istringstream row(line);
  std::string cell;
  std::vector<std::string> cells;
  while (std::getline(row, cell, '\t')) cells.push_back(cell);
  REQUIRE(cells.size() == 11);
  REQUIRE(std::stod(cells[0]) == 0.05);
  REQUIRE(std::stod(cells[1]) == 1.0);
  REQUIRE(std::stod(cells[4]) == -0.25);
  REQUIRE(std::stod(cells[7]) == 0.75);
  REQUIRE(cells[8] == "inf");
  REQUIRE(std::stod(cells[9]) == 0.125);
  REQUIRE(cells[10] == "sensed,replanned");
  std::getline(is, line);
  REQUIRE(line.substr(line.size() - 4) == "goal");
  is.close();
  std::remove("test_traj_fmt.tsv");
}
