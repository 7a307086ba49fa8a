#ifndef REACHTRACK_PLANNING_HPP
#define REACHTRACK_PLANNING_HPP

// geometric planning layer: 8-connected A* over a sampled occupancy grid,
// densified polyline paths with a consumed-prefix cursor, and rate-limited
// advancement along the path (planner inputs are infinity-norm bounded).

#include <functional>
#include <queue>
#include <vector>

#include "reachtrack/common.hpp"

namespace reachtrack {

struct PlanGrid {
  Vec lo, hi;         // 2D world box
  double resolution;  // node pitch; nodes at lo + i*resolution
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> occupied;  // predicate sampled at nodes, index iy*nx+ix

  std::size_t index(int ix, int iy) const { return std::size_t(iy) * std::size_t(nx) + std::size_t(ix); }
  Vec point(int ix, int iy) const { return {lo[0] + resolution * ix, lo[1] + resolution * iy}; }
  int snap_x(double x) const { return std::clamp(int(std::lround((x - lo[0]) / resolution)), 0, nx - 1); }
  int snap_y(double y) const { return std::clamp(int(std::lround((y - lo[1]) / resolution)), 0, ny - 1); }
};

inline PlanGrid make_plan_grid(const Vec& lo, const Vec& hi, double resolution,
                               const std::function<bool(const Vec&)>& occupied_pred) {
  require(lo.size() == 2 && hi.size() == 2, "plan grid: planner space must be 2D");
  require(resolution > 0.0, "plan grid: nonpositive resolution");
  require(hi[0] > lo[0] && hi[1] > lo[1], "plan grid: empty world box");
  PlanGrid g;
  g.lo = lo;
  g.hi = hi;
  g.resolution = resolution;
  g.nx = int(std::floor((hi[0] - lo[0]) / resolution + 1e-9)) + 1;
  g.ny = int(std::floor((hi[1] - lo[1]) / resolution + 1e-9)) + 1;
  g.occupied.resize(std::size_t(g.nx) * std::size_t(g.ny));
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      g.occupied[g.index(ix, iy)] = occupied_pred(g.point(ix, iy)) ? 1 : 0;
  return g;
}

struct RawPath {
  std::vector<Vec> pts;     // densified waypoints, spacing <= resolution
  std::size_t cursor = 0;   // first unconsumed waypoint; the final one is never consumed
  double resolution = 0.0;
  double cost = 0.0;        // A* polyline length over grid nodes
};

// 8-connected A* with euclidean edge costs and heuristic; f-ties break toward
// the smaller node index so expansions are fully deterministic.
inline RawPath plan(const PlanGrid& g, const Vec& start, const Vec& goal) {
  require(start.size() == 2 && goal.size() == 2, "plan: positions must be 2D");
  int sx = g.snap_x(start[0]), sy = g.snap_y(start[1]);
  int gx = g.snap_x(goal[0]), gy = g.snap_y(goal[1]);
  if (g.occupied[g.index(sx, sy)]) throw contract_error("plan: start cell occupied");
  if (g.occupied[g.index(gx, gy)]) throw contract_error("plan: goal cell occupied");

  std::size_t n = g.occupied.size();
  std::vector<double> gcost(n, std::numeric_limits<double>::infinity());
  std::vector<std::int32_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  auto heur = [&](int ix, int iy) {
    double dx = double(ix - gx), dy = double(iy - gy);
    return g.resolution * std::sqrt(dx * dx + dy * dy);
  };
  using Node = std::pair<double, std::size_t>;  // (f, index); min f, then min index
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  std::size_t s_idx = g.index(sx, sy), g_idx = g.index(gx, gy);
  gcost[s_idx] = 0.0;
  open.push({heur(sx, sy), s_idx});
  const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const double diag = g.resolution * std::sqrt(2.0);
  while (!open.empty()) {
    auto [f, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (idx == g_idx) break;
    int iy = int(idx) / g.nx, ix = int(idx) % g.nx;
    for (int k = 0; k < 8; ++k) {
      int jx = ix + dxs[k], jy = iy + dys[k];
      if (jx < 0 || jy < 0 || jx >= g.nx || jy >= g.ny) continue;
      std::size_t j = g.index(jx, jy);
      if (closed[j] || g.occupied[j]) continue;
      double step = k < 4 ? g.resolution : diag;
      double cand = gcost[idx] + step;
      if (cand < gcost[j] - 1e-15) {
        gcost[j] = cand;
        parent[j] = std::int32_t(idx);
        open.push({cand + heur(jx, jy), j});
      }
    }
  }
  if (!closed[g_idx]) throw contract_error("plan: no path from start to goal");

  std::vector<Vec> nodes;
  for (std::int64_t at = std::int64_t(g_idx); at >= 0; at = parent[std::size_t(at)]) {
    int iy = int(at) / g.nx, ix = int(at) % g.nx;
    nodes.push_back(g.point(ix, iy));
    if (std::size_t(at) == s_idx) break;
  }
  std::reverse(nodes.begin(), nodes.end());

  RawPath path;
  path.resolution = g.resolution;
  path.cost = gcost[g_idx];
  path.pts.push_back(nodes.front());
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    double len = dist2(nodes[i - 1], nodes[i]);
    int pieces = std::max(1, int(std::ceil(len / g.resolution - 1e-9)));
    for (int p = 1; p <= pieces; ++p) {
      double w = double(p) / pieces;
      path.pts.push_back({nodes[i - 1][0] + w * (nodes[i][0] - nodes[i - 1][0]),
                          nodes[i - 1][1] + w * (nodes[i][1] - nodes[i - 1][1])});
    }
  }
  return path;
}

// nearest unconsumed waypoint to a query position; ties toward the smaller index
inline std::size_t nearest_path_index(const RawPath& path, const Vec& e) {
  require(!path.pts.empty(), "path: empty");
  require(path.cursor < path.pts.size(), "path: fully consumed");
  std::size_t best = path.cursor;
  double bd = dist2(path.pts[best], e);
  for (std::size_t i = path.cursor + 1; i < path.pts.size(); ++i) {
    double d = dist2(path.pts[i], e);
    if (d < bd - 1e-15) {
      bd = d;
      best = i;
    }
  }
  return best;
}

inline const Vec& nearest_path_state(const RawPath& path, const Vec& e) {
  return path.pts[nearest_path_index(path, e)];
}

namespace detail {

// closest point on segment [a,b] to q -> parameter in [0,1]
inline double segment_param(const Vec& a, const Vec& b, const Vec& q) {
  double vx = b[0] - a[0], vy = b[1] - a[1];
  double den = vx * vx + vy * vy;
  if (den <= 1e-30) return 0.0;
  double t = ((q[0] - a[0]) * vx + (q[1] - a[1]) * vy) / den;
  return std::clamp(t, 0.0, 1.0);
}

// largest s in [0,1] with |A+sB| <= c on every axis (A feasible at s=0)
inline double box_exit_param(const Vec& from, const Vec& to, const Vec& center, double c) {
  double smax = 1.0;
  for (int d = 0; d < 2; ++d) {
    double A = from[std::size_t(d)] - center[std::size_t(d)];
    double B = to[std::size_t(d)] - from[std::size_t(d)];
    if (B > 1e-15) smax = std::min(smax, (c - A) / B);
    else if (B < -1e-15) smax = std::min(smax, (-c - A) / B);
  }
  return std::max(0.0, smax);
}

}  // namespace detail

// advance along the unconsumed polyline from the projection of p_cur by the
// largest arc length whose displacement from p_cur stays within the per-axis
// planner budget beta*dt; clamps at the final waypoint. consumes passed waypoints.
inline Vec step_along(RawPath& path, const Vec& p_cur, double beta, double dt) {
  require(!path.pts.empty(), "path: empty");
  require(path.cursor < path.pts.size(), "path: fully consumed");
  require(beta >= 0.0 && dt > 0.0, "step_along: bad rate arguments");
  double budget = beta * dt;

  // projection onto the unconsumed polyline
  std::size_t seg = path.cursor;  // segment [seg, seg+1]
  Vec q = path.pts[path.cursor];
  double best_d = dist2(q, p_cur);
  for (std::size_t i = path.cursor; i + 1 < path.pts.size(); ++i) {
    double t = detail::segment_param(path.pts[i], path.pts[i + 1], p_cur);
    Vec cand = {path.pts[i][0] + t * (path.pts[i + 1][0] - path.pts[i][0]),
                path.pts[i][1] + t * (path.pts[i + 1][1] - path.pts[i][1])};
    double d = dist2(cand, p_cur);
    if (d < best_d - 1e-15) {
      best_d = d;
      q = cand;
      seg = i;
    }
  }
  if (norm_inf(q, p_cur) > budget + 1e-12) {
    // projection beyond one step (e.g. a fresh plan starts at a cell center):
    // haul toward it at the per-axis rate instead of stalling; the polyline is
    // rejoined within a few steps and the infinity-norm step bound stays exact
    Vec out = p_cur;
    for (std::size_t d = 0; d < 2; ++d)
      out[d] += std::clamp(q[d] - p_cur[d], -budget, budget);
    return out;
  }

  // walk forward segment by segment until the budget box is exited
  while (seg + 1 < path.pts.size()) {
    const Vec& nxt = path.pts[seg + 1];
    if (norm_inf(nxt, p_cur) <= budget + 1e-15) {
      q = nxt;
      ++seg;
      continue;
    }
    double s = detail::box_exit_param(q, nxt, p_cur, budget);
    q = {q[0] + s * (nxt[0] - q[0]), q[1] + s * (nxt[1] - q[1])};
    break;
  }
  // waypoints strictly behind the active segment are consumed; the waypoint the
  // planner stands on (or the segment start it is inside) stays reachable so the
  // next projection lands back on the polyline even when budget < waypoint pitch.
  path.cursor = std::max(path.cursor, seg);
  return q;
}

// advance the consumed prefix up to a chosen waypoint (branch that snaps the
// planner back onto the path); the waypoint itself stays unconsumed for the
// same continuity reason as step_along.
inline void consume_through(RawPath& path, std::size_t idx) {
  require(idx < path.pts.size(), "path: consume index out of range");
  path.cursor = std::max(path.cursor, idx);
}

}  // namespace reachtrack

#endif
