#ifndef REACHTRACK_ENVIRONMENT_HPP
#define REACHTRACK_ENVIRONMENT_HPP

// obstacle maps with incremental disk sensing. an obstacle is sensed as a whole
// once any point of it comes within the sensing radius of the tracker; sensed
// sets only grow. collision uses the open interior; dilation predicates use a
// strict distance test, so a point exactly on the dilated boundary is free.

#include <fstream>
#include <functional>
#include <sstream>

#include "reachtrack/common.hpp"
#include "reachtrack/planning.hpp"

namespace reachtrack {

struct Disk {
  Vec c;
  double R = 0.0;
};

struct BoxObs {
  Vec lo, hi;
};

struct ObstacleMap {
  Vec world_lo, world_hi;
  Vec start, goal;
  double goal_radius = 0.0;
  std::vector<Disk> disks;
  std::vector<BoxObs> boxes;  // indexed after the disks

  int n_obstacles() const { return int(disks.size() + boxes.size()); }

  // unsigned euclidean distance to the obstacle's surface; 0 inside
  double obstacle_distance(int i, const Vec& pos) const {
    if (i < int(disks.size())) {
      const Disk& d = disks[std::size_t(i)];
      return std::max(0.0, dist2(pos, d.c) - d.R);
    }
    const BoxObs& b = boxes[std::size_t(i) - disks.size()];
    double s = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      double dk = std::max({b.lo[k] - pos[k], 0.0, pos[k] - b.hi[k]});
      s += dk * dk;
    }
    return std::sqrt(s);
  }

  bool obstacle_inside(int i, const Vec& pos) const {
    if (i < int(disks.size())) {
      const Disk& d = disks[std::size_t(i)];
      return dist2(pos, d.c) < d.R;
    }
    const BoxObs& b = boxes[std::size_t(i) - disks.size()];
    for (std::size_t k = 0; k < pos.size(); ++k)
      if (!(pos[k] > b.lo[k] && pos[k] < b.hi[k])) return false;
    return true;
  }

  double min_distance_all(const Vec& pos) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_obstacles(); ++i) m = std::min(m, obstacle_distance(i, pos));
    return m;
  }

  void validate() const {
    require(world_lo.size() == 2 && world_hi.size() == 2, "map: world box must be 2D");
    require(world_hi[0] > world_lo[0] && world_hi[1] > world_lo[1], "map: empty world box");
    require(start.size() == 2 && goal.size() == 2, "map: start/goal must be 2D");
    require(goal_radius >= 0.0, "map: negative goal radius");
    for (const auto& d : disks) require(d.R > 0.0 && d.c.size() == 2, "map: malformed disk");
    for (const auto& b : boxes)
      require(b.lo.size() == 2 && b.hi.size() == 2 && b.lo[0] < b.hi[0] && b.lo[1] < b.hi[1],
              "map: malformed box");
  }
};

struct SensedSet {
  std::vector<std::uint8_t> sensed;
  double sensing_radius = 0.0;

  int count() const {
    int n = 0;
    for (auto s : sensed) n += s;
    return n;
  }
};

inline SensedSet make_sensed(const ObstacleMap& map, double sensing_radius) {
  require(sensing_radius > 0.0, "sense: nonpositive sensing radius");
  SensedSet s;
  s.sensed.assign(std::size_t(map.n_obstacles()), 0);
  s.sensing_radius = sensing_radius;
  return s;
}

// add every obstacle within range of the tracker position; true if any was new
inline bool sense(const ObstacleMap& map, SensedSet& set, const Vec& tracker_pos) {
  require(set.sensed.size() == std::size_t(map.n_obstacles()), "sense: set/map mismatch");
  bool newly = false;
  for (int i = 0; i < map.n_obstacles(); ++i) {
    if (set.sensed[std::size_t(i)]) continue;
    if (map.obstacle_distance(i, tracker_pos) <= set.sensing_radius) {
      set.sensed[std::size_t(i)] = 1;
      newly = true;
    }
  }
  return newly;
}

// min distance from pos to any sensed obstacle; +inf when nothing is sensed
inline double min_obstacle_distance(const ObstacleMap& map, const SensedSet& set,
                                    const Vec& pos) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < map.n_obstacles(); ++i)
    if (set.sensed[std::size_t(i)]) m = std::min(m, map.obstacle_distance(i, pos));
  return m;
}

// Minkowski dilation of the sensed set by an open disk of radius r_aug:
// true iff pos is inside an obstacle or strictly closer than r_aug to one
inline std::function<bool(const Vec&)> augment(const ObstacleMap& map, const SensedSet& set,
                                               double r_aug) {
  require(r_aug >= 0.0, "augment: negative radius");
  return [&map, &set, r_aug](const Vec& pos) {
    for (int i = 0; i < map.n_obstacles(); ++i) {
      if (!set.sensed[std::size_t(i)]) continue;
      if (map.obstacle_inside(i, pos)) return true;
      if (map.obstacle_distance(i, pos) < r_aug) return true;
    }
    return false;
  };
}

// true collision check against every obstacle, sensed or not (open interior)
inline bool collision(const ObstacleMap& map, const Vec& pos) {
  for (int i = 0; i < map.n_obstacles(); ++i)
    if (map.obstacle_inside(i, pos)) return true;
  return false;
}

struct MapGenParams {
  Vec world_lo = {-5.0, -5.0};
  Vec world_hi = {5.0, 5.0};
  Vec start = {-4.0, -4.0};
  Vec goal = {4.0, 4.0};
  double goal_radius = 0.3;
  int n_obstacles = 6;
  double r_min = 0.4, r_max = 0.9;
  double plan_resolution = 0.0;  // <= 0: steb_radius / 2
  int max_attempts = 1000;
};

// seeded map sampler. accepts only maps where the goal clears the dilated
// obstacles, the start has 2x static-bound clearance, and a dilated path exists.
inline ObstacleMap random_map(std::uint64_t seed, const MapGenParams& p, double steb_radius) {
  require(steb_radius > 0.0, "random_map: nonpositive bound radius");
  require(p.r_min > 0.0 && p.r_max >= p.r_min, "random_map: bad obstacle radius range");
  std::mt19937_64 rng(derive_seed(seed, 0x3a9));
  double res = p.plan_resolution > 0 ? p.plan_resolution : 0.5 * steb_radius;
  double margin = res * std::sqrt(2.0) / 2.0;  // conservative node-sampling slack
  for (int attempt = 0; attempt < p.max_attempts; ++attempt) {
    ObstacleMap m;
    m.world_lo = p.world_lo;
    m.world_hi = p.world_hi;
    m.start = p.start;
    m.goal = p.goal;
    m.goal_radius = p.goal_radius;
    bool ok = true;
    for (int i = 0; i < p.n_obstacles && ok; ++i) {
      Disk d;
      d.R = uniform(rng, p.r_min, p.r_max);
      d.c = {uniform(rng, p.world_lo[0] + d.R, p.world_hi[0] - d.R),
             uniform(rng, p.world_lo[1] + d.R, p.world_hi[1] - d.R)};
      m.disks.push_back(d);
    }
    for (int i = 0; i < m.n_obstacles() && ok; ++i) {
      if (m.obstacle_distance(i, m.start) < 2.0 * steb_radius) ok = false;
      if (m.obstacle_distance(i, m.goal) - m.goal_radius < steb_radius + margin) ok = false;
    }
    if (!ok) continue;
    SensedSet all = make_sensed(m, 1.0);
    std::fill(all.sensed.begin(), all.sensed.end(), 1);
    auto occ = augment(m, all, steb_radius + margin);
    try {
      PlanGrid g = make_plan_grid(m.world_lo, m.world_hi, res, occ);
      plan(g, m.start, m.goal);
    } catch (const contract_error&) {
      continue;  // no dilated path; resample
    }
    m.validate();
    return m;
  }
  throw contract_error("random_map: no feasible map after " + std::to_string(p.max_attempts) +
                       " attempts");
}

// ---- map text format -------------------------------------------------------------

inline void save_map(const std::string& path, const ObstacleMap& m) {
  std::ofstream os(path);
  require(bool(os), "cannot open for writing: " + path);
  os << "reachtrack-map v1\n";
  os << "world " << join_g17(m.world_lo) << ' ' << join_g17(m.world_hi) << "\n";
  os << "start " << join_g17(m.start) << "\n";
  os << "goal " << join_g17(m.goal) << ' ' << fmt_g17(m.goal_radius) << "\n";
  os << "disks " << m.disks.size() << "\n";
  for (const auto& d : m.disks) os << join_g17(d.c) << ' ' << fmt_g17(d.R) << "\n";
  os << "boxes " << m.boxes.size() << "\n";
  for (const auto& b : m.boxes) os << join_g17(b.lo) << ' ' << join_g17(b.hi) << "\n";
  require(bool(os), "write failed: " + path);
}

inline ObstacleMap load_map(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), "cannot open: " + path);
  std::string line, key;
  std::getline(is, line);
  require(line == "reachtrack-map v1", path + ": not a map file");
  ObstacleMap m;
  is >> key;
  require(key == "world", path + ": malformed map");
  m.world_lo.resize(2);
  m.world_hi.resize(2);
  is >> m.world_lo[0] >> m.world_lo[1] >> m.world_hi[0] >> m.world_hi[1];
  is >> key;
  require(key == "start", path + ": malformed map");
  m.start.resize(2);
  is >> m.start[0] >> m.start[1];
  is >> key;
  require(key == "goal", path + ": malformed map");
  m.goal.resize(2);
  is >> m.goal[0] >> m.goal[1] >> m.goal_radius;
  std::size_t n = 0;
  is >> key >> n;
  require(key == "disks", path + ": malformed map");
  for (std::size_t i = 0; i < n; ++i) {
    Disk d;
    d.c.resize(2);
    is >> d.c[0] >> d.c[1] >> d.R;
    m.disks.push_back(d);
  }
  is >> key >> n;
  require(key == "boxes", path + ": malformed map");
  for (std::size_t i = 0; i < n; ++i) {
    BoxObs b;
    b.lo.resize(2);
    b.hi.resize(2);
    is >> b.lo[0] >> b.lo[1] >> b.hi[0] >> b.hi[1];
    m.boxes.push_back(b);
  }
  require(bool(is), path + ": truncated map");
  m.validate();
  return m;
}

}  // namespace reachtrack

#endif
