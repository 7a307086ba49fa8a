#ifndef REACHTRACK_BENCH_HPP
#define REACHTRACK_BENCH_HPP

// benchmark harness: four controllers on identical seeded random maps.
//   F     -- online loop pinned to the lowest planner authority (static bound)
//   MF    -- two-point authority set {lowest, highest}, re-queried only when a
//            replan happens (simplified stand-in; labeled as such in output)
//   PF    -- the full parametric loop
//   MPPI  -- sampling controller tracking an unaugmented path (no safety bound)
// metrics are aggregated deterministically in run-index order; solution time is
// simulated seconds, averaged over runs that reached the goal (convention is
// printed in the report header).

#include <fstream>

#include "reachtrack/mppi.hpp"
#include "reachtrack/online.hpp"

namespace reachtrack {

enum class Baseline { F, MF, PF, MPPI };

inline const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::F: return "F";
    case Baseline::MF: return "MF-simplified";
    case Baseline::PF: return "PF";
    case Baseline::MPPI: return "MPPI";
  }
  return "?";
}

inline Baseline baseline_from_name(const std::string& s) {
  if (s == "F") return Baseline::F;
  if (s == "MF" || s == "MF-simplified") return Baseline::MF;
  if (s == "PF") return Baseline::PF;
  if (s == "MPPI") return Baseline::MPPI;
  throw config_error("unknown baseline '" + s + "' (expected F, MF, PF, or MPPI)");
}

struct BenchConfig {
  int n_runs = 20;
  std::uint64_t seed_base = 1;
  std::vector<Baseline> baselines = {Baseline::F, Baseline::MF, Baseline::PF, Baseline::MPPI};
  MapGenParams map_params;
  RunConfig run_cfg;
  MppiConfig mppi_cfg;

  void validate() const {
    require(n_runs > 0, "bench: need at least one run");
    require(!baselines.empty(), "bench: empty baseline set");
  }
};

struct RunRow {
  Baseline kind = Baseline::PF;
  int run_index = 0;
  std::uint64_t map_seed = 0;
  RunOutcome outcome = RunOutcome::timeout;
  double time = 0.0;
  int steps = 0;
  int replans = 0;
  int resets = 0;
  int stalls = 0;
  int invariant_violations = 0;
  int clearance_violations = 0;
  double min_d_obs = 0.0;
};

struct BaselineStats {
  Baseline kind = Baseline::PF;
  int runs = 0;
  int reached = 0, collided = 0, timeout = 0, stalled = 0;
  double mean_time_reached = 0.0;  // simulated seconds, reaching runs only
  int invariant_violations = 0;

  double pct(int k) const { return runs ? 100.0 * k / runs : 0.0; }
};

struct BenchReport {
  std::string system_id;
  std::uint64_t seed_base = 0;
  int n_runs = 0;
  std::vector<RunRow> rows;          // ordered by (baseline order, run index)
  std::vector<BaselineStats> stats;  // one per baseline, same order
};

inline std::vector<BaselineStats> aggregate(const std::vector<RunRow>& rows,
                                            const std::vector<Baseline>& order) {
  require(!rows.empty(), "aggregate: no runs to report");
  std::vector<BaselineStats> out;
  for (Baseline b : order) {
    BaselineStats st;
    st.kind = b;
    double time_sum = 0.0;
    for (const RunRow& r : rows) {
      if (r.kind != b) continue;
      ++st.runs;
      st.invariant_violations += r.invariant_violations;
      switch (r.outcome) {
        case RunOutcome::reached:
          ++st.reached;
          time_sum += r.time;
          break;
        case RunOutcome::collided: ++st.collided; break;
        case RunOutcome::timeout: ++st.timeout; break;
        case RunOutcome::stalled: ++st.stalled; break;
      }
    }
    require(st.runs > 0, std::string("aggregate: no runs for baseline ") + baseline_name(b));
    st.mean_time_reached = st.reached ? time_sum / st.reached : 0.0;
    out.push_back(st);
  }
  return out;
}

// one benchmark run of one baseline; map must be shared across baselines per index
inline RunRow bench_single(const RelSys& sys, const ValueSource& src, const TebTable& table,
                           const ObstacleMap& map, const BenchConfig& cfg, Baseline kind,
                           int run_index, std::uint64_t map_seed) {
  RunRow row;
  row.kind = kind;
  row.run_index = run_index;
  row.map_seed = map_seed;
  RunResult res;
  if (kind == Baseline::MPPI) {
    MppiConfig mc = cfg.mppi_cfg;
    mc.dt = cfg.run_cfg.dt;
    mc.max_time = cfg.run_cfg.max_time;
    mc.goal_tol = table.steb().radius;  // same arrival rule as the bound-based methods
    mc.sensing_radius = 2.0 * table.entries.back().radius;
    mc.seed = derive_seed(cfg.seed_base, 0x52554eull + std::uint64_t(run_index));
    res = run_mppi(sys, map, mc);
  } else {
    RunConfig rc = cfg.run_cfg;
    rc.policy = kind == Baseline::F    ? BetaPolicy::fixed_low
                : kind == Baseline::MF ? BetaPolicy::two_point
                                       : BetaPolicy::full;
    rc.seed = derive_seed(cfg.seed_base, 0x52554eull + std::uint64_t(run_index));
    res = run_online(sys, src, table, map, rc);
  }
  row.outcome = res.outcome;
  row.time = res.time;
  row.steps = res.steps;
  row.replans = res.replans;
  row.resets = res.resets;
  row.stalls = res.stalls;
  row.invariant_violations = res.invariant_violations;
  row.clearance_violations = res.clearance_violations;
  row.min_d_obs = res.min_d_obs;
  return row;
}

inline BenchReport run_bench(const RelSys& sys, const ValueSource& src, const TebTable& table,
                             const BenchConfig& cfg) {
  cfg.validate();
  table.validate();
  BenchReport rep;
  rep.system_id = sys.id;
  rep.seed_base = cfg.seed_base;
  rep.n_runs = cfg.n_runs;

  // maps are generated once per run index and shared by every baseline
  std::vector<std::uint64_t> map_seeds(std::size_t(cfg.n_runs));
  std::vector<ObstacleMap> maps(std::size_t(cfg.n_runs));
  for (int i = 0; i < cfg.n_runs; ++i) {
    map_seeds[std::size_t(i)] = derive_seed(cfg.seed_base, 0x6d6170ull + std::uint64_t(i));
    maps[std::size_t(i)] = random_map(map_seeds[std::size_t(i)], cfg.map_params,
                                      table.steb().radius);
  }

  std::size_t total = cfg.baselines.size() * std::size_t(cfg.n_runs);
  rep.rows.assign(total, RunRow{});
  parallel_chunks(total, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      std::size_t bi = j / std::size_t(cfg.n_runs);
      int ri = int(j % std::size_t(cfg.n_runs));
      rep.rows[j] = bench_single(sys, src, table, maps[std::size_t(ri)], cfg,
                                 cfg.baselines[bi], ri, map_seeds[std::size_t(ri)]);
    }
  });
  rep.stats = aggregate(rep.rows, cfg.baselines);
  return rep;
}

// ---- report rendering -------------------------------------------------------------

inline std::string render_table(const BenchReport& rep) {
  std::string out;
  char buf[256];
  out += "# benchmark: system=" + rep.system_id + " runs-per-baseline=" +
         std::to_string(rep.n_runs) + " seed=" + std::to_string(rep.seed_base) + "\n";
  out += "# solution time: simulated seconds, averaged over goal-reaching runs only\n";
  std::snprintf(buf, sizeof buf, "%-14s %6s %9s %10s %9s %9s %14s\n", "baseline", "runs",
                "reached%", "collided%", "timeout%", "stalled%", "mean-time(s)");
  out += buf;
  for (const auto& st : rep.stats) {
    std::snprintf(buf, sizeof buf, "%-14s %6d %9.1f %10.1f %9.1f %9.1f %14.2f\n",
                  baseline_name(st.kind), st.runs, st.pct(st.reached), st.pct(st.collided),
                  st.pct(st.timeout), st.pct(st.stalled), st.mean_time_reached);
    out += buf;
  }
  return out;
}

inline std::string render_rows_tsv(const BenchReport& rep) {
  std::string out =
      "baseline\trun\tmap_seed\toutcome\ttime\tsteps\treplans\tresets\tstalls\t"
      "invariant_violations\tclearance_violations\tmin_d_obs\n";
  for (const auto& r : rep.rows) {
    out += baseline_name(r.kind);
    out += '\t' + std::to_string(r.run_index);
    out += '\t' + std::to_string(r.map_seed);
    out += '\t';
    out += outcome_name(r.outcome);
    out += '\t' + fmt_g17(r.time);
    out += '\t' + std::to_string(r.steps);
    out += '\t' + std::to_string(r.replans);
    out += '\t' + std::to_string(r.resets);
    out += '\t' + std::to_string(r.stalls);
    out += '\t' + std::to_string(r.invariant_violations);
    out += '\t' + std::to_string(r.clearance_violations);
    out += '\t' + fmt_g17(r.min_d_obs);
    out += '\n';
  }
  return out;
}

// ---- trajectory plot --------------------------------------------------------------

// authority color bands: low (<= 0.5) blue, medium (0.5, 1] purple, high (> 1) red
inline const char* beta_color(double beta) {
  if (beta <= 0.5) return "#2060df";
  if (beta <= 1.0) return "#8040c0";
  return "#d03030";
}

namespace detail {

struct SvgMapper {
  double lox, hiy, k;
  double x(double wx) const { return (wx - lox) * k; }
  double y(double wy) const { return (hiy - wy) * k; }
};

inline std::string svg_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

// standalone SVG: obstacles, goal, start, the tracker trajectory colored by the
// authority bands, the static (green) and final-authority (orange) bound circles
// around the final planner position, and the sensing range (dashed).
inline std::string render_svg(const RelSys& sys, const std::vector<StepRecord>& log,
                              const ObstacleMap& map, const TebTable& table) {
  map.validate();
  table.validate();
  const double k = 100.0;  // pixels per world unit
  detail::SvgMapper M{map.world_lo[0], map.world_hi[1], k};
  auto N = detail::svg_num;
  double W = (map.world_hi[0] - map.world_lo[0]) * k;
  double H = (map.world_hi[1] - map.world_lo[1]) * k;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + N(W) + "\" height=\"" + N(H) +
       "\" viewBox=\"0 0 " + N(W) + " " + N(H) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + N(W) + "\" height=\"" + N(H) +
       "\" fill=\"#fafafa\" stroke=\"#333\"/>\n";
  for (const auto& d : map.disks)
    s += "<circle cx=\"" + N(M.x(d.c[0])) + "\" cy=\"" + N(M.y(d.c[1])) + "\" r=\"" +
         N(d.R * k) + "\" fill=\"#555555\"/>\n";
  for (const auto& b : map.boxes)
    s += "<rect x=\"" + N(M.x(b.lo[0])) + "\" y=\"" + N(M.y(b.hi[1])) + "\" width=\"" +
         N((b.hi[0] - b.lo[0]) * k) + "\" height=\"" + N((b.hi[1] - b.lo[1]) * k) +
         "\" fill=\"#555555\"/>\n";
  s += "<circle cx=\"" + N(M.x(map.goal[0])) + "\" cy=\"" + N(M.y(map.goal[1])) + "\" r=\"" +
       N(std::max(map.goal_radius, 0.05) * k) +
       "\" fill=\"none\" stroke=\"#108030\" stroke-width=\"3\"/>\n";
  s += "<circle cx=\"" + N(M.x(map.start[0])) + "\" cy=\"" + N(M.y(map.start[1])) +
       "\" r=\"5\" fill=\"#108030\"/>\n";

  if (!log.empty()) {
    // trajectory polylines, one per maximal same-color stretch (segments share
    // endpoints so the path is visually continuous across color changes)
    Vec prev = tracker_position(sys, log.front().s);
    std::string cur_color = beta_color(log.front().beta);
    std::string pts = N(M.x(map.start[0])) + "," + N(M.y(map.start[1])) + " " +
                      N(M.x(prev[0])) + "," + N(M.y(prev[1]));
    auto flush = [&](const std::string& color) {
      s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"2.5\"/>\n";
    };
    for (std::size_t i = 1; i < log.size(); ++i) {
      Vec e = tracker_position(sys, log[i].s);
      std::string color = beta_color(log[i].beta);
      if (color != cur_color) {
        flush(cur_color);
        pts = N(M.x(prev[0])) + "," + N(M.y(prev[1]));
        cur_color = color;
      }
      pts += " " + N(M.x(e[0])) + "," + N(M.y(e[1]));
      prev = e;
    }
    flush(cur_color);

    const StepRecord& last = log.back();
    double steb_r = table.steb().radius;
    double dteb_r = table.entries.front().radius;  // bound circle for the nearest entry
    double best = std::numeric_limits<double>::infinity();
    for (const auto& en : table.entries) {
      double gap = std::abs(en.beta - last.beta);
      if (gap < best) {
        best = gap;
        dteb_r = en.radius;
      }
    }
    s += "<circle cx=\"" + N(M.x(last.p[0])) + "\" cy=\"" + N(M.y(last.p[1])) + "\" r=\"" +
         N(steb_r * k) + "\" fill=\"none\" stroke=\"#108030\" stroke-width=\"2\"/>\n";
    s += "<circle cx=\"" + N(M.x(last.p[0])) + "\" cy=\"" + N(M.y(last.p[1])) + "\" r=\"" +
         N(dteb_r * k) + "\" fill=\"none\" stroke=\"#e08020\" stroke-width=\"2\"/>\n";
    Vec e_last = tracker_position(sys, last.s);
    double sense_r = 2.0 * table.entries.back().radius;
    s += "<circle cx=\"" + N(M.x(e_last[0])) + "\" cy=\"" + N(M.y(e_last[1])) + "\" r=\"" +
         N(sense_r * k) +
         "\" fill=\"none\" stroke=\"#808080\" stroke-width=\"1.5\" stroke-dasharray=\"8 6\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void save_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "cannot open for writing: " + path);
  os.write(content.data(), std::streamsize(content.size()));
  require(bool(os), "write failed: " + path);
}

}  // namespace reachtrack

#endif
