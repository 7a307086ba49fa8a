// benchmark harness: per-baseline aggregation, the text and TSV reports, the
// SVG trajectory plot, and determinism of the four-way comparison.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "reachtrack/bench.hpp"
#include "reachtrack/grid_solver.hpp"
#include "reachtrack/value_source.hpp"

using namespace reachtrack;

namespace {

// ---- oracles ----------------------------------------------------------------

// minimal XML well-formedness check: every tag closes, nesting balances, and
// attribute quotes pair up.  written against the XML rules, not the renderer.
bool xml_balanced(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      ++i;
      continue;
    }
    std::size_t end = s.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    long quotes = std::count(tag.begin(), tag.end(), '"');
    if (quotes % 2 != 0) return false;
    if (tag.front() == '?') continue;  // declaration
    bool closing = tag.front() == '/';
    bool selfclosing = tag.back() == '/';
    std::string name = tag.substr(closing ? 1 : 0);
    name = name.substr(0, name.find_first_of(" \t\r\n/"));
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!selfclosing) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t at = hay.find(needle); at != std::string::npos;
       at = hay.find(needle, at + needle.size()))
    ++n;
  return n;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string l;
  while (std::getline(is, l)) out.push_back(l);
  return out;
}

RunRow row(Baseline b, RunOutcome o, double time, int run_index = 0) {
  RunRow r;
  r.kind = b;
  r.run_index = run_index;
  r.outcome = o;
  r.time = time;
  return r;
}

// two-entry authority ladder for the plot tests
TebTable small_table() {
  TebTable t;
  t.delta_beta = 0.5;
  t.epsilon = 0.02;
  t.entries = {{0.5, 0.10, 0.3}, {1.0, 0.14, 0.6}};
  return t;
}

ObstacleMap plot_map() {
  ObstacleMap m;
  m.world_lo = {-1.0, -1.0};
  m.world_hi = {1.0, 1.0};
  m.start = {-0.8, -0.8};
  m.goal = {0.8, 0.8};
  m.goal_radius = 0.1;
  m.disks = {{{0.0, 0.0}, 0.25}};
  Box b;
  b.lo = {0.4, -0.9};
  b.hi = {0.7, -0.6};
  m.boxes = {b};
  return m;
}

// solved artifacts for the end-to-end comparison, built once per binary
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

// ---- names ------------------------------------------------------------------------

TEST_CASE("baseline names round-trip and unknown names are rejected") {
  REQUIRE(std::string(baseline_name(Baseline::F)) == "F");
  REQUIRE(std::string(baseline_name(Baseline::MF)) == "MF-simplified");
  REQUIRE(std::string(baseline_name(Baseline::PF)) == "PF");
  REQUIRE(std::string(baseline_name(Baseline::MPPI)) == "MPPI");

  REQUIRE(baseline_from_name("F") == Baseline::F);
  REQUIRE(baseline_from_name("MF") == Baseline::MF);
  REQUIRE(baseline_from_name("MF-simplified") == Baseline::MF);
  REQUIRE(baseline_from_name("PF") == Baseline::PF);
  REQUIRE(baseline_from_name("MPPI") == Baseline::MPPI);
  REQUIRE_THROWS_MATCHES(baseline_from_name("fast"), config_error,
                         Catch::Matchers::Message(
                             "unknown baseline 'fast' (expected F, MF, PF, or MPPI)"));
}

// ---- aggregation --------------------------------------------------------------------

TEST_CASE("aggregation counts outcomes and averages reaching runs only") {
  std::vector<RunRow> rows;
  rows.push_back(row(Baseline::PF, RunOutcome::reached, 2.0));
  rows.push_back(row(Baseline::PF, RunOutcome::reached, 4.0));
  rows.push_back(row(Baseline::PF, RunOutcome::collided, 17.0));  // must not enter the mean
  rows.push_back(row(Baseline::PF, RunOutcome::timeout, 60.0));
  rows.push_back(row(Baseline::PF, RunOutcome::stalled, 1.0));
  rows[0].invariant_violations = 2;
  rows[3].invariant_violations = 3;

  std::vector<BaselineStats> st = aggregate(rows, {Baseline::PF});
  REQUIRE(st.size() == 1);
  REQUIRE(st[0].kind == Baseline::PF);
  REQUIRE(st[0].runs == 5);
  REQUIRE(st[0].reached == 2);
  REQUIRE(st[0].collided == 1);
  REQUIRE(st[0].timeout == 1);
  REQUIRE(st[0].stalled == 1);
  REQUIRE(st[0].mean_time_reached == 3.0);
  REQUIRE(st[0].invariant_violations == 5);
  REQUIRE(st[0].pct(st[0].reached) == 40.0);

  // a single reaching run
  std::vector<RunRow> one = {row(Baseline::F, RunOutcome::reached, 10.0)};
  std::vector<BaselineStats> s1 = aggregate(one, {Baseline::F});
  REQUIRE(s1[0].mean_time_reached == 10.0);
  REQUIRE(s1[0].pct(s1[0].reached) == 100.0);

  // nobody reached: the mean is reported as zero rather than dividing by zero
  std::vector<RunRow> none = {row(Baseline::F, RunOutcome::timeout, 60.0)};
  REQUIRE(aggregate(none, {Baseline::F})[0].mean_time_reached == 0.0);

  REQUIRE_THROWS_WITH(aggregate({}, {Baseline::F}), "aggregate: no runs to report");
  REQUIRE_THROWS_WITH(aggregate(rows, {Baseline::F}), "aggregate: no runs for baseline F");
}

// ---- reports ------------------------------------------------------------------------

TEST_CASE("the report table prints percentages per baseline") {
  std::vector<RunRow> rows;
  for (int i = 0; i < 13; ++i) rows.push_back(row(Baseline::PF, RunOutcome::reached, 10.0, i));
  for (int i = 13; i < 17; ++i) rows.push_back(row(Baseline::PF, RunOutcome::collided, 0.0, i));
  for (int i = 17; i < 19; ++i) rows.push_back(row(Baseline::PF, RunOutcome::timeout, 0.0, i));
  rows.push_back(row(Baseline::PF, RunOutcome::stalled, 0.0, 19));

  BenchReport rep;
  rep.system_id = "dubins";
  rep.seed_base = 9;
  rep.n_runs = 20;
  rep.rows = rows;
  rep.stats = aggregate(rows, {Baseline::PF});

  std::string table = render_table(rep);
  std::vector<std::string> ls = lines_of(table);
  REQUIRE(ls.size() == 4);
  REQUIRE(ls[0] == "# benchmark: system=dubins runs-per-baseline=20 seed=9");
  REQUIRE(ls[1] == "# solution time: simulated seconds, averaged over goal-reaching runs only");
  REQUIRE(split_ws(ls[2]) == std::vector<std::string>{"baseline", "runs", "reached%",
                                                      "collided%", "timeout%", "stalled%",
                                                      "mean-time(s)"});
  REQUIRE(split_ws(ls[3]) ==
          std::vector<std::string>{"PF", "20", "65.0", "20.0", "10.0", "5.0", "10.00"});
}

TEST_CASE("run rows render as a tab-separated table") {
  BenchReport rep;
  RunRow a = row(Baseline::PF, RunOutcome::reached, 12.5, 0);
  a.map_seed = 42;
  a.steps = 250;
  a.replans = 3;
  a.resets = 1;
  a.min_d_obs = 0.75;
  RunRow b = row(Baseline::MPPI, RunOutcome::collided, 4.25, 1);
  b.map_seed = 43;
  b.steps = 85;
  b.min_d_obs = std::numeric_limits<double>::infinity();
  rep.rows = {a, b};

  std::string expect =
      "baseline\trun\tmap_seed\toutcome\ttime\tsteps\treplans\tresets\tstalls\t"
      "invariant_violations\tclearance_violations\tmin_d_obs\n"
      "PF\t0\t42\treached\t12.5\t250\t3\t1\t0\t0\t0\t0.75\n"
      "MPPI\t1\t43\tcollided\t4.25\t85\t0\t0\t0\t0\t0\tinf\n";
  REQUIRE(render_rows_tsv(rep) == expect);
}

// ---- the trajectory plot ---------------------------------------------------------------

TEST_CASE("authority colors band at one half and at one") {
  REQUIRE(std::string(beta_color(0.2)) == "#2060df");
  REQUIRE(std::string(beta_color(0.5)) == "#2060df");  // boundary stays low
  REQUIRE(std::string(beta_color(0.5000001)) == "#8040c0");
  REQUIRE(std::string(beta_color(1.0)) == "#8040c0");  // boundary stays medium
  REQUIRE(std::string(beta_color(1.0000001)) == "#d03030");
  REQUIRE(std::string(beta_color(1.25)) == "#d03030");
}

TEST_CASE("an empty log renders the scene without any trajectory") {
  std::string svg = render_svg(dubins_rel(), {}, plot_map(), small_table());
  REQUIRE(xml_balanced(svg));
  REQUIRE(count_occurrences(svg, "<polyline") == 0);
  REQUIRE(count_occurrences(svg, "<circle") == 3);  // disk, goal ring, start dot
  REQUIRE(count_occurrences(svg, "<rect") == 2);    // frame and the box obstacle
  // the disk at the world center lands mid-canvas at 100 px per unit
  REQUIRE(svg.find("cx=\"100.00\" cy=\"100.00\" r=\"25.00\"") != std::string::npos);
  REQUIRE(svg.substr(svg.size() - 7) == "</svg>\n");
}

TEST_CASE("the trajectory is banded into one polyline per authority stretch") {
  RelSys sys = dubins_rel();
  auto rec = [](double x, double y, double beta) {
    StepRecord r;
    r.t = 0.0;
    r.s = {x, y, 0.0, 0.0};
    r.p = {x, y};
    r.beta = beta;
    return r;
  };
  std::vector<StepRecord> log = {rec(-0.5, -0.5, 0.3), rec(0.0, -0.3, 0.8),
                                 rec(0.5, 0.0, 1.2)};
  std::string svg = render_svg(sys, log, plot_map(), small_table());
  REQUIRE(xml_balanced(svg));
  REQUIRE(count_occurrences(svg, "<polyline") == 3);
  REQUIRE(count_occurrences(svg, "#2060df") == 1);
  REQUIRE(count_occurrences(svg, "#8040c0") == 1);
  REQUIRE(count_occurrences(svg, "#d03030") == 1);
  // scene circles plus the static ring, the authority ring, and the sensing ring
  REQUIRE(count_occurrences(svg, "<circle") == 6);
  // final authority 1.2 is nearest the beta = 1.0 entry: ring radius 0.6 -> 60 px;
  // sensing range is twice the largest bound: 1.2 -> 120 px
  REQUIRE(svg.find("r=\"60.00\"") != std::string::npos);
  REQUIRE(svg.find("r=\"120.00\"") != std::string::npos);
}

// ---- text output ----------------------------------------------------------------------

TEST_CASE("report files are written verbatim or the call fails loudly") {
  std::string path = "test_bench_report.txt";
  save_text(path, "line one\nline two\n");
  REQUIRE(slurp(path) == "line one\nline two\n");
  std::remove(path.c_str());
  REQUIRE_THROWS_WITH(save_text("no_such_dir_xyz/report.txt", "x"),
                      Catch::Matchers::ContainsSubstring("cannot open for writing"));
}

// ---- the full comparison ----------------------------------------------------------------

TEST_CASE("the four-way comparison shares maps across baselines and is worker-invariant") {
  const Rig& R = rig();
  BenchConfig cfg;
  cfg.n_runs = 2;
  cfg.seed_base = 3;
  cfg.map_params.world_lo = {-4.0, -4.0};
  cfg.map_params.world_hi = {4.0, 4.0};
  cfg.map_params.start = {-3.0, -3.0};
  cfg.map_params.goal = {3.0, 3.0};
  cfg.map_params.n_obstacles = 2;
  cfg.map_params.r_min = 0.3;
  cfg.map_params.r_max = 0.5;
  cfg.map_params.max_attempts = 5000;
  cfg.run_cfg.dt = 0.05;
  cfg.run_cfg.max_time = 20.0;
  cfg.mppi_cfg.samples = 128;

  int prior_workers = worker_count();
  set_worker_count(1);
  BenchReport rep = run_bench(R.sys, *R.src, R.table, cfg);

  REQUIRE(rep.system_id == "dubins");
  REQUIRE(rep.n_runs == 2);
  REQUIRE(rep.seed_base == 3);
  REQUIRE(rep.rows.size() == 8);
  REQUIRE(rep.stats.size() == 4);

  // rows are ordered baseline-major with run index cycling fastest, and every
  // baseline faces the same map (same seed) at the same run index
  for (std::size_t j = 0; j < rep.rows.size(); ++j) {
    REQUIRE(rep.rows[j].kind == cfg.baselines[j / 2]);
    REQUIRE(rep.rows[j].run_index == int(j % 2));
    REQUIRE(rep.rows[j].map_seed == rep.rows[j % 2].map_seed);
  }

  // stats agree with an independent fold over the rows
  for (std::size_t b = 0; b < cfg.baselines.size(); ++b) {
    int reached = 0, collided = 0, timeout = 0, stalled = 0, inv = 0;
    double time_sum = 0.0;
    for (const RunRow& r : rep.rows) {
      if (r.kind != cfg.baselines[b]) continue;
      inv += r.invariant_violations;
      if (r.outcome == RunOutcome::reached) {
        ++reached;
        time_sum += r.time;
      } else if (r.outcome == RunOutcome::collided) ++collided;
      else if (r.outcome == RunOutcome::timeout) ++timeout;
      else ++stalled;
    }
    const BaselineStats& st = rep.stats[b];
    REQUIRE(st.kind == cfg.baselines[b]);
    REQUIRE(st.runs == 2);
    REQUIRE(st.reached == reached);
    REQUIRE(st.collided == collided);
    REQUIRE(st.timeout == timeout);
    REQUIRE(st.stalled == stalled);
    REQUIRE(st.invariant_violations == inv);
    if (reached) REQUIRE(st.mean_time_reached == time_sum / reached);
  }

  // identical byte-for-byte report regardless of the worker count
  set_worker_count(4);
  BenchReport rep4 = run_bench(R.sys, *R.src, R.table, cfg);
  set_worker_count(prior_workers);
  REQUIRE(render_rows_tsv(rep4) == render_rows_tsv(rep));
  REQUIRE(render_table(rep4) == render_table(rep));
}
