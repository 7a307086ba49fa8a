#ifndef REACHTRACK_CLI_HPP
#define REACHTRACK_CLI_HPP

// command-line front end. subcommands:
//   solve     compute grid value tables for each authority level and save them
//   train     train the neural value function and save a checkpoint
//   teb       build and print the tracking-error-bound table
//   simulate  one full online run on a seeded random map (trajectory + SVG)
//   bench     the four-baseline comparison on seeded random maps
// common flags: --config FILE, --seed N, --out-dir DIR, --backend grid|neural,
// --threads N. exit codes: 0 ok, 1 usage/contract/config errors, 2 numerical.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "reachtrack/bench.hpp"
#include "reachtrack/config.hpp"
#include "reachtrack/neural.hpp"

namespace reachtrack {

namespace cli_detail {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::string backend = "grid";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

inline void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "configuration file (INI-style sections)");
  cmd->add_option("--seed", o.seed, "seed base overriding the config file");
  cmd->add_option("--out-dir", o.out_dir, "directory for output artifacts");
  cmd->add_option("--backend", o.backend, "value-function backend")
      ->check(CLI::IsMember({"grid", "neural"}));
  cmd->add_option("--threads", o.threads, "worker threads (0 = hardware default)");
}

inline Config load_config(const CommonOpts& o) {
  if (o.config_path.empty()) return Config{};
  return Config::load(o.config_path);
}

inline std::uint64_t resolve_seed(const Config& cfg, const CommonOpts& o, const char* key) {
  if (o.seed_set) return o.seed;
  return cfg.get_u64(key, 1);
}

inline void apply_threads(const CommonOpts& o) {
  if (o.threads > 0) set_worker_count(o.threads);
}

inline RelSys resolve_system(const Config& cfg) {
  return builtin_system(cfg.get_str("system.name", "dubins"));
}

// desk-scale default grids for the two systems meant to be solved on a grid
inline void default_grid(const RelSys& sys, Vec& mins, Vec& maxs, std::vector<int>& counts) {
  if (sys.id == "double_integrator") {
    mins = {-2.0, -2.0};
    maxs = {2.0, 2.0};
    counts = {81, 81};
  } else if (sys.id == "dubins") {
    mins = {-3.0, -3.0, -kPi, -2.0};
    maxs = {3.0, 3.0, kPi, 2.0};
    counts = {31, 31, 25, 15};
  } else {
    throw config_error(sys.id +
                       ": no default grid at this scale; set grid.mins/maxs/counts explicitly");
  }
}

inline GridSpec resolve_grid(const RelSys& sys, const Config& cfg) {
  Vec mins, maxs;
  std::vector<int> counts;
  if (cfg.has("grid.mins") || cfg.has("grid.maxs") || cfg.has("grid.counts")) {
    require(cfg.has("grid.mins") && cfg.has("grid.maxs") && cfg.has("grid.counts"),
            "grid.mins, grid.maxs, grid.counts must be given together");
    mins = cfg.get_vec("grid.mins", {});
    maxs = cfg.get_vec("grid.maxs", {});
    Vec craw = cfg.get_vec("grid.counts", {});
    for (double c : craw) counts.push_back(int(std::llround(c)));
  } else {
    default_grid(sys, mins, maxs, counts);
  }
  return grid_for(sys, mins, maxs, counts);
}

inline std::vector<double> resolve_betas(const RelSys& sys, const Config& cfg) {
  if (cfg.has("grid.betas")) {
    Vec b = cfg.get_vec("grid.betas", {});
    return std::vector<double>(b.begin(), b.end());
  }
  return beta_ladder(sys.beta_scalar_lo(), sys.beta_scalar_hi(),
                     cfg.get_double("teb.delta_beta", 0.25));
}

inline SolveOptions resolve_solve_options(const Config& cfg) {
  SolveOptions opt;
  opt.tolerance = cfg.get_double("grid.tolerance", -1.0);
  opt.max_iters = cfg.get_int("grid.max_iters", 20000);
  opt.cfl_factor = cfg.get_double("grid.cfl", 0.5);
  return opt;
}

inline std::string value_table_path(const std::string& dir, const std::string& sys_id, int i) {
  return dir + "/value_" + sys_id + "_" + std::to_string(i) + ".rtv";
}

inline std::string checkpoint_path(const std::string& dir, const std::string& sys_id) {
  return dir + "/net_" + sys_id + ".rtn";
}

inline bool grid_equal(const GridSpec& a, const GridSpec& b) {
  return a.counts == b.counts && a.mins == b.mins && a.maxs == b.maxs && a.periodic == b.periodic;
}

// load previously solved tables when they match the requested family exactly;
// otherwise solve from scratch and save
inline ValueFamily stage_family(const RelSys& sys, const GridSpec& grid,
                                const std::vector<double>& betas, const SolveOptions& opt,
                                const std::string& out_dir, bool force_solve,
                                std::ostream& log) {
  ValueFamily fam;
  fam.system_id = sys.id;
  fam.grid = grid;
  fam.betas = betas;
  if (!force_solve) {
    try {
      for (std::size_t i = 0; i < betas.size(); ++i) {
        std::string sid;
        ValueSlice s = load_value_table(value_table_path(out_dir, sys.id, int(i)), &sid);
        require(sid == sys.id, "staged table is for a different system");
        require(grid_equal(s.grid, grid), "staged table grid differs");
        Vec want = sys.beta_vector(betas[i]);
        require(s.beta.size() == want.size(), "staged table beta dimension differs");
        for (std::size_t j = 0; j < want.size(); ++j)
          require(std::abs(s.beta[j] - want[j]) <= 1e-12, "staged table beta differs");
        fam.slices.push_back(std::move(s));
      }
      fam.validate();
      log << "loaded " << betas.size() << " staged value tables from " << out_dir << "\n";
      return fam;
    } catch (const std::exception&) {
      fam.slices.clear();  // stale or missing: fall through to a fresh solve
    }
  }
  fam = solve_family(sys, grid, betas, opt);
  for (std::size_t i = 0; i < fam.slices.size(); ++i)
    save_value_table(value_table_path(out_dir, sys.id, int(i)), fam.slices[i], sys.id);
  return fam;
}

inline std::shared_ptr<const ValueSource> make_source(const RelSys& sys, const Config& cfg,
                                                      const CommonOpts& o, std::ostream& log) {
  if (o.backend == "neural") {
    std::string path = checkpoint_path(o.out_dir, sys.id);
    if (!std::filesystem::exists(path))
      throw config_error("no checkpoint at " + path + "; run the train subcommand first");
    SirenNet net = load_checkpoint(path);
    log << "loaded checkpoint " << path << " (iteration " << net.iteration << ")\n";
    return std::make_shared<NeuralValueSource>(make_neural_source(sys, std::move(net)));
  }
  ValueFamily fam = stage_family(sys, resolve_grid(sys, cfg), resolve_betas(sys, cfg),
                                 resolve_solve_options(cfg), o.out_dir, false, log);
  return make_grid_source(sys, std::move(fam));
}

inline TrainConfig resolve_train_config(const RelSys& sys, const Config& cfg,
                                        std::uint64_t seed) {
  TrainConfig t;
  t.pretrain_iters = cfg.get_int("train.pretrain_iters", t.pretrain_iters);
  t.train_iters = cfg.get_int("train.train_iters", t.train_iters);
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
  t.lambda = cfg.get_double("train.lambda", t.lambda);
  t.horizon = cfg.get_double("train.horizon", t.horizon);
  t.boundary_frac = cfg.get_double("train.boundary_frac", t.boundary_frac);
  t.hidden_width = cfg.get_int("train.hidden_width", t.hidden_width);
  t.hidden_layers = cfg.get_int("train.hidden_layers", t.hidden_layers);
  t.omega0 = cfg.get_double("train.omega0", t.omega0);
  t.seed = seed;
  if (cfg.has("train.domain_lo") || cfg.has("train.domain_hi")) {
    t.domain_lo = cfg.get_vec("train.domain_lo", {});
    t.domain_hi = cfg.get_vec("train.domain_hi", {});
  } else {
    std::vector<int> counts;
    default_grid(sys, t.domain_lo, t.domain_hi, counts);
  }
  return t;
}

inline TebTable resolve_teb(const ValueSource& src, const Config& cfg, std::uint64_t seed) {
  return build_teb_table(src, cfg.get_double("teb.delta_beta", 0.25),
                         cfg.get_double("teb.eps_frac", 0.02), seed);
}

inline MapGenParams resolve_map_params(const Config& cfg) {
  MapGenParams p;
  p.world_lo = cfg.get_vec("map.world_lo", p.world_lo);
  p.world_hi = cfg.get_vec("map.world_hi", p.world_hi);
  p.start = cfg.get_vec("map.start", p.start);
  p.goal = cfg.get_vec("map.goal", p.goal);
  p.goal_radius = cfg.get_double("map.goal_radius", p.goal_radius);
  p.n_obstacles = cfg.get_int("map.n_obstacles", p.n_obstacles);
  p.r_min = cfg.get_double("map.r_min", p.r_min);
  p.r_max = cfg.get_double("map.r_max", p.r_max);
  p.plan_resolution = cfg.get_double("run.plan_resolution", p.plan_resolution);
  return p;
}

inline RunConfig resolve_run_config(const Config& cfg, std::uint64_t seed) {
  RunConfig r;
  r.dt = cfg.get_double("run.dt", r.dt);
  r.max_time = cfg.get_double("run.max_time", r.max_time);
  r.goal_tol = cfg.get_double("run.goal_tol", r.goal_tol);
  r.plan_resolution = cfg.get_double("run.plan_resolution", r.plan_resolution);
  r.stall_limit = cfg.get_int("run.stall_limit", r.stall_limit);
  r.reset_attempts = cfg.get_int("run.reset_attempts", r.reset_attempts);
  r.seed = seed;
  return r;
}

inline MppiConfig resolve_mppi(const Config& cfg) {
  MppiConfig m;
  m.samples = cfg.get_int("mppi.samples", m.samples);
  m.horizon_steps = cfg.get_int("mppi.horizon_steps", m.horizon_steps);
  m.horizon_dt = cfg.get_double("mppi.horizon_dt", m.horizon_dt);
  m.temperature = cfg.get_double("mppi.temperature", m.temperature);
  m.noise_frac = cfg.get_double("mppi.noise_frac", m.noise_frac);
  m.lookahead = cfg.get_double("mppi.lookahead", m.lookahead);
  m.collision_penalty = cfg.get_double("mppi.collision_penalty", m.collision_penalty);
  m.plan_resolution = cfg.get_double("mppi.plan_resolution", m.plan_resolution);
  return m;
}

inline int cmd_solve(const CommonOpts& o, std::ostream& log) {
  Config cfg = load_config(o);
  RelSys sys = resolve_system(cfg);
  GridSpec grid = resolve_grid(sys, cfg);
  std::vector<double> betas = resolve_betas(sys, cfg);
  ValueFamily fam =
      stage_family(sys, grid, betas, resolve_solve_options(cfg), o.out_dir, true, log);
  log << "system " << sys.id << ", grid";
  for (int c : grid.counts) log << " " << c;
  log << "\n";
  for (std::size_t i = 0; i < fam.slices.size(); ++i) {
    const ValueSlice& s = fam.slices[i];
    log << "beta " << fmt_g17(fam.betas[i]) << ": iterations " << s.iterations << ", "
        << (s.converged ? "converged" : "NOT converged") << ", min value " << fmt_g17(s.v_min)
        << ", saved " << value_table_path(o.out_dir, sys.id, int(i)) << "\n";
  }
  return 0;
}

inline int cmd_train(const CommonOpts& o, std::ostream& log) {
  Config cfg = load_config(o);
  RelSys sys = resolve_system(cfg);
  std::uint64_t seed = resolve_seed(cfg, o, "run.seed");
  TrainConfig tcfg = resolve_train_config(sys, cfg, seed);
  TrainResult res = train(sys, tcfg);
  std::string path = checkpoint_path(o.out_dir, sys.id);
  save_checkpoint(path, res.net);
  const LossParts& first = res.history.front();
  const LossParts& lastp = res.history.back();
  log << "trained " << sys.id << " for " << res.history.size() << " iterations\n";
  log << "loss first: total " << fmt_g17(first.total) << " boundary " << fmt_g17(first.h1)
      << " residual " << fmt_g17(first.h2) << "\n";
  log << "loss last:  total " << fmt_g17(lastp.total) << " boundary " << fmt_g17(lastp.h1)
      << " residual " << fmt_g17(lastp.h2) << "\n";
  log << "horizon convergence gap " << fmt_g17(res.convergence_gap) << "\n";
  log << "saved " << path << "\n";
  return 0;
}

inline int cmd_teb(const CommonOpts& o, std::ostream& log) {
  Config cfg = load_config(o);
  RelSys sys = resolve_system(cfg);
  std::uint64_t seed = resolve_seed(cfg, o, "run.seed");
  auto src = make_source(sys, cfg, o, log);
  TebTable table = resolve_teb(*src, cfg, seed);
  log << "beta\tlevel\tradius\n";
  for (const auto& e : table.entries)
    log << fmt_g17(e.beta) << "\t" << fmt_g17(e.level) << "\t" << fmt_g17(e.radius) << "\n";
  std::string path = o.out_dir + "/teb_" + sys.id + ".rtt";
  save_teb_table(path, table);
  log << "saved " << path << "\n";
  return 0;
}

inline int cmd_simulate(const CommonOpts& o, std::ostream& log) {
  Config cfg = load_config(o);
  RelSys sys = resolve_system(cfg);
  std::uint64_t seed = resolve_seed(cfg, o, "run.seed");
  auto src = make_source(sys, cfg, o, log);
  TebTable table = resolve_teb(*src, cfg, seed);
  MapGenParams mp = resolve_map_params(cfg);
  ObstacleMap map = random_map(derive_seed(seed, 0x6d6170ull), mp, table.steb().radius);
  RunConfig rc = resolve_run_config(cfg, seed);
  RunResult res = run_online(sys, *src, table, map, rc);
  std::string tpath = o.out_dir + "/trajectory_" + sys.id + ".tsv";
  save_trajectory(tpath, res, sys.id, seed);
  std::string spath = o.out_dir + "/trajectory_" + sys.id + ".svg";
  save_text(spath, render_svg(sys, res.log, map, table));
  log << "outcome " << outcome_name(res.outcome) << " after " << fmt_g17(res.time)
      << " s (" << res.steps << " steps, " << res.replans << " replans, " << res.resets
      << " resets, " << res.invariant_violations << " invariant violations)\n";
  log << "saved " << tpath << " and " << spath << "\n";
  return 0;
}

inline int cmd_bench(const CommonOpts& o, std::ostream& log) {
  Config cfg = load_config(o);
  RelSys sys = resolve_system(cfg);
  std::uint64_t seed = resolve_seed(cfg, o, "bench.seed");
  auto src = make_source(sys, cfg, o, log);
  TebTable table = resolve_teb(*src, cfg, seed);
  BenchConfig bc;
  bc.n_runs = cfg.get_int("bench.n_runs", 20);
  bc.seed_base = seed;
  bc.baselines.clear();
  for (const std::string& w : cfg.get_words("bench.baselines", {"F", "MF", "PF", "MPPI"}))
    bc.baselines.push_back(baseline_from_name(w));
  bc.map_params = resolve_map_params(cfg);
  bc.run_cfg = resolve_run_config(cfg, seed);
  bc.mppi_cfg = resolve_mppi(cfg);
  BenchReport rep = run_bench(sys, *src, table, bc);
  std::string text = render_table(rep);
  log << text;
  save_text(o.out_dir + "/bench_report.txt", text);
  save_text(o.out_dir + "/bench_rows.tsv", render_rows_tsv(rep));
  log << "saved " << o.out_dir << "/bench_report.txt and " << o.out_dir << "/bench_rows.tsv\n";
  return 0;
}

}  // namespace cli_detail

// programmatic entry point used by both the binary and in-process tests
inline int cli(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"parametric reach-avoid tracking: value functions, error bounds, safe planning"};
  app.require_subcommand(1);
  cli_detail::CommonOpts opts[5];
  const char* names[5] = {"solve", "train", "teb", "simulate", "bench"};
  const char* descs[5] = {"compute and save grid value tables",
                          "train the neural value function",
                          "build and print the tracking-error-bound table",
                          "run the online loop once and export trajectory + SVG",
                          "run the four-baseline benchmark"};
  CLI::App* subs[5];
  for (int i = 0; i < 5; ++i) {
    subs[i] = app.add_subcommand(names[i], descs[i]);
    cli_detail::add_common(subs[i], opts[i]);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 1;
  }
  try {
    for (int i = 0; i < 5; ++i) {
      if (!subs[i]->parsed()) continue;
      opts[i].seed_set = subs[i]->count("--seed") > 0;
      const cli_detail::CommonOpts& o = opts[i];
      cli_detail::apply_threads(o);
      std::filesystem::create_directories(o.out_dir);
      switch (i) {
        case 0: return cli_detail::cmd_solve(o, out);
        case 1: return cli_detail::cmd_train(o, out);
        case 2: return cli_detail::cmd_teb(o, out);
        case 3: return cli_detail::cmd_simulate(o, out);
        case 4: return cli_detail::cmd_bench(o, out);
      }
    }
    err << "no subcommand given\n" << app.help();
    return 1;
  } catch (const numerical_error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const contract_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace reachtrack

#endif
