#ifndef REACHTRACK_GRID_SOLVER_HPP
#define REACHTRACK_GRID_SOLVER_HPP

// grid dynamic programming for the tracking game's value function.
// semantics: V(r, t) is the worst-case running-max separation cost over horizon t,
//   V(r, 0) = l(r),   dV/dt = H(r, grad V)  where V > l,   V >= l always,
// advanced with a global Lax-Friedrichs numerical Hamiltonian until the values
// stop changing (the infinite-horizon bound). larger planner authority (beta)
// can only help the adversary, so V is nondecreasing in beta.

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "reachtrack/dynamics.hpp"
#include "reachtrack/grid.hpp"

namespace reachtrack {

struct ValueSlice {
  GridSpec grid;
  Vec beta;               // full authority vector for this slice
  Vec values;             // node-sampled V, size grid.size()
  std::vector<Vec> grads; // one node-sampled array per state dim
  double v_min = 0.0;
  double tolerance = 0.0;
  double cfl = 0.5;
  bool converged = false;
  int iterations = 0;
  Vec sup_change_history;
};

// grid matching the system's periodic dims
inline GridSpec grid_for(const RelSys& sys, const Vec& mins, const Vec& maxs,
                         const std::vector<int>& counts) {
  GridSpec g;
  g.mins = mins;
  g.maxs = maxs;
  g.counts = counts;
  g.periodic.assign(mins.size(), 0);
  for (int pd : sys.periodic_dims) g.periodic[std::size_t(pd)] = 1;
  g.validate();
  require(int(mins.size()) == sys.n_r, sys.id + ": grid dimension mismatch");
  return g;
}

// node-sampled dynamics terms, shared by every beta slice on the same grid.
// input columns are ordered [tracker..., planner..., disturbance...].
struct DynamicsCache {
  int n_r = 0, n_in = 0, nt = 0, np = 0, nd = 0;
  std::size_t N = 0;
  Vec drift;  // N * n_r
  Vec cols;   // N * n_in * n_r
  Vec cost;   // N
  double cost_min = 0.0, cost_max = 0.0;
};

inline DynamicsCache build_dynamics_cache(const RelSys& sys, const GridSpec& grid) {
  DynamicsCache c;
  c.n_r = sys.n_r;
  c.nt = sys.n_tracker();
  c.np = sys.n_planner();
  c.nd = sys.n_dist();
  c.n_in = c.nt + c.np + c.nd;
  c.N = grid.size();
  c.drift.resize(c.N * std::size_t(c.n_r));
  c.cols.resize(c.N * std::size_t(c.n_in) * std::size_t(c.n_r));
  c.cost.resize(c.N);
  std::vector<double> chunk_min(kFixedChunks, std::numeric_limits<double>::infinity());
  std::vector<double> chunk_max(kFixedChunks, -std::numeric_limits<double>::infinity());
  parallel_chunks(c.N, [&](int chunk, std::size_t b, std::size_t e) {
    double x[10];
    for (std::size_t idx = b; idx < e; ++idx) {
      grid.node(idx, x);
      sys.drift(x, &c.drift[idx * std::size_t(c.n_r)]);
      double* dst = &c.cols[idx * std::size_t(c.n_in) * std::size_t(c.n_r)];
      for (int i = 0; i < c.nt; ++i, dst += c.n_r) sys.tracker_cols[std::size_t(i)](x, dst);
      for (int j = 0; j < c.np; ++j, dst += c.n_r) sys.planner_cols[std::size_t(j)](x, dst);
      for (int k = 0; k < c.nd; ++k, dst += c.n_r) sys.dist_cols[std::size_t(k)](x, dst);
      double l = sys.cost_at(x);
      c.cost[idx] = l;
      chunk_min[std::size_t(chunk)] = std::min(chunk_min[std::size_t(chunk)], l);
      chunk_max[std::size_t(chunk)] = std::max(chunk_max[std::size_t(chunk)], l);
    }
  });
  c.cost_min = *std::min_element(chunk_min.begin(), chunk_min.end());
  c.cost_max = *std::max_element(chunk_max.begin(), chunk_max.end());
  return c;
}

// per-input optimization kind for the Hamiltonian: tracker minimizes, the rest maximize
inline void input_boxes(const RelSys& sys, const Vec& beta, Vec& lo, Vec& hi,
                        std::vector<int>& maximize) {
  BoxBounds pb = sys.planner_bounds(beta);
  lo.clear();
  hi.clear();
  maximize.clear();
  for (int i = 0; i < sys.n_tracker(); ++i) {
    lo.push_back(sys.tracker_bounds.lo[std::size_t(i)]);
    hi.push_back(sys.tracker_bounds.hi[std::size_t(i)]);
    maximize.push_back(0);
  }
  for (int j = 0; j < sys.n_planner(); ++j) {
    lo.push_back(pb.lo[std::size_t(j)]);
    hi.push_back(pb.hi[std::size_t(j)]);
    maximize.push_back(1);
  }
  for (int k = 0; k < sys.n_dist(); ++k) {
    lo.push_back(sys.dist_bounds.lo[std::size_t(k)]);
    hi.push_back(sys.dist_bounds.hi[std::size_t(k)]);
    maximize.push_back(1);
  }
}

// alpha[d] = max over grid nodes and input-box corners of |rdot_d|; dominates
// |dH/dp_d| at every node, which is what the monotone update needs.
inline Vec dissipation_bounds(const RelSys& sys, const GridSpec& grid, const Vec& beta,
                              const DynamicsCache& cache) {
  Vec lo, hi;
  std::vector<int> maximize;
  input_boxes(sys, beta, lo, hi, maximize);
  int D = cache.n_r, nin = cache.n_in;
  std::vector<Vec> chunk_alpha(kFixedChunks, Vec(std::size_t(D), 0.0));
  parallel_chunks(cache.N, [&](int chunk, std::size_t b, std::size_t e) {
    Vec& am = chunk_alpha[std::size_t(chunk)];
    for (std::size_t idx = b; idx < e; ++idx) {
      const double* drift = &cache.drift[idx * std::size_t(D)];
      const double* cols = &cache.cols[idx * std::size_t(nin) * std::size_t(D)];
      for (int d = 0; d < D; ++d) {
        double xmin = drift[d], xmax = drift[d];
        for (int in = 0; in < nin; ++in) {
          double cv = cols[in * D + d];
          double a = lo[std::size_t(in)] * cv, bb = hi[std::size_t(in)] * cv;
          xmin += std::min(a, bb);
          xmax += std::max(a, bb);
        }
        double m = std::max(std::fabs(xmin), std::fabs(xmax));
        if (m > am[std::size_t(d)]) am[std::size_t(d)] = m;
      }
    }
  });
  Vec alpha(std::size_t(D), 0.0);
  for (const auto& ca : chunk_alpha)
    for (int d = 0; d < D; ++d) alpha[std::size_t(d)] = std::max(alpha[std::size_t(d)], ca[std::size_t(d)]);
  return alpha;
}

// analytic Hamiltonian from cached node terms
inline double hamiltonian_cached(const DynamicsCache& c, std::size_t idx, const double* p,
                                 const double* lo, const double* hi, const int* maximize) {
  const double* drift = &c.drift[idx * std::size_t(c.n_r)];
  const double* cols = &c.cols[idx * std::size_t(c.n_in) * std::size_t(c.n_r)];
  double h = 0;
  for (int d = 0; d < c.n_r; ++d) h += p[d] * drift[d];
  for (int in = 0; in < c.n_in; ++in) {
    double cdot = 0;
    const double* col = cols + in * c.n_r;
    for (int d = 0; d < c.n_r; ++d) cdot += p[d] * col[d];
    h += maximize[in] ? optval_max(cdot, lo[in], hi[in]) : optval_min(cdot, lo[in], hi[in]);
  }
  return h;
}

// dissipated numerical Hamiltonian. the jump term enters with +alpha so the
// explicit update below stays monotone under the CFL bound.
inline double lf_numerical_hamiltonian(const DynamicsCache& c, std::size_t idx,
                                       const double* p_minus, const double* p_plus,
                                       const double* alpha, const double* lo,
                                       const double* hi, const int* maximize) {
  double p_avg[10];
  for (int d = 0; d < c.n_r; ++d) p_avg[d] = 0.5 * (p_minus[d] + p_plus[d]);
  double h = hamiltonian_cached(c, idx, p_avg, lo, hi, maximize);
  for (int d = 0; d < c.n_r; ++d) h += 0.5 * alpha[d] * (p_plus[d] - p_minus[d]);
  return h;
}

struct SweepStats {
  double sup_change = 0.0;
  double value_sum = 0.0;  // poisoned by any NaN/Inf, used for blowup detection
};

// one explicit step of V <- max(l, V + dt * H_LF). writes vout, reads vin.
// the jump term uses per-node dissipation (max |rdot_d| over the input box at
// that node); the global alpha argument only gates the CFL bound. per-node
// coefficients keep the scheme monotone while avoiding the severe smearing a
// single global bound causes wherever the local speeds are much smaller.
inline SweepStats vi_step(const GridSpec& grid, const DynamicsCache& cache, const Vec& lo,
                          const Vec& hi, const std::vector<int>& maximize, const Vec& alpha,
                          double dt, double cfl_factor, const Vec& vin, Vec& vout) {
  int D = grid.dims();
  double cfl_sum = 0;
  for (int d = 0; d < D; ++d) cfl_sum += alpha[std::size_t(d)] / grid.spacing(d);
  require(dt > 0.0, "vi_step: nonpositive dt");
  if (dt * cfl_sum > cfl_factor * (1.0 + 1e-9))
    throw config_error("vi_step: dt violates the CFL bound");
  auto strides = grid.strides();
  double inv_h[10];
  for (int d = 0; d < D; ++d) inv_h[d] = 1.0 / grid.spacing(d);
  std::vector<SweepStats> chunk_stats(kFixedChunks);
  parallel_chunks(grid.size(), [&](int chunk, std::size_t b, std::size_t e) {
    int coord[10];
    grid.node_coords(b, coord);
    double pm[10], pp[10], aloc[10];
    double sup = 0.0, vsum = 0.0;
    for (std::size_t idx = b; idx < e; ++idx) {
      double vc = vin[idx];
      {
        const double* drift = &cache.drift[idx * std::size_t(D)];
        const double* cols = &cache.cols[idx * std::size_t(cache.n_in) * std::size_t(D)];
        for (int d = 0; d < D; ++d) {
          double xmin = drift[d], xmax = drift[d];
          for (int in = 0; in < cache.n_in; ++in) {
            double cv = cols[in * D + d];
            double a = lo[std::size_t(in)] * cv, bb = hi[std::size_t(in)] * cv;
            xmin += std::min(a, bb);
            xmax += std::max(a, bb);
          }
          aloc[d] = std::max(std::fabs(xmin), std::fabs(xmax));
        }
      }
      for (int d = 0; d < D; ++d) {
        std::size_t dd = std::size_t(d);
        int n = grid.counts[dd];
        std::size_t st = strides[dd];
        bool has_left = coord[d] > 0, has_right = coord[d] < n - 1;
        double vl = 0, vr = 0;
        if (grid.periodic[dd]) {
          vl = has_left ? vin[idx - st] : vin[idx + st * std::size_t(n - 1)];
          vr = has_right ? vin[idx + st] : vin[idx - st * std::size_t(n - 1)];
          pm[d] = (vc - vl) * inv_h[d];
          pp[d] = (vr - vc) * inv_h[d];
        } else {
          if (has_left && has_right) {
            pm[d] = (vc - vin[idx - st]) * inv_h[d];
            pp[d] = (vin[idx + st] - vc) * inv_h[d];
          } else if (has_right) {  // lower edge: one-sided from the interior
            pp[d] = (vin[idx + st] - vc) * inv_h[d];
            pm[d] = pp[d];
          } else {  // upper edge
            pm[d] = (vc - vin[idx - st]) * inv_h[d];
            pp[d] = pm[d];
          }
        }
      }
      double hlf = lf_numerical_hamiltonian(cache, idx, pm, pp, aloc, lo.data(),
                                            hi.data(), maximize.data());
      double vnew = vc + dt * hlf;
      double l = cache.cost[idx];
      if (vnew < l) vnew = l;
      vout[idx] = vnew;
      double ch = std::fabs(vnew - vc);
      if (ch > sup) sup = ch;
      vsum += vnew;
      // odometer increment (row-major, last dim fastest)
      for (int d = D - 1; d >= 0; --d) {
        if (++coord[d] < grid.counts[std::size_t(d)]) break;
        coord[d] = 0;
      }
    }
    chunk_stats[std::size_t(chunk)] = {sup, vsum};
  });
  SweepStats total;
  for (const auto& cs : chunk_stats) {
    total.sup_change = std::max(total.sup_change, cs.sup_change);
    total.value_sum += cs.value_sum;
  }
  return total;
}

// central-difference gradient arrays (one-sided on non-periodic edges)
inline std::vector<Vec> node_gradients(const GridSpec& grid, const Vec& values) {
  int D = grid.dims();
  auto strides = grid.strides();
  std::vector<Vec> grads(std::size_t(D), Vec(grid.size()));
  parallel_chunks(grid.size(), [&](int, std::size_t b, std::size_t e) {
    int coord[10];
    grid.node_coords(b, coord);
    for (std::size_t idx = b; idx < e; ++idx) {
      for (int d = 0; d < D; ++d) {
        std::size_t dd = std::size_t(d);
        int n = grid.counts[dd];
        std::size_t st = strides[dd];
        double h = grid.spacing(d);
        bool has_left = coord[d] > 0, has_right = coord[d] < n - 1;
        double g;
        if (grid.periodic[dd]) {
          double vl = has_left ? values[idx - st] : values[idx + st * std::size_t(n - 1)];
          double vr = has_right ? values[idx + st] : values[idx - st * std::size_t(n - 1)];
          g = (vr - vl) / (2.0 * h);
        } else if (has_left && has_right) {
          g = (values[idx + st] - values[idx - st]) / (2.0 * h);
        } else if (has_right) {
          g = (values[idx + st] - values[idx]) / h;
        } else {
          g = (values[idx] - values[idx - st]) / h;
        }
        grads[std::size_t(d)][idx] = g;
      }
      for (int d = D - 1; d >= 0; --d) {
        if (++coord[d] < grid.counts[std::size_t(d)]) break;
        coord[d] = 0;
      }
    }
  });
  return grads;
}

struct SolveOptions {
  double tolerance = -1.0;  // < 0: 1e-4 * (cost range over the grid)
  int max_iters = 20000;
  double cfl_factor = 0.5;
};

inline ValueSlice solve_slice(const RelSys& sys, const GridSpec& grid, const Vec& beta,
                              const SolveOptions& opt = {},
                              const DynamicsCache* shared_cache = nullptr) {
  sys.validate();
  grid.validate();
  require(int(beta.size()) == sys.n_beta(), sys.id + ": beta dimension mismatch");
  DynamicsCache local;
  const DynamicsCache* cache = shared_cache;
  if (!cache) {
    local = build_dynamics_cache(sys, grid);
    cache = &local;
  }
  Vec lo, hi;
  std::vector<int> maximize;
  input_boxes(sys, beta, lo, hi, maximize);
  Vec alpha = dissipation_bounds(sys, grid, beta, *cache);
  double cfl_sum = 0;
  for (int d = 0; d < grid.dims(); ++d) cfl_sum += alpha[std::size_t(d)] / grid.spacing(d);
  require(cfl_sum > 0.0, sys.id + ": degenerate dynamics (zero dissipation)");
  double dt = opt.cfl_factor / cfl_sum;
  double cost_range = cache->cost_max - cache->cost_min;
  require(cost_range > 0.0, sys.id + ": separation cost is constant over the grid");
  double tol = opt.tolerance > 0 ? opt.tolerance : 1e-4 * cost_range;

  ValueSlice out;
  out.grid = grid;
  out.beta = beta;
  out.tolerance = tol;
  out.cfl = opt.cfl_factor;
  out.values = cache->cost;  // V(r, 0) = l(r)
  Vec next(out.values.size());
  for (int it = 0; it < opt.max_iters; ++it) {
    SweepStats st = vi_step(grid, *cache, lo, hi, maximize, alpha, dt, opt.cfl_factor,
                            out.values, next);
    out.values.swap(next);
    out.iterations = it + 1;
    out.sup_change_history.push_back(st.sup_change);
    if (!std::isfinite(st.value_sum) || !std::isfinite(st.sup_change))
      throw numerical_error(sys.id + ": non-finite values at iteration " +
                            std::to_string(it + 1));
    if (st.sup_change < tol) {
      out.converged = true;
      break;
    }
  }
  out.grads = node_gradients(grid, out.values);
  out.v_min = *std::min_element(out.values.begin(), out.values.end());
  return out;
}

// family of slices over a scalar authority ladder (all beta components move together)
struct ValueFamily {
  std::string system_id;
  GridSpec grid;
  std::vector<double> betas;
  std::vector<ValueSlice> slices;

  void validate() const {
    require(!slices.empty(), "value family: empty");
    require(betas.size() == slices.size(), "value family: beta/slice count mismatch");
    for (std::size_t i = 1; i < betas.size(); ++i)
      require(betas[i] > betas[i - 1], "value family: betas not strictly increasing");
  }
};

inline ValueFamily solve_family(const RelSys& sys, const GridSpec& grid,
                                const std::vector<double>& betas, const SolveOptions& opt = {}) {
  require(!betas.empty(), sys.id + ": empty beta list");
  ValueFamily fam;
  fam.system_id = sys.id;
  fam.grid = grid;
  fam.betas = betas;
  DynamicsCache cache = build_dynamics_cache(sys, grid);
  for (double b : betas) fam.slices.push_back(solve_slice(sys, grid, sys.beta_vector(b), opt, &cache));
  fam.validate();
  return fam;
}

// ---- value-table file: text header + little-endian float64 payload ------------

inline void save_value_table(const std::string& path, const ValueSlice& s,
                             const std::string& system_id) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "cannot open for writing: " + path);
  os << "reachtrack-value-table v1\n";
  os << "system " << system_id << "\n";
  os << "dims " << s.grid.dims() << "\n";
  os << "counts";
  for (int c : s.grid.counts) os << ' ' << c;
  os << "\nmins " << join_g17(s.grid.mins) << "\n";
  os << "maxs " << join_g17(s.grid.maxs) << "\n";
  os << "periodic";
  for (auto p : s.grid.periodic) os << ' ' << int(p);
  os << "\nbeta " << join_g17(s.beta) << "\n";
  os << "v_min " << fmt_g17(s.v_min) << "\n";
  os << "tolerance " << fmt_g17(s.tolerance) << "\n";
  os << "cfl " << fmt_g17(s.cfl) << "\n";
  os << "converged " << (s.converged ? 1 : 0) << "\n";
  os << "iterations " << s.iterations << "\n";
  os << "end-header\n";
  write_f64_le(os, s.values.data(), s.values.size());
  for (const auto& g : s.grads) write_f64_le(os, g.data(), g.size());
  require(bool(os), "write failed: " + path);
}

inline ValueSlice load_value_table(const std::string& path, std::string* system_id = nullptr) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "cannot open: " + path);
  std::string line;
  std::getline(is, line);
  require(line == "reachtrack-value-table v1", path + ": not a value-table file");
  ValueSlice s;
  std::string sys_id;
  int dims = 0, converged = 0;
  while (std::getline(is, line) && line != "end-header") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "system") ls >> sys_id;
    else if (key == "dims") ls >> dims;
    else if (key == "counts") { int c; while (ls >> c) s.grid.counts.push_back(c); }
    else if (key == "mins") { double v; while (ls >> v) s.grid.mins.push_back(v); }
    else if (key == "maxs") { double v; while (ls >> v) s.grid.maxs.push_back(v); }
    else if (key == "periodic") { int p; while (ls >> p) s.grid.periodic.push_back(std::uint8_t(p)); }
    else if (key == "beta") { double v; while (ls >> v) s.beta.push_back(v); }
    else if (key == "v_min") ls >> s.v_min;
    else if (key == "tolerance") ls >> s.tolerance;
    else if (key == "cfl") ls >> s.cfl;
    else if (key == "converged") ls >> converged;
    else if (key == "iterations") ls >> s.iterations;
    else throw contract_error(path + ": unknown header key '" + key + "'");
  }
  require(line == "end-header", path + ": truncated header");
  s.converged = converged != 0;
  s.grid.validate();
  require(dims == s.grid.dims(), path + ": dims disagrees with counts");
  std::size_t n = s.grid.size();
  s.values.resize(n);
  read_f64_le(is, s.values.data(), n);
  s.grads.assign(std::size_t(dims), Vec(n));
  for (auto& g : s.grads) read_f64_le(is, g.data(), n);
  if (system_id) *system_id = sys_id;
  return s;
}

}  // namespace reachtrack

#endif
