#ifndef REACHTRACK_NEURAL_HPP
#define REACHTRACK_NEURAL_HPP

// self-supervised neural solver for the parameterized value function.
// a sinusoidal MLP V_theta(r, t, beta) is trained so that
//   V(r, 0, beta) = cost(r)                       (boundary term h1)
//   max(cost - V, H(r, grad_r V; beta) - dV/dt) = 0   (variational-inequality residual h2)
// where t is remaining horizon. gradients of the network output with respect to
// inputs AND parameters are computed analytically (no finite differences):
// a tangent (dual-number) forward pass carries the directional derivative
// c . dV/dx, and reverse mode through that pass yields d/dtheta of both the
// value and the directional derivative. sin/cos of each unit are computed once
// per sample and reused by every pass.

#include <cstdint>
#include <fstream>
#include <sstream>

#include "reachtrack/dynamics.hpp"
#include "reachtrack/value_source.hpp"

namespace reachtrack {

// ---- network -------------------------------------------------------------------

struct SirenNet {
  std::string system_id;
  std::vector<int> widths;  // {n_in, hidden..., 1}; sine after all but the last map
  double omega0 = 30.0;
  Vec norm_lo, norm_hi;  // physical range per input; mapped affinely to [-1, 1]
  double horizon = 3.0;
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  Vec theta;  // all weights: per layer, W row-major (out x in) then bias (out)

  int n_in() const { return widths.front(); }
  int n_layers() const { return int(widths.size()) - 1; }
  int layer_in(int l) const { return widths[std::size_t(l)]; }
  int layer_out(int l) const { return widths[std::size_t(l) + 1]; }
  std::size_t w_offset(int l) const {
    std::size_t off = 0;
    for (int k = 0; k < l; ++k)
      off += std::size_t(layer_out(k)) * std::size_t(layer_in(k)) + std::size_t(layer_out(k));
    return off;
  }
  std::size_t b_offset(int l) const {
    return w_offset(l) + std::size_t(layer_out(l)) * std::size_t(layer_in(l));
  }
  std::size_t param_count() const { return w_offset(n_layers()); }

  double scale(int i) const {
    return 2.0 / (norm_hi[std::size_t(i)] - norm_lo[std::size_t(i)]);
  }
  double normalize(int i, double v) const {
    return scale(i) * (v - norm_lo[std::size_t(i)]) - 1.0;
  }

  void validate() const {
    require(widths.size() >= 2, "net: need at least one affine map");
    require(widths.back() == 1, "net: output must be scalar");
    for (int w : widths) require(w >= 1, "net: nonpositive layer width");
    require(int(norm_lo.size()) == n_in() && int(norm_hi.size()) == n_in(),
            "net: normalization size mismatch");
    for (int i = 0; i < n_in(); ++i)
      require(norm_hi[std::size_t(i)] > norm_lo[std::size_t(i)],
              "net: normalization range must be positive");
    require(theta.size() == param_count(), "net: parameter count mismatch");
    require(omega0 > 0, "net: omega0 must be positive");
    for (double v : theta) require(std::isfinite(v), "net: non-finite weight");
  }
};

// standard sinusoidal-network initialization: first layer U(-1/in, 1/in), later
// layers U(-sqrt(6/in)/omega0, +sqrt(6/in)/omega0); biases U(-1/sqrt(in), 1/sqrt(in)).
inline SirenNet make_siren(const std::vector<int>& widths, double omega0, const Vec& norm_lo,
                           const Vec& norm_hi, std::uint64_t seed) {
  SirenNet net;
  net.widths = widths;
  net.omega0 = omega0;
  net.norm_lo = norm_lo;
  net.norm_hi = norm_hi;
  net.seed = seed;
  net.theta.assign(net.param_count(), 0.0);
  std::mt19937_64 rng(derive_seed(seed, 0x53495245ull));
  for (int l = 0; l < net.n_layers(); ++l) {
    int in = net.layer_in(l), out = net.layer_out(l);
    double wb = (l == 0) ? 1.0 / in : std::sqrt(6.0 / in) / omega0;
    double bb = 1.0 / std::sqrt(double(in));
    std::size_t wo = net.w_offset(l), bo = net.b_offset(l);
    for (int k = 0; k < out * in; ++k) net.theta[wo + std::size_t(k)] = uniform(rng, -wb, wb);
    for (int k = 0; k < out; ++k) net.theta[bo + std::size_t(k)] = uniform(rng, -bb, bb);
  }
  net.validate();
  return net;
}

// scratch buffers for one sample's forward/backward passes; reusable across samples
struct NetWorkspace {
  std::vector<Vec> a;     // a[0] = normalized input; a[l+1] = sine-layer output
  std::vector<Vec> s, c;  // sin/cos of omega0 * z per sine layer
  std::vector<Vec> zdot, adot;
  Vec u, udot, v, vdot, gx;

  void resize(const SirenNet& net) {
    int L = net.n_layers() - 1;  // sine layers
    a.assign(std::size_t(L) + 1, {});
    s.assign(std::size_t(L), {});
    c.assign(std::size_t(L), {});
    zdot.assign(std::size_t(L), {});
    adot.assign(std::size_t(L) + 1, {});
    a[0].assign(std::size_t(net.n_in()), 0.0);
    adot[0].assign(std::size_t(net.n_in()), 0.0);
    int wmax = net.n_in();
    for (int l = 0; l < L; ++l) {
      int out = net.layer_out(l);
      a[std::size_t(l) + 1].assign(std::size_t(out), 0.0);
      s[std::size_t(l)].assign(std::size_t(out), 0.0);
      c[std::size_t(l)].assign(std::size_t(out), 0.0);
      zdot[std::size_t(l)].assign(std::size_t(out), 0.0);
      adot[std::size_t(l) + 1].assign(std::size_t(out), 0.0);
      wmax = std::max(wmax, out);
    }
    u.assign(std::size_t(wmax), 0.0);
    udot.assign(std::size_t(wmax), 0.0);
    v.assign(std::size_t(wmax), 0.0);
    vdot.assign(std::size_t(wmax), 0.0);
    gx.assign(std::size_t(net.n_in()), 0.0);
  }
};

namespace detail {

// primal pass on a normalized input already placed in ws.a[0]; returns V and
// fills per-layer sin/cos caches.
inline double net_forward_ws(const SirenNet& net, NetWorkspace& ws) {
  int L = net.n_layers() - 1;
  const double om = net.omega0;
  for (int l = 0; l < L; ++l) {
    int in = net.layer_in(l), out = net.layer_out(l);
    const double* W = net.theta.data() + net.w_offset(l);
    const double* b = net.theta.data() + net.b_offset(l);
    const double* ain = ws.a[std::size_t(l)].data();
    double* sl = ws.s[std::size_t(l)].data();
    double* cl = ws.c[std::size_t(l)].data();
    double* aout = ws.a[std::size_t(l) + 1].data();
    for (int k = 0; k < out; ++k) {
      double z = b[k];
      const double* row = W + std::size_t(k) * std::size_t(in);
      for (int j = 0; j < in; ++j) z += row[j] * ain[j];
      double w = om * z;
      sl[k] = std::sin(w);
      cl[k] = std::cos(w);
      aout[k] = sl[k];
    }
  }
  int in = net.layer_in(L);
  const double* W = net.theta.data() + net.w_offset(L);
  double V = net.theta[net.b_offset(L)];
  const double* ain = ws.a[std::size_t(L)].data();
  for (int j = 0; j < in; ++j) V += W[j] * ain[j];
  return V;
}

// reverse pass for dV/dx (normalized input space); requires net_forward_ws first.
inline void net_input_grad_ws(const SirenNet& net, NetWorkspace& ws) {
  int L = net.n_layers() - 1;
  const double om = net.omega0;
  {
    int in = net.layer_in(L);
    const double* W = net.theta.data() + net.w_offset(L);
    for (int j = 0; j < in; ++j) ws.u[std::size_t(j)] = W[j];
  }
  for (int l = L - 1; l >= 0; --l) {
    int in = net.layer_in(l), out = net.layer_out(l);
    const double* cl = ws.c[std::size_t(l)].data();
    for (int k = 0; k < out; ++k) ws.v[std::size_t(k)] = om * cl[k] * ws.u[std::size_t(k)];
    const double* W = net.theta.data() + net.w_offset(l);
    double* dst = (l == 0) ? ws.gx.data() : ws.u.data();
    for (int j = 0; j < in; ++j) dst[j] = 0.0;
    for (int k = 0; k < out; ++k) {
      const double* row = W + std::size_t(k) * std::size_t(in);
      double vk = ws.v[std::size_t(k)];
      for (int j = 0; j < in; ++j) dst[j] += row[j] * vk;
    }
  }
  if (L == 0) {
    int in = net.layer_in(0);
    for (int j = 0; j < in; ++j) ws.gx[std::size_t(j)] = ws.u[std::size_t(j)];
  }
}

// tangent (dual) forward pass: ws.adot[0] holds the input tangent; returns the
// directional derivative Vdot = dV/dx . adot[0]. reuses the primal sin/cos.
inline double net_tangent_ws(const SirenNet& net, NetWorkspace& ws) {
  int L = net.n_layers() - 1;
  const double om = net.omega0;
  for (int l = 0; l < L; ++l) {
    int in = net.layer_in(l), out = net.layer_out(l);
    const double* W = net.theta.data() + net.w_offset(l);
    const double* adin = ws.adot[std::size_t(l)].data();
    const double* cl = ws.c[std::size_t(l)].data();
    double* zd = ws.zdot[std::size_t(l)].data();
    double* adout = ws.adot[std::size_t(l) + 1].data();
    for (int k = 0; k < out; ++k) {
      double z = 0.0;
      const double* row = W + std::size_t(k) * std::size_t(in);
      for (int j = 0; j < in; ++j) z += row[j] * adin[j];
      zd[k] = z;
      adout[k] = om * cl[k] * z;
    }
  }
  int in = net.layer_in(L);
  const double* W = net.theta.data() + net.w_offset(L);
  const double* adin = ws.adot[std::size_t(L)].data();
  double Vd = 0.0;
  for (int j = 0; j < in; ++j) Vd += W[j] * adin[j];
  return Vd;
}

// accumulate d(alpha*V + gamma*Vdot)/dtheta into grad. if gamma != 0, a tangent
// pass (net_tangent_ws) must have run; the reverse sweep differentiates through
// both the primal recurrence a = sin(omega z) and the tangent recurrence
// adot = omega cos(omega z) zdot, which reintroduces sin via d cos.
inline void net_param_grad_ws(const SirenNet& net, NetWorkspace& ws, double alpha, double gamma,
                              double* grad) {
  int L = net.n_layers() - 1;
  const double om = net.omega0;
  const bool dual = (gamma != 0.0);
  {
    int in = net.layer_in(L);
    const double* W = net.theta.data() + net.w_offset(L);
    const double* ain = ws.a[std::size_t(L)].data();
    double* gW = grad + net.w_offset(L);
    double* gb = grad + net.b_offset(L);
    if (dual) {
      const double* adin = ws.adot[std::size_t(L)].data();
      for (int j = 0; j < in; ++j) gW[j] += alpha * ain[j] + gamma * adin[j];
    } else {
      for (int j = 0; j < in; ++j) gW[j] += alpha * ain[j];
    }
    gb[0] += alpha;
    for (int j = 0; j < in; ++j) {
      ws.u[std::size_t(j)] = alpha * W[j];
      ws.udot[std::size_t(j)] = gamma * W[j];
    }
  }
  for (int l = L - 1; l >= 0; --l) {
    int in = net.layer_in(l), out = net.layer_out(l);
    const double* sl = ws.s[std::size_t(l)].data();
    const double* cl = ws.c[std::size_t(l)].data();
    const double* zd = ws.zdot[std::size_t(l)].data();
    for (int k = 0; k < out; ++k) {
      double uk = ws.u[std::size_t(k)];
      if (dual) {
        double ud = ws.udot[std::size_t(k)];
        ws.v[std::size_t(k)] = om * cl[k] * uk - om * om * sl[k] * zd[k] * ud;
        ws.vdot[std::size_t(k)] = om * cl[k] * ud;
      } else {
        ws.v[std::size_t(k)] = om * cl[k] * uk;
      }
    }
    const double* W = net.theta.data() + net.w_offset(l);
    const double* ain = ws.a[std::size_t(l)].data();
    double* gW = grad + net.w_offset(l);
    double* gb = grad + net.b_offset(l);
    if (dual) {
      const double* adin = ws.adot[std::size_t(l)].data();
      for (int k = 0; k < out; ++k) {
        double vk = ws.v[std::size_t(k)], vdk = ws.vdot[std::size_t(k)];
        double* grow = gW + std::size_t(k) * std::size_t(in);
        for (int j = 0; j < in; ++j) grow[j] += vk * ain[j] + vdk * adin[j];
        gb[k] += vk;
      }
    } else {
      for (int k = 0; k < out; ++k) {
        double vk = ws.v[std::size_t(k)];
        double* grow = gW + std::size_t(k) * std::size_t(in);
        for (int j = 0; j < in; ++j) grow[j] += vk * ain[j];
        gb[k] += vk;
      }
    }
    if (l > 0) {
      for (int j = 0; j < in; ++j) {
        ws.u[std::size_t(j)] = 0.0;
        ws.udot[std::size_t(j)] = 0.0;
      }
      for (int k = 0; k < out; ++k) {
        const double* row = W + std::size_t(k) * std::size_t(in);
        double vk = ws.v[std::size_t(k)];
        for (int j = 0; j < in; ++j) ws.u[std::size_t(j)] += row[j] * vk;
        if (dual) {
          double vdk = ws.vdot[std::size_t(k)];
          for (int j = 0; j < in; ++j) ws.udot[std::size_t(j)] += row[j] * vdk;
        }
      }
    }
  }
}

}  // namespace detail

// ---- public query interface ----------------------------------------------------

inline double forward(const SirenNet& net, const Vec& r, double t, double beta) {
  require(int(r.size()) == net.n_in() - 2, "forward: state dimension mismatch");
  NetWorkspace ws;
  ws.resize(net);
  for (int i = 0; i < net.n_in() - 2; ++i) ws.a[0][std::size_t(i)] = net.normalize(i, r[std::size_t(i)]);
  ws.a[0][std::size_t(net.n_in() - 2)] = net.normalize(net.n_in() - 2, t);
  ws.a[0][std::size_t(net.n_in() - 1)] = net.normalize(net.n_in() - 1, beta);
  return detail::net_forward_ws(net, ws);
}

struct NetGrads {
  double value = 0.0;
  Vec grad_r;
  double dt = 0.0;
  double dbeta = 0.0;
};

inline NetGrads forward_with_grads(const SirenNet& net, const Vec& r, double t, double beta) {
  require(int(r.size()) == net.n_in() - 2, "forward_with_grads: state dimension mismatch");
  NetWorkspace ws;
  ws.resize(net);
  int nr = net.n_in() - 2;
  for (int i = 0; i < nr; ++i) ws.a[0][std::size_t(i)] = net.normalize(i, r[std::size_t(i)]);
  ws.a[0][std::size_t(nr)] = net.normalize(nr, t);
  ws.a[0][std::size_t(nr) + 1] = net.normalize(nr + 1, beta);
  NetGrads out;
  out.value = detail::net_forward_ws(net, ws);
  detail::net_input_grad_ws(net, ws);
  out.grad_r.assign(std::size_t(nr), 0.0);
  for (int i = 0; i < nr; ++i) out.grad_r[std::size_t(i)] = ws.gx[std::size_t(i)] * net.scale(i);
  out.dt = ws.gx[std::size_t(nr)] * net.scale(nr);
  out.dbeta = ws.gx[std::size_t(nr) + 1] * net.scale(nr + 1);
  return out;
}

// ---- sampling & loss -------------------------------------------------------------

struct SampleBatch {
  int n = 0;
  int n_t0 = 0;  // first n_t0 samples have t = 0 (boundary samples)
  int n_in = 0;
  Vec xs;  // flattened physical inputs, per sample: r..., t, beta
};

// uniform samples over the training domain; the first max(frac*n, [t_max==0]*n)
// samples are pinned to t = 0. deterministic given the rng state.
inline SampleBatch sample_batch(const SirenNet& net, int n, double t_max, double boundary_frac,
                                std::mt19937_64& rng) {
  require(n > 0, "sample_batch: empty batch");
  require(boundary_frac >= 0.1, "sample_batch: boundary fraction below 0.1");
  require(t_max >= 0.0, "sample_batch: negative horizon");
  SampleBatch b;
  b.n = n;
  b.n_in = net.n_in();
  b.n_t0 = t_max <= 0.0 ? n : std::max(1, int(std::ceil(boundary_frac * n)));
  b.xs.assign(std::size_t(n) * std::size_t(b.n_in), 0.0);
  int nr = b.n_in - 2;
  for (int i = 0; i < n; ++i) {
    double* x = b.xs.data() + std::size_t(i) * std::size_t(b.n_in);
    for (int d = 0; d < nr; ++d)
      x[d] = uniform(rng, net.norm_lo[std::size_t(d)], net.norm_hi[std::size_t(d)]);
    x[nr] = (i < b.n_t0) ? 0.0 : uniform(rng, 0.0, t_max);
    x[nr + 1] = uniform(rng, net.norm_lo[std::size_t(nr) + 1], net.norm_hi[std::size_t(nr) + 1]);
  }
  return b;
}

struct LossParts {
  double total = 0.0;
  double h1 = 0.0;  // mean |V(r,0,beta) - cost(r)| over boundary samples
  double h2 = 0.0;  // mean |max(cost - V, H - dV/dt)| over all samples
};

namespace detail {

struct SampleEval {
  double V = 0.0;
  double cost = 0.0;
  double resid = 0.0;       // max(cost - V, H - dVdt)
  bool branch_pde = false;  // true when the H - dVdt branch attains the max
  Vec fstar;                // dH/dp at the optimizing inputs (only when branch_pde)
};

// evaluate one sample: primal + input-gradient passes, Hamiltonian at the
// bang-bang inputs, residual branch selection. fills ws caches for reuse.
inline SampleEval eval_sample(const RelSys& sys, const SirenNet& net, NetWorkspace& ws,
                              const double* x, Vec& r_buf, Vec& grad_buf, Vec& beta_buf) {
  int nr = net.n_in() - 2;
  for (int i = 0; i < nr; ++i) {
    r_buf[std::size_t(i)] = x[i];
    ws.a[0][std::size_t(i)] = net.normalize(i, x[i]);
  }
  ws.a[0][std::size_t(nr)] = net.normalize(nr, x[nr]);
  ws.a[0][std::size_t(nr) + 1] = net.normalize(nr + 1, x[nr + 1]);
  SampleEval ev;
  ev.V = net_forward_ws(net, ws);
  net_input_grad_ws(net, ws);
  for (int i = 0; i < nr; ++i) grad_buf[std::size_t(i)] = ws.gx[std::size_t(i)] * net.scale(i);
  double dVdt = ws.gx[std::size_t(nr)] * net.scale(nr);
  double beta = x[nr + 1];
  for (auto& bv : beta_buf) bv = beta;
  ev.cost = sys.cost_at(r_buf.data());
  double H = hamiltonian(sys, r_buf, grad_buf, beta_buf);
  double b1 = ev.cost - ev.V;
  double b2 = H - dVdt;
  if (b2 > b1) {
    ev.resid = b2;
    ev.branch_pde = true;
    Vec us = optimal_tracker_control(sys, r_buf, grad_buf);
    Vec up = adversarial_planner_control(sys, r_buf, grad_buf, beta_buf);
    Vec d = adversarial_disturbance(sys, r_buf, grad_buf);
    ev.fstar = rel_deriv(sys, r_buf, us, up, d);
  } else {
    ev.resid = b1;
    ev.branch_pde = false;
  }
  return ev;
}

}  // namespace detail

// loss over a batch; h1 averages boundary samples, h2 averages all samples.
inline LossParts loss(const RelSys& sys, const SirenNet& net, const SampleBatch& batch,
                      double lambda) {
  require(lambda >= 0.0, "loss: negative lambda");
  require(batch.n_in == net.n_in(), "loss: batch/net dimension mismatch");
  int nr = net.n_in() - 2;
  constexpr int kChunks = 16;
  std::vector<double> sum1(kChunks, 0.0), sum2(kChunks, 0.0);
  parallel_chunks(
      std::size_t(batch.n),
      [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
        NetWorkspace ws;
        ws.resize(net);
        Vec r_buf(std::size_t(nr), 0.0), grad_buf(std::size_t(nr), 0.0);
        Vec beta_buf(std::size_t(sys.n_beta()));
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
          const double* x = batch.xs.data() + i * std::size_t(batch.n_in);
          auto ev = detail::eval_sample(sys, net, ws, x, r_buf, grad_buf, beta_buf);
          if (int(i) < batch.n_t0) s1 += std::abs(ev.V - ev.cost);
          s2 += std::abs(ev.resid);
        }
        sum1[chunk] = s1;
        sum2[chunk] = s2;
      },
      kChunks);
  LossParts out;
  double a1 = 0.0, a2 = 0.0;
  for (int k = 0; k < kChunks; ++k) {
    a1 += sum1[std::size_t(k)];
    a2 += sum2[std::size_t(k)];
  }
  out.h1 = batch.n_t0 > 0 ? a1 / batch.n_t0 : 0.0;
  out.h2 = a2 / batch.n;
  out.total = out.h1 + lambda * out.h2;
  return out;
}

// ---- training --------------------------------------------------------------------

struct TrainConfig {
  int pretrain_iters = 2000;
  int train_iters = 10000;
  int batch_size = 4096;
  double learning_rate = 1e-4;
  double lambda = 1.0;
  double horizon = 3.0;
  double boundary_frac = 0.2;
  int hidden_width = 64;
  int hidden_layers = 3;
  double omega0 = 30.0;
  Vec domain_lo, domain_hi;  // training range per relative-state dim
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    require(pretrain_iters >= 0 && train_iters >= 0, "train: negative iteration count");
    require(batch_size > 0, "train: batch size must be positive");
    require(learning_rate > 0, "train: learning rate must be positive");
    require(lambda >= 0, "train: negative lambda");
    require(horizon > 0, "train: horizon must be positive");
    require(boundary_frac >= 0.1 && boundary_frac <= 1.0, "train: boundary fraction out of range");
    require(hidden_width >= 1 && hidden_layers >= 1, "train: bad architecture");
    require(domain_lo.size() == domain_hi.size() && !domain_lo.empty(),
            "train: missing training domain");
  }
};

// linear horizon schedule: 0 at the first main iteration, horizon at the last.
inline double curriculum_t_max(const TrainConfig& cfg, int main_iter) {
  if (cfg.train_iters <= 1) return cfg.horizon;
  return cfg.horizon * double(main_iter) / double(cfg.train_iters - 1);
}

struct TrainResult {
  SirenNet net;
  std::vector<LossParts> history;  // pretrain then main, one entry per iteration
  double convergence_gap = 0.0;    // sup |V(.,T) - V(.,0.9T)| over check samples
};

namespace detail {

// one optimization step: builds the batch gradient of h1 + lambda*h2 (pretrain:
// h1 only) with a fixed 16-chunk reduction, then applies an adaptive-moment update.
inline LossParts train_step(const RelSys& sys, SirenNet& net, const TrainConfig& cfg,
                            const SampleBatch& batch, bool pretrain, Vec& m, Vec& v,
                            std::int64_t step_index, std::vector<Vec>& grad_chunks) {
  int nr = net.n_in() - 2;
  constexpr int kChunks = 16;
  std::vector<double> sum1(kChunks, 0.0), sum2(kChunks, 0.0);
  double w1 = batch.n_t0 > 0 ? 1.0 / batch.n_t0 : 0.0;
  double w2 = cfg.lambda / batch.n;
  parallel_chunks(
      std::size_t(batch.n),
      [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
        NetWorkspace ws;
        ws.resize(net);
        Vec r_buf(std::size_t(nr), 0.0), grad_buf(std::size_t(nr), 0.0);
        Vec beta_buf(std::size_t(sys.n_beta()));
        Vec& g = grad_chunks[chunk];
        std::fill(g.begin(), g.end(), 0.0);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
          const double* x = batch.xs.data() + i * std::size_t(batch.n_in);
          auto ev = eval_sample(sys, net, ws, x, r_buf, grad_buf, beta_buf);
          bool boundary = int(i) < batch.n_t0;
          if (boundary) s1 += std::abs(ev.V - ev.cost);
          s2 += std::abs(ev.resid);
          double alpha = 0.0, gamma = 0.0;
          if (boundary && ev.V != ev.cost) alpha += w1 * (ev.V > ev.cost ? 1.0 : -1.0);
          if (!pretrain && ev.resid != 0.0) {
            double sgn = ev.resid > 0.0 ? 1.0 : -1.0;
            if (ev.branch_pde) {
              // residual branch H - dV/dt: d/dtheta = f* . d(grad_r V)/dtheta - d(dV/dt)/dtheta,
              // realized as the theta-gradient of the directional derivative with
              // input tangent (f*, -1, 0) (physical units -> normalized scaling)
              gamma += w2 * sgn;
              for (int d = 0; d < nr; ++d)
                ws.adot[0][std::size_t(d)] = ev.fstar[std::size_t(d)] * net.scale(d);
              ws.adot[0][std::size_t(nr)] = -1.0 * net.scale(nr);
              ws.adot[0][std::size_t(nr) + 1] = 0.0;
            } else {
              alpha += w2 * sgn * -1.0;  // residual branch cost - V
            }
          }
          if (alpha != 0.0 || gamma != 0.0) {
            if (gamma != 0.0) net_tangent_ws(net, ws);
            net_param_grad_ws(net, ws, alpha, gamma, g.data());
          }
        }
        sum1[chunk] = s1;
        sum2[chunk] = s2;
      },
      kChunks);
  std::size_t P = net.param_count();
  Vec& g0 = grad_chunks[0];
  for (int k = 1; k < kChunks; ++k) {
    const Vec& gk = grad_chunks[std::size_t(k)];
    for (std::size_t j = 0; j < P; ++j) g0[j] += gk[j];
  }
  double b1t = 1.0 - std::pow(cfg.adam_beta1, double(step_index));
  double b2t = 1.0 - std::pow(cfg.adam_beta2, double(step_index));
  for (std::size_t j = 0; j < P; ++j) {
    m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g0[j];
    v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g0[j] * g0[j];
    double mh = m[j] / b1t, vh = v[j] / b2t;
    net.theta[j] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
  }
  LossParts parts;
  double a1 = 0.0, a2 = 0.0;
  for (int k = 0; k < kChunks; ++k) {
    a1 += sum1[std::size_t(k)];
    a2 += sum2[std::size_t(k)];
  }
  parts.h1 = batch.n_t0 > 0 ? a1 / batch.n_t0 : 0.0;
  parts.h2 = a2 / batch.n;
  parts.total = parts.h1 + cfg.lambda * parts.h2;
  return parts;
}

}  // namespace detail

inline TrainResult train(const RelSys& sys, const TrainConfig& cfg) {
  cfg.validate();
  sys.validate();
  require(int(cfg.domain_lo.size()) == sys.n_r, sys.id + ": training domain dimension mismatch");

  std::vector<int> widths;
  widths.push_back(sys.n_r + 2);
  for (int l = 0; l < cfg.hidden_layers; ++l) widths.push_back(cfg.hidden_width);
  widths.push_back(1);
  Vec lo = cfg.domain_lo, hi = cfg.domain_hi;
  lo.push_back(0.0);
  lo.push_back(sys.beta_scalar_lo());
  hi.push_back(cfg.horizon);
  hi.push_back(sys.beta_scalar_hi());
  TrainResult out;
  out.net = make_siren(widths, cfg.omega0, lo, hi, cfg.seed);
  out.net.system_id = sys.id;
  out.net.horizon = cfg.horizon;
  SirenNet& net = out.net;

  std::size_t P = net.param_count();
  Vec m(P, 0.0), v(P, 0.0);
  std::vector<Vec> grad_chunks(16, Vec(P, 0.0));
  out.history.reserve(std::size_t(cfg.pretrain_iters + cfg.train_iters));
  std::int64_t step_index = 0;
  int total_iters = cfg.pretrain_iters + cfg.train_iters;
  for (int it = 0; it < total_iters; ++it) {
    bool pretrain = it < cfg.pretrain_iters;
    double t_max = pretrain ? 0.0 : curriculum_t_max(cfg, it - cfg.pretrain_iters);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xba7c4000ull + std::uint64_t(it)));
    SampleBatch batch = sample_batch(net, cfg.batch_size, t_max, cfg.boundary_frac, rng);
    LossParts parts =
        detail::train_step(sys, net, cfg, batch, pretrain, m, v, ++step_index, grad_chunks);
    if (!std::isfinite(parts.total))
      throw numerical_error("neural training diverged at iteration " + std::to_string(it));
    out.history.push_back(parts);
    net.iteration = it + 1;
  }

  // horizon-convergence proxy: value change between T and 0.9T on fresh samples
  {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xc04fe55ull));
    SampleBatch chk = sample_batch(net, 2048, cfg.horizon, 0.1, rng);
    double sup = 0.0;
    int nr = net.n_in() - 2;
    Vec r(std::size_t(nr), 0.0);
    for (int i = 0; i < chk.n; ++i) {
      const double* x = chk.xs.data() + std::size_t(i) * std::size_t(chk.n_in);
      for (int d = 0; d < nr; ++d) r[std::size_t(d)] = x[d];
      double beta = x[nr + 1];
      double dv = std::abs(forward(net, r, cfg.horizon, beta) -
                           forward(net, r, 0.9 * cfg.horizon, beta));
      sup = std::max(sup, dv);
    }
    out.convergence_gap = sup;
  }
  return out;
}

// ---- checkpoint file -------------------------------------------------------------

inline void save_checkpoint(const std::string& path, const SirenNet& net) {
  net.validate();
  std::ofstream os(path, std::ios::binary);
  require(bool(os), "cannot open for writing: " + path);
  os << "reachtrack-net v1\n";
  os << "system " << net.system_id << "\n";
  os << "widths";
  for (int w : net.widths) os << ' ' << w;
  os << "\n";
  os << "omega0 " << fmt_g17(net.omega0) << "\n";
  os << "horizon " << fmt_g17(net.horizon) << "\n";
  os << "seed " << net.seed << "\n";
  os << "iteration " << net.iteration << "\n";
  os << "norm_lo " << join_g17(net.norm_lo) << "\n";
  os << "norm_hi " << join_g17(net.norm_hi) << "\n";
  os << "end-header\n";
  write_f64_le(os, net.theta.data(), net.theta.size());
  require(bool(os), "write failed: " + path);
}

inline SirenNet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "cannot open: " + path);
  std::string line;
  require(bool(std::getline(is, line)) && line == "reachtrack-net v1",
          path + ": not a network checkpoint");
  SirenNet net;
  while (std::getline(is, line)) {
    if (line == "end-header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "system") ls >> net.system_id;
    else if (key == "widths") {
      int w;
      while (ls >> w) net.widths.push_back(w);
    } else if (key == "omega0") ls >> net.omega0;
    else if (key == "horizon") ls >> net.horizon;
    else if (key == "seed") ls >> net.seed;
    else if (key == "iteration") ls >> net.iteration;
    else if (key == "norm_lo") {
      double x;
      while (ls >> x) net.norm_lo.push_back(x);
    } else if (key == "norm_hi") {
      double x;
      while (ls >> x) net.norm_hi.push_back(x);
    } else throw contract_error(path + ": unknown checkpoint header key '" + key + "'");
    require(bool(ls) || ls.eof(), path + ": malformed header line '" + line + "'");
  }
  require(line == "end-header", path + ": truncated header");
  require(net.widths.size() >= 2, path + ": missing widths");
  std::size_t P = net.param_count();
  net.theta.assign(P, 0.0);
  read_f64_le(is, net.theta.data(), P);
  net.validate();
  return net;
}

// ---- value-source adapter ---------------------------------------------------------

// evaluates the trained network at a fixed horizon as the converged value function
class NeuralValueSource final : public ValueSource {
 public:
  NeuralValueSource(const RelSys& sys, SirenNet net, double t_conv)
      : sys_(sys), net_(std::move(net)), t_conv_(t_conv) {
    net_.validate();
    require(t_conv_ <= net_.horizon + 1e-12, "value source: query horizon beyond training horizon");
    require(net_.n_in() == sys_.n_r + 2, "value source: network/system dimension mismatch");
  }

  std::string system_id() const override { return sys_.id; }
  int state_dims() const override { return sys_.n_r; }
  std::vector<int> error_dims() const override { return sys_.error_dims; }
  double beta_min() const override { return net_.norm_lo[std::size_t(net_.n_in() - 1)]; }
  double beta_max() const override { return net_.norm_hi[std::size_t(net_.n_in() - 1)]; }
  void extents(Vec& lo, Vec& hi) const override {
    lo.assign(net_.norm_lo.begin(), net_.norm_lo.begin() + sys_.n_r);
    hi.assign(net_.norm_hi.begin(), net_.norm_hi.begin() + sys_.n_r);
  }
  double value(const Vec& r, double beta) const override {
    return forward(net_, r, t_conv_, beta);
  }
  Vec gradient(const Vec& r, double beta) const override {
    return forward_with_grads(net_, r, t_conv_, beta).grad_r;
  }
  // the network is smooth; there is no interpolation error term to add. learning
  // error is reported by the fidelity metrics rather than folded into the level.
  double interp_slack(double) const override { return 0.0; }

  const SirenNet& net() const { return net_; }
  double query_horizon() const { return t_conv_; }

 private:
  RelSys sys_;
  SirenNet net_;
  double t_conv_;
};

inline NeuralValueSource make_neural_source(const RelSys& sys, SirenNet net, double t_conv = -1.0) {
  double tc = t_conv < 0 ? net.horizon : t_conv;
  return NeuralValueSource(sys, std::move(net), tc);
}

}  // namespace reachtrack

#endif
