#ifndef REACHTRACK_VALUE_SOURCE_HPP
#define REACHTRACK_VALUE_SOURCE_HPP

// backend-neutral access to a solved value function V(r; beta): pointwise
// queries, gradients, and the scans used to extract bound levels and radii.
// grid backends answer scans exactly from their nodes; other backends fall
// back to seeded sampling plus local refinement.

#include <memory>
#include <utility>

#include "reachtrack/grid_solver.hpp"

namespace reachtrack {

struct ValueSource {
  virtual ~ValueSource() = default;

  virtual std::string system_id() const = 0;
  virtual int state_dims() const = 0;
  virtual std::vector<int> error_dims() const = 0;
  virtual double beta_min() const = 0;
  virtual double beta_max() const = 0;
  virtual void extents(Vec& lo, Vec& hi) const = 0;
  virtual double value(const Vec& r, double beta) const = 0;
  virtual Vec gradient(const Vec& r, double beta) const = 0;
  // interpolation / representation slack for safety margins (kappa)
  virtual double interp_slack(double beta) const = 0;

  // per-dimension distance beyond the extents within which a clamped query is
  // still credited against a bound level (discretization-scale slack); farther
  // out the state counts as having left the certified set
  virtual Vec domain_margin() const {
    Vec lo, hi;
    extents(lo, hi);
    Vec m(lo.size());
    for (std::size_t d = 0; d < lo.size(); ++d) m[d] = 0.01 * (hi[d] - lo[d]);
    return m;
  }

  int scan_samples = 100000;
  int refine_steps = 100;

  // state achieving (approximately) the minimum of V(.; beta)
  virtual Vec min_state(double beta, std::uint64_t seed) const {
    Vec lo, hi;
    extents(lo, hi);
    std::mt19937_64 rng(derive_seed(seed, 0x315));
    int D = state_dims();
    Vec r(std::size_t(D), 0.0), best;
    double vbest = std::numeric_limits<double>::infinity();
    for (int s = 0; s < scan_samples; ++s) {
      for (int d = 0; d < D; ++d) r[std::size_t(d)] = uniform(rng, lo[std::size_t(d)], hi[std::size_t(d)]);
      double v = value(r, beta);
      if (v < vbest) {
        vbest = v;
        best = r;
      }
    }
    double span = 0;
    for (int d = 0; d < D; ++d) span = std::max(span, hi[std::size_t(d)] - lo[std::size_t(d)]);
    double step = 0.02 * span;
    for (int it = 0; it < refine_steps; ++it) {
      Vec g = gradient(best, beta);
      double gn = norm2(g);
      if (gn < 1e-14) break;
      Vec xn(best);
      for (int d = 0; d < D; ++d) {
        xn[std::size_t(d)] -= step * g[std::size_t(d)] / gn;
        xn[std::size_t(d)] = std::clamp(xn[std::size_t(d)], lo[std::size_t(d)], hi[std::size_t(d)]);
      }
      double vn = value(xn, beta);
      if (vn < vbest) {
        vbest = vn;
        best = xn;
      } else {
        step *= 0.5;
        if (step < 1e-10 * span) break;
      }
    }
    return best;
  }

  // (min, max) of V(.; beta) over the extents
  virtual std::pair<double, double> scan_min_max(double beta, std::uint64_t seed) const {
    Vec lo, hi;
    extents(lo, hi);
    std::mt19937_64 rng(derive_seed(seed, 0xa11ce));
    int D = state_dims();
    Vec r(std::size_t(D), 0.0);
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -vmin;
    constexpr int kKeep = 8;
    std::vector<std::pair<double, Vec>> best;
    for (int s = 0; s < scan_samples; ++s) {
      for (int d = 0; d < D; ++d) r[std::size_t(d)] = uniform(rng, lo[std::size_t(d)], hi[std::size_t(d)]);
      double v = value(r, beta);
      vmax = std::max(vmax, v);
      if (v < vmin) vmin = v;
      if (int(best.size()) < kKeep || v < best.back().first) {
        best.emplace_back(v, r);
        std::sort(best.begin(), best.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (int(best.size()) > kKeep) best.pop_back();
      }
    }
    // local descent polish of the minimum
    double span = 0;
    for (int d = 0; d < D; ++d) span = std::max(span, hi[std::size_t(d)] - lo[std::size_t(d)]);
    for (auto& cand : best) {
      Vec x = cand.second;
      double step = 0.02 * span;
      double vbest = cand.first;
      for (int it = 0; it < refine_steps; ++it) {
        Vec g = gradient(x, beta);
        double gn = norm2(g);
        if (gn < 1e-14) break;
        Vec xn(x);
        for (int d = 0; d < D; ++d) {
          xn[std::size_t(d)] -= step * g[std::size_t(d)] / gn;
          xn[std::size_t(d)] = std::clamp(xn[std::size_t(d)], lo[std::size_t(d)], hi[std::size_t(d)]);
        }
        double vn = value(xn, beta);
        if (vn < vbest) {
          vbest = vn;
          x = xn;
        } else {
          step *= 0.5;
          if (step < 1e-10 * span) break;
        }
      }
      vmin = std::min(vmin, vbest);
    }
    return {vmin, vmax};
  }

  // largest planner-space distance inside {r : V(r; beta) <= level}
  virtual double max_error_radius(double beta, double level, std::uint64_t seed) const {
    Vec lo, hi;
    extents(lo, hi);
    std::mt19937_64 rng(derive_seed(seed, 0x7eb));
    int D = state_dims();
    auto edims = error_dims();
    Vec r(std::size_t(D), 0.0);
    double best_rad = -1.0;
    Vec best;
    for (int s = 0; s < scan_samples; ++s) {
      for (int d = 0; d < D; ++d) r[std::size_t(d)] = uniform(rng, lo[std::size_t(d)], hi[std::size_t(d)]);
      if (value(r, beta) > level) continue;
      double rad = 0;
      for (int e : edims) rad += r[std::size_t(e)] * r[std::size_t(e)];
      rad = std::sqrt(rad);
      if (rad > best_rad) {
        best_rad = rad;
        best = r;
      }
    }
    if (best_rad < 0.0)
      throw contract_error(system_id() + ": level " + fmt_g17(level) +
                           " is below the minimum of the value function");
    if (best_rad < 1e-12) return best_rad;
    // push the best member outward along its planner-space ray (bisection)
    double scale_cap = std::numeric_limits<double>::infinity();
    for (int e : edims) {
      double x = best[std::size_t(e)];
      if (std::fabs(x) < 1e-15) continue;
      double cap = x > 0 ? hi[std::size_t(e)] / x : lo[std::size_t(e)] / x;
      scale_cap = std::min(scale_cap, cap);
    }
    if (!std::isfinite(scale_cap)) scale_cap = 1.0;
    auto member_at = [&](double sc) {
      Vec q = best;
      for (int e : edims) q[std::size_t(e)] = best[std::size_t(e)] * sc;
      return value(q, beta) <= level;
    };
    double sl = 1.0, sh = std::max(1.0, scale_cap);
    if (member_at(sh)) return best_rad * sh;
    for (int it = 0; it < 60; ++it) {
      double sm = 0.5 * (sl + sh);
      (member_at(sm) ? sl : sh) = sm;
    }
    return best_rad * sl;
  }
};

// ---- grid-backed source --------------------------------------------------------

class GridValueSource : public ValueSource {
 public:
  explicit GridValueSource(ValueFamily fam) : fam_(std::move(fam)) {
    fam_.validate();
    lipschitz_.reserve(fam_.slices.size());
    for (const auto& s : fam_.slices) {
      double L = 0;
      std::size_t n = s.values.size();
      for (std::size_t i = 0; i < n; ++i) {
        double g2 = 0;
        for (const auto& gd : s.grads) g2 += gd[i] * gd[i];
        L = std::max(L, g2);
      }
      lipschitz_.push_back(std::sqrt(L));
    }
  }

  const ValueFamily& family() const { return fam_; }

  std::string system_id() const override { return fam_.system_id; }
  int state_dims() const override { return fam_.grid.dims(); }
  std::vector<int> error_dims() const override { return error_dims_; }
  void set_error_dims(std::vector<int> e) { error_dims_ = std::move(e); }
  double beta_min() const override { return fam_.betas.front(); }
  double beta_max() const override { return fam_.betas.back(); }

  void extents(Vec& lo, Vec& hi) const override {
    lo = fam_.grid.mins;
    hi = fam_.grid.maxs;
  }

  double value(const Vec& r, double beta) const override {
    require(int(r.size()) == fam_.grid.dims(), "grid source: state dimension mismatch");
    int a, b;
    double w = blend(beta, a, b);
    double va = interp_multilinear(fam_.grid, fam_.slices[std::size_t(a)].values.data(), r.data()).value;
    if (a == b) return va;
    double vb = interp_multilinear(fam_.grid, fam_.slices[std::size_t(b)].values.data(), r.data()).value;
    return (1.0 - w) * va + w * vb;
  }

  Vec gradient(const Vec& r, double beta) const override {
    require(int(r.size()) == fam_.grid.dims(), "grid source: state dimension mismatch");
    int a, b;
    double w = blend(beta, a, b);
    int D = fam_.grid.dims();
    Vec g(std::size_t(D), 0.0);
    for (int d = 0; d < D; ++d) {
      double ga = interp_multilinear(fam_.grid, fam_.slices[std::size_t(a)].grads[std::size_t(d)].data(), r.data()).value;
      if (a != b) {
        double gb = interp_multilinear(fam_.grid, fam_.slices[std::size_t(b)].grads[std::size_t(d)].data(), r.data()).value;
        ga = (1.0 - w) * ga + w * gb;
      }
      g[std::size_t(d)] = ga;
    }
    return g;
  }

  // exact node scans where the query hits a stored slice
  std::pair<double, double> scan_min_max(double beta, std::uint64_t seed) const override {
    int k = exact_slice(beta);
    if (k < 0) return ValueSource::scan_min_max(beta, seed);
    const Vec& v = fam_.slices[std::size_t(k)].values;
    auto mm = std::minmax_element(v.begin(), v.end());
    return {*mm.first, *mm.second};
  }

  Vec min_state(double beta, std::uint64_t seed) const override {
    int k = exact_slice(beta);
    if (k < 0) return ValueSource::min_state(beta, seed);
    const Vec& v = fam_.slices[std::size_t(k)].values;
    std::size_t arg = std::size_t(std::min_element(v.begin(), v.end()) - v.begin());
    Vec x(std::size_t(fam_.grid.dims()));
    fam_.grid.node(arg, x.data());
    return x;
  }

  double max_error_radius(double beta, double level, std::uint64_t seed) const override {
    int k = exact_slice(beta);
    if (k < 0) return ValueSource::max_error_radius(beta, level, seed);
    const ValueSlice& s = fam_.slices[std::size_t(k)];
    double best = -1.0;
    double x[10];
    std::size_t n = s.values.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (s.values[i] > level) continue;
      fam_.grid.node(i, x);
      double rad = 0;
      for (int e : error_dims_) rad += x[e] * x[e];
      best = std::max(best, rad);
    }
    if (best < 0.0)
      throw contract_error(system_id() + ": level " + fmt_g17(level) +
                           " is below the minimum of the value function");
    return std::sqrt(best);
  }

  double interp_slack(double beta) const override {
    int a, b;
    double w = blend(beta, a, b);
    double L = (1.0 - w) * lipschitz_[std::size_t(a)] + w * lipschitz_[std::size_t(b)];
    return 2.0 * fam_.grid.max_spacing() * L;
  }

  Vec domain_margin() const override {
    int D = fam_.grid.dims();
    Vec m(std::size_t(D), 0.0);
    for (int d = 0; d < D; ++d) m[std::size_t(d)] = fam_.grid.spacing(d);
    return m;
  }

 private:
  int exact_slice(double beta) const {
    for (std::size_t i = 0; i < fam_.betas.size(); ++i)
      if (std::fabs(fam_.betas[i] - beta) <= 1e-9) return int(i);
    return -1;
  }

  // bracketing slices and the blend weight toward the upper one
  double blend(double beta, int& a, int& b) const {
    int k = exact_slice(beta);
    if (k >= 0) {
      a = b = k;
      return 0.0;
    }
    const auto& bs = fam_.betas;
    if (beta <= bs.front()) {
      a = b = 0;
      return 0.0;
    }
    if (beta >= bs.back()) {
      a = b = int(bs.size()) - 1;
      return 0.0;
    }
    std::size_t j = 1;
    while (bs[j] < beta) ++j;
    a = int(j) - 1;
    b = int(j);
    return (beta - bs[std::size_t(a)]) / (bs[std::size_t(b)] - bs[std::size_t(a)]);
  }

  ValueFamily fam_;
  std::vector<int> error_dims_;
  std::vector<double> lipschitz_;
};

// convenience: grid source wired to a system's planner-space projection
inline std::shared_ptr<GridValueSource> make_grid_source(const RelSys& sys, ValueFamily fam) {
  auto src = std::make_shared<GridValueSource>(std::move(fam));
  src->set_error_dims(sys.error_dims);
  return src;
}

}  // namespace reachtrack

#endif
