#ifndef REACHTRACK_GRID_HPP
#define REACHTRACK_GRID_HPP

// rectangular grids with optional periodic dimensions, plus multilinear
// interpolation of node-sampled fields. periodic dims store `count` nodes over
// [min, max) (the duplicate endpoint is excluded); others store nodes at both ends.

#include <cstdint>
#include <vector>

#include "reachtrack/common.hpp"

namespace reachtrack {

struct GridSpec {
  Vec mins, maxs;
  std::vector<int> counts;
  std::vector<std::uint8_t> periodic;

  int dims() const { return int(counts.size()); }

  double spacing(int d) const {
    std::size_t i = std::size_t(d);
    double span = maxs[i] - mins[i];
    return periodic[i] ? span / counts[i] : span / (counts[i] - 1);
  }

  double max_spacing() const {
    double h = 0;
    for (int d = 0; d < dims(); ++d) h = std::max(h, spacing(d));
    return h;
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (int c : counts) n *= std::size_t(c);
    return n;
  }

  // row-major: first dim slowest
  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(counts.size());
    std::size_t acc = 1;
    for (int d = dims() - 1; d >= 0; --d) {
      s[std::size_t(d)] = acc;
      acc *= std::size_t(counts[std::size_t(d)]);
    }
    return s;
  }

  double coord(int d, int i) const { return mins[std::size_t(d)] + spacing(d) * i; }

  void node(std::size_t idx, double* out) const {
    for (int d = dims() - 1; d >= 0; --d) {
      std::size_t c = std::size_t(counts[std::size_t(d)]);
      out[std::size_t(d)] = coord(d, int(idx % c));
      idx /= c;
    }
  }

  void node_coords(std::size_t idx, int* out) const {
    for (int d = dims() - 1; d >= 0; --d) {
      std::size_t c = std::size_t(counts[std::size_t(d)]);
      out[std::size_t(d)] = int(idx % c);
      idx /= c;
    }
  }

  void validate() const {
    require(mins.size() == maxs.size() && mins.size() == counts.size() &&
                mins.size() == periodic.size(),
            "grid: field lengths differ");
    require(!counts.empty(), "grid: empty");
    for (int d = 0; d < dims(); ++d) {
      require(counts[std::size_t(d)] >= 2, "grid: fewer than two nodes along a dimension");
      require(maxs[std::size_t(d)] > mins[std::size_t(d)], "grid: empty extent");
    }
  }
};

struct InterpResult {
  double value = 0.0;
  bool clamped = false;  // query fell outside a non-periodic extent
};

namespace detail {

struct CellLocate {
  int i0[10];
  double frac[10];
  bool clamped;
};

inline CellLocate locate(const GridSpec& g, const double* x) {
  CellLocate loc;
  loc.clamped = false;
  for (int d = 0; d < g.dims(); ++d) {
    std::size_t dd = std::size_t(d);
    int n = g.counts[dd];
    double h = g.spacing(d);
    if (g.periodic[dd]) {
      double span = g.maxs[dd] - g.mins[dd];
      double u = (x[dd] - g.mins[dd]) / span;
      u -= std::floor(u);        // [0,1)
      double cell = u * n;       // [0,n)
      int i0 = int(cell);
      if (i0 >= n) i0 = n - 1;   // guard fp edge
      loc.i0[d] = i0;
      loc.frac[d] = cell - i0;
    } else {
      double u = (x[dd] - g.mins[dd]) / h;
      if (u <= 0.0) {
        loc.i0[d] = 0;
        loc.frac[d] = 0.0;
        if (u < -1e-12) loc.clamped = true;
      } else if (u >= double(n - 1)) {
        loc.i0[d] = n - 2;
        loc.frac[d] = 1.0;
        if (u > double(n - 1) + 1e-12) loc.clamped = true;
      } else {
        int i0 = int(u);
        loc.i0[d] = i0;
        loc.frac[d] = u - i0;
      }
    }
  }
  return loc;
}

}  // namespace detail

// multilinear interpolation of a node-sampled field; out-of-range queries clamp
// to the boundary and set the flag (periodic dims never clamp).
inline InterpResult interp_multilinear(const GridSpec& g, const double* data, const double* x) {
  require(g.dims() <= 10, "grid: interpolation supports up to 10 dims");
  detail::CellLocate loc = detail::locate(g, x);
  auto strides = g.strides();
  int D = g.dims();
  double acc = 0.0;
  int corners = 1 << D;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int d = 0; d < D; ++d) {
      int n = g.counts[std::size_t(d)];
      int hi = (c >> d) & 1;
      int i = loc.i0[d] + hi;
      if (g.periodic[std::size_t(d)] && i >= n) i -= n;
      w *= hi ? loc.frac[d] : 1.0 - loc.frac[d];
      idx += strides[std::size_t(d)] * std::size_t(i);
    }
    if (w != 0.0) acc += w * data[idx];
  }
  return {acc, loc.clamped};
}

}  // namespace reachtrack

#endif
