#ifndef REACHTRACK_COMMON_HPP
#define REACHTRACK_COMMON_HPP

// shared plumbing: error categories, deterministic rng helpers, fixed-chunk
// parallel loops, little-endian float io, numeric formatting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace reachtrack {

using Vec = std::vector<double>;

// contract violations (bad arguments, bad files, bad configs) -> exit code 1.
struct contract_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// numerical failures (NaN/Inf blowups, divergence) -> exit code 2.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : contract_error {
  using contract_error::contract_error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw contract_error(msg);
}

constexpr double kPi = 3.14159265358979323846;

// wrap an angle into [-pi, pi)
inline double wrap_angle(double a) {
  double w = a - 2.0 * kPi * std::floor((a + kPi) / (2.0 * kPi));
  if (w >= kPi) w -= 2.0 * kPi;  // guard the floor rounding edge
  return w;
}

// --- deterministic rng ------------------------------------------------------
// mt19937_64 is fully pinned by the standard; the distributions are not, so we
// map raw draws ourselves and never touch <random>'s distribution classes.

inline double uniform01(std::mt19937_64& g) {
  return double(g() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
  // Lemire-style multiply-shift; bias < 2^-64, fine for our sampling uses.
  return std::uint64_t((static_cast<unsigned __int128>(g()) * n) >> 64);
}

inline double gauss(std::mt19937_64& g) {
  // Box-Muller, no cached spare so the generator state stays easy to reason about
  double u1 = uniform01(g), u2 = uniform01(g);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// stable per-run / per-chunk seed derivation
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt + 0x51ab5f2ULL));
}

// --- worker pool ------------------------------------------------------------
// work is split into a FIXED number of chunks regardless of thread count, so
// per-chunk results (and any reduction done in chunk order) are bit-identical
// for any worker count.

inline std::atomic<int>& worker_count_slot() {
  static std::atomic<int> n{0};
  return n;
}

inline int worker_count() {
  int n = worker_count_slot().load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

inline void set_worker_count(int n) { worker_count_slot().store(n); }

constexpr int kFixedChunks = 64;

// fn(chunk_index, begin, end) over [0, n); chunk boundaries depend only on n.
template <class F>
inline void parallel_chunks(std::size_t n, F&& fn, int chunks = kFixedChunks) {
  if (n == 0) return;
  if (std::size_t(chunks) > n) chunks = int(n);
  auto chunk_range = [&](int c, std::size_t& b, std::size_t& e) {
    b = n * std::size_t(c) / std::size_t(chunks);
    e = n * std::size_t(c + 1) / std::size_t(chunks);
  };
  int workers = std::min(worker_count(), chunks);
  if (workers <= 1) {
    for (int c = 0; c < chunks; ++c) {
      std::size_t b, e;
      chunk_range(c, b, e);
      fn(c, b, e);
    }
    return;
  }
  std::atomic<int> next{0};
  auto body = [&]() {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= chunks) return;
      std::size_t b, e;
      chunk_range(c, b, e);
      fn(c, b, e);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

// --- little-endian float64 io -----------------------------------------------

inline void write_f64_le(std::ostream& os, const double* x, std::size_t n) {
  std::vector<unsigned char> buf(n * 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u;
    std::memcpy(&u, &x[i], 8);
    for (int b = 0; b < 8; ++b) buf[i * 8 + b] = (unsigned char)(u >> (8 * b));
  }
  os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

inline void read_f64_le(std::istream& is, double* x, std::size_t n) {
  std::vector<unsigned char> buf(n * 8);
  is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (std::size_t(is.gcount()) != buf.size())
    throw contract_error("truncated float64 block in binary payload");
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= std::uint64_t(buf[i * 8 + b]) << (8 * b);
    std::memcpy(&x[i], &u, 8);
  }
}

// shortest round-trip decimal for doubles; locale-free.
inline std::string fmt_g17(double v) {
  char tmp[40];
  std::snprintf(tmp, sizeof tmp, "%.17g", v);
  return tmp;
}

inline std::string join_g17(const Vec& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt_g17(v[i]);
  }
  return s;
}

inline double norm2(const double* x, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

inline double norm2(const Vec& x) { return norm2(x.data(), x.size()); }

inline double norm_inf(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double dist2(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace reachtrack

#endif
