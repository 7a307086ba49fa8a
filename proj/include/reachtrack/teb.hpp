#ifndef REACHTRACK_TEB_HPP
#define REACHTRACK_TEB_HPP

// tracking-error bounds from a solved value function. each authority level beta
// gets its own minimal sublevel set: level(beta) = min_r V(r; beta) + eps, with a
// single margin eps taken from the lowest-authority slice's value range. the
// planner-space radius of that set is what the online loop compares against
// obstacle clearances; the radius ladder is made monotone by a running max.

#include <fstream>
#include <sstream>

#include "reachtrack/value_source.hpp"

namespace reachtrack {

struct Teb {
  double beta = 0.0;
  double level = 0.0;
  double radius = 0.0;
};

struct TebTable {
  std::vector<Teb> entries;  // sorted by beta; first entry doubles as the static bound
  double delta_beta = 0.0;
  double epsilon = 0.0;  // level margin used for every entry

  const Teb& steb() const {
    require(!entries.empty(), "teb table: empty");
    return entries.front();
  }

  const Teb& at_beta(double beta) const {
    for (const auto& t : entries)
      if (std::fabs(t.beta - beta) <= 1e-9) return t;
    throw contract_error("teb table: no entry at beta " + fmt_g17(beta));
  }

  void validate() const {
    require(!entries.empty(), "teb table: empty");
    for (std::size_t i = 1; i < entries.size(); ++i) {
      require(entries[i].beta > entries[i - 1].beta, "teb table: betas not increasing");
      require(entries[i].radius >= entries[i - 1].radius - 1e-12,
              "teb table: radii not monotone");
    }
  }
};

// level-set membership; the boundary counts as inside
inline bool membership(const ValueSource& src, const Vec& r, double beta, double level) {
  return src.value(r, beta) <= level;
}

// margin above the minimum at the lowest authority
inline double teb_level(const ValueSource& src, double eps_frac = 0.02,
                        std::uint64_t seed = 1) {
  auto [vmin, vmax] = src.scan_min_max(src.beta_min(), seed);
  require(vmax > vmin, src.system_id() + ": value function is constant");
  return vmin + eps_frac * (vmax - vmin);
}

// planner-space radius of {V(.; beta) <= level}
inline double dteb_radius(const ValueSource& src, double beta, double level,
                          std::uint64_t seed = 1) {
  require(beta >= src.beta_min() - 1e-9 && beta <= src.beta_max() + 1e-9,
          src.system_id() + ": beta outside the solved range");
  return src.max_error_radius(beta, level, seed);
}

inline std::vector<double> beta_ladder(double beta_lo, double beta_hi, double delta_beta) {
  require(delta_beta > 0.0, "teb table: nonpositive beta step");
  require(beta_hi >= beta_lo, "teb table: empty beta range");
  std::vector<double> out;
  for (double b = beta_lo; b <= beta_hi + 1e-9; b += delta_beta) out.push_back(std::min(b, beta_hi));
  if (out.back() < beta_hi - 1e-9) out.push_back(beta_hi);
  return out;
}

inline TebTable build_teb_table(const ValueSource& src, double delta_beta,
                                double eps_frac = 0.02, std::uint64_t seed = 1) {
  TebTable table;
  table.delta_beta = delta_beta;
  auto [vmin0, vmax0] = src.scan_min_max(src.beta_min(), seed);
  require(vmax0 > vmin0, src.system_id() + ": value function is constant");
  table.epsilon = eps_frac * (vmax0 - vmin0);
  for (double b : beta_ladder(src.beta_min(), src.beta_max(), delta_beta)) {
    Teb t;
    t.beta = b;
    double vmin = (std::fabs(b - src.beta_min()) <= 1e-12)
                      ? vmin0
                      : src.scan_min_max(b, seed).first;
    t.level = vmin + table.epsilon;
    t.radius = dteb_radius(src, b, t.level, seed);
    table.entries.push_back(t);
  }
  // monotone envelope: larger authority never reports a smaller bound
  for (std::size_t i = 1; i < table.entries.size(); ++i)
    table.entries[i].radius = std::max(table.entries[i].radius, table.entries[i - 1].radius);
  table.validate();
  return table;
}

// ---- text serialization --------------------------------------------------------

inline void save_teb_table(const std::string& path, const TebTable& t) {
  std::ofstream os(path);
  require(bool(os), "cannot open for writing: " + path);
  os << "reachtrack-teb v1\n";
  os << "delta_beta " << fmt_g17(t.delta_beta) << "\n";
  os << "epsilon " << fmt_g17(t.epsilon) << "\n";
  os << "entries " << t.entries.size() << "\n";
  os << "beta level radius\n";
  for (const auto& e : t.entries)
    os << fmt_g17(e.beta) << ' ' << fmt_g17(e.level) << ' ' << fmt_g17(e.radius) << "\n";
  require(bool(os), "write failed: " + path);
}

inline TebTable load_teb_table(const std::string& path) {
  std::ifstream is(path);
  require(bool(is), "cannot open: " + path);
  std::string line;
  std::getline(is, line);
  require(line == "reachtrack-teb v1", path + ": not a teb-table file");
  TebTable t;
  std::size_t n = 0;
  std::string key;
  is >> key >> t.delta_beta;
  require(key == "delta_beta", path + ": malformed header");
  is >> key >> t.epsilon;
  require(key == "epsilon", path + ": malformed header");
  is >> key >> n;
  require(key == "entries", path + ": malformed header");
  std::string c1, c2, c3;
  is >> c1 >> c2 >> c3;
  require(c1 == "beta" && c2 == "level" && c3 == "radius", path + ": malformed column row");
  for (std::size_t i = 0; i < n; ++i) {
    Teb e;
    is >> e.beta >> e.level >> e.radius;
    require(bool(is), path + ": truncated entries");
    t.entries.push_back(e);
  }
  t.validate();
  return t;
}

}  // namespace reachtrack

#endif
