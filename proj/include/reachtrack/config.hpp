#ifndef REACHTRACK_CONFIG_HPP
#define REACHTRACK_CONFIG_HPP

// configuration files: INI-style sections of key = value pairs.
//   - '#' or ';' starts a comment (full line or trailing)
//   - [section] opens a section; keys before any section are an error
//   - values are scalars or space-separated lists
// every (section, key) pair present in a file must appear in the schema below;
// unknown pairs fail the load so typos cannot silently fall back to defaults.

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "reachtrack/common.hpp"

namespace reachtrack {

inline const std::set<std::string>& config_schema() {
  static const std::set<std::string> schema = {
      "system.name",
      "grid.mins", "grid.maxs", "grid.counts", "grid.betas", "grid.tolerance", "grid.cfl",
      "grid.max_iters",
      "train.pretrain_iters", "train.train_iters", "train.batch_size", "train.learning_rate",
      "train.lambda", "train.horizon", "train.boundary_frac", "train.hidden_width",
      "train.hidden_layers", "train.omega0", "train.domain_lo", "train.domain_hi",
      "teb.delta_beta", "teb.eps_frac",
      "map.world_lo", "map.world_hi", "map.start", "map.goal", "map.goal_radius",
      "map.n_obstacles", "map.r_min", "map.r_max",
      "run.dt", "run.max_time", "run.goal_tol", "run.plan_resolution", "run.stall_limit",
      "run.reset_attempts", "run.seed",
      "bench.n_runs", "bench.baselines", "bench.seed",
      "mppi.samples", "mppi.horizon_steps", "mppi.horizon_dt", "mppi.temperature",
      "mppi.noise_frac", "mppi.lookahead", "mppi.collision_penalty", "mppi.plan_resolution",
  };
  return schema;
}

class Config {
 public:
  static Config parse(std::istream& is, const std::string& origin) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto where = [&] { return origin + ":" + std::to_string(lineno); };
      std::size_t cpos = line.find_first_of("#;");
      if (cpos != std::string::npos) line.erase(cpos);
      std::string s = trim(line);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw config_error(where() + ": unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty()) throw config_error(where() + ": empty section name");
        continue;
      }
      std::size_t eq = s.find('=');
      if (eq == std::string::npos) throw config_error(where() + ": expected key = value");
      std::string key = trim(s.substr(0, eq));
      std::string val = trim(s.substr(eq + 1));
      if (key.empty()) throw config_error(where() + ": empty key");
      if (val.empty()) throw config_error(where() + ": empty value for '" + key + "'");
      if (section.empty()) throw config_error(where() + ": key '" + key + "' before any section");
      std::string full = section + "." + key;
      if (!config_schema().count(full))
        throw config_error(where() + ": unknown setting '" + full + "'");
      if (cfg.values_.count(full))
        throw config_error(where() + ": duplicate setting '" + full + "'");
      cfg.values_[full] = val;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file: " + path);
    return parse(is, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    return parse_double(key, it->second);
  }

  int get_int(const std::string& key, int dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    double v = parse_double(key, it->second);
    int i = int(std::llround(v));
    if (double(i) != v) throw config_error("setting '" + key + "' must be an integer");
    return i;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::istringstream ss(it->second);
    std::uint64_t v = 0;
    if (!(ss >> v) || !at_end(ss))
      throw config_error("setting '" + key + "' is not an unsigned integer: " + it->second);
    return v;
  }

  Vec get_vec(const std::string& key, const Vec& dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::istringstream ss(it->second);
    Vec out;
    double v;
    while (ss >> v) out.push_back(v);
    if (!ss.eof() || out.empty())
      throw config_error("setting '" + key + "' is not a list of numbers: " + it->second);
    return out;
  }

  std::vector<std::string> get_words(const std::string& key,
                                     const std::vector<std::string>& dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    std::istringstream ss(it->second);
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
  }

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }
  static bool at_end(std::istringstream& ss) {
    std::string rest;
    return !(ss >> rest);
  }
  static double parse_double(const std::string& key, const std::string& text) {
    std::istringstream ss(text);
    double v = 0;
    if (!(ss >> v) || !at_end(ss))
      throw config_error("setting '" + key + "' is not a number: " + text);
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace reachtrack

#endif
