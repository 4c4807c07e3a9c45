#pragma once

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ancilla/trajectory/conditioned_state.hpp"

namespace ancilla {

enum class Mode { readout_direct, readout_decay, readout_reflection, entangle };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::readout_direct: return "readout-direct";
    case Mode::readout_decay: return "readout-decay";
    case Mode::readout_reflection: return "readout-reflection";
    case Mode::entangle: return "entangle";
  }
  return "?";
}

/// Every violation found in a configuration, reported together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) out += (out.empty() ? "" : "\n") + e;
    return out;
  }
  std::vector<std::string> errors_;
};

/// Rates and times are in units of the readout decay rate gamma. Keys whose
/// value may be a list are swept over their Cartesian product.
struct ExperimentConfig {
  Mode mode = Mode::readout_direct;
  std::vector<double> mu{5.0};
  std::vector<double> Gamma{0.0};
  std::vector<double> omega_q{0.0};
  std::vector<double> beta{2.0};
  std::vector<double> detector_efficiency{1.0};
  std::vector<double> T{25.0};
  double omega_rd = 2.0;
  double delta = 0.0;
  double gamma = 1.0;
  double dt = 1e-3;
  std::size_t n_traj = 2000;
  std::uint64_t seed = 1;
  std::vector<double> t_pi;
  std::optional<double> drive_off;
  double relaxation = 5.0;
  double prior1 = 0.5;
  double output_interval = 0.25;
  std::size_t trace_runs = 2;
  std::vector<double> fidelity_thresholds;
  std::string output = "out";
  bool write_records = false;
  unsigned workers = 0;
  Integrator integrator = Integrator::exact;
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "mode",  "mu",   "Gamma",     "omega_q",  "beta",     "detector_efficiency", "eta",
      "T",     "omega_rd", "delta", "gamma",    "dt",       "n_traj",              "seed",
      "t_pi",  "drive_off", "relaxation", "prior1", "output_interval", "trace_runs",
      "fidelity_thresholds", "output", "write_records", "workers", "integrator"};
  return keys;
}

/// Keys that only make sense in some modes.
inline bool key_applies(const std::string& key, Mode mode) {
  const bool entangle = mode == Mode::entangle;
  if (key == "Gamma" || key == "omega_q" || key == "t_pi" || key == "prior1" || key == "delta") {
    return !entangle;
  }
  if (key == "beta") return mode == Mode::readout_reflection;
  if (key == "omega_rd") return mode != Mode::readout_reflection;
  if (key == "detector_efficiency" || key == "eta" || key == "drive_off" || key == "relaxation" ||
      key == "fidelity_thresholds") {
    return entangle;
  }
  return true;
}

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  template <class T>
  void scalar(const YAML::Node& node, const std::string& key, T& out) {
    try {
      out = node.as<T>();
    } catch (const YAML::Exception&) {
      errors_.push_back(key + ": expected " + type_name<T>());
    }
  }

  void list(const YAML::Node& node, const std::string& key, std::vector<double>& out) {
    try {
      if (node.IsSequence()) {
        out = node.as<std::vector<double>>();
        if (out.empty()) errors_.push_back(key + ": list must not be empty");
      } else {
        out = {node.as<double>()};
      }
    } catch (const YAML::Exception&) {
      errors_.push_back(key + ": expected a number or a list of numbers");
    }
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "true or false";
    else if constexpr (std::is_integral_v<T>) return "a non-negative integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else return "a string";
  }
  std::vector<std::string>& errors_;
};

inline std::string fmt_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// Parses a flat YAML mapping, applies defaults and checks every field.
/// Throws ConfigError listing all problems found.
inline ExperimentConfig validate_config(const std::string& text) {
  std::vector<std::string> errors;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({std::string("syntax error: ") + e.what()});
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError({"config must be a mapping of key: value pairs"});

  ExperimentConfig cfg;
  std::map<std::string, YAML::Node> given;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!detail::known_keys().count(key)) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    given[key] = kv.second;
  }

  bool have_mode = false;
  if (!given.count("mode")) {
    errors.push_back("mode: missing (one of readout-direct, readout-decay, readout-reflection, entangle)");
  } else {
    std::string m;
    detail::Reader(errors).scalar(given["mode"], "mode", m);
    have_mode = true;
    if (m == "readout-direct") cfg.mode = Mode::readout_direct;
    else if (m == "readout-decay") cfg.mode = Mode::readout_decay;
    else if (m == "readout-reflection") cfg.mode = Mode::readout_reflection;
    else if (m == "entangle") cfg.mode = Mode::entangle;
    else {
      have_mode = false;
      if (!m.empty()) errors.push_back("mode: unknown mode '" + m + "'");
    }
  }

  if (cfg.mode == Mode::entangle) cfg.T = {25.0};
  if (cfg.mode == Mode::readout_reflection) cfg.T = {30.0};
  cfg.fidelity_thresholds.clear();
  for (int i = 0; i <= 20; ++i) cfg.fidelity_thresholds.push_back(0.05 * i);

  detail::Reader rd(errors);
  for (auto& [key, node] : given) {
    if (key == "mode") continue;
    if (have_mode && !detail::key_applies(key, cfg.mode)) {
      errors.push_back(key + ": not used by mode " + to_string(cfg.mode));
      continue;
    }
    if (key == "mu") rd.list(node, key, cfg.mu);
    else if (key == "Gamma") rd.list(node, key, cfg.Gamma);
    else if (key == "omega_q") rd.list(node, key, cfg.omega_q);
    else if (key == "beta") rd.list(node, key, cfg.beta);
    else if (key == "detector_efficiency" || key == "eta") rd.list(node, key, cfg.detector_efficiency);
    else if (key == "T") rd.list(node, key, cfg.T);
    else if (key == "omega_rd") rd.scalar(node, key, cfg.omega_rd);
    else if (key == "delta") rd.scalar(node, key, cfg.delta);
    else if (key == "gamma") rd.scalar(node, key, cfg.gamma);
    else if (key == "dt") rd.scalar(node, key, cfg.dt);
    else if (key == "seed") rd.scalar(node, key, cfg.seed);
    else if (key == "relaxation") rd.scalar(node, key, cfg.relaxation);
    else if (key == "prior1") rd.scalar(node, key, cfg.prior1);
    else if (key == "output_interval") rd.scalar(node, key, cfg.output_interval);
    else if (key == "output") rd.scalar(node, key, cfg.output);
    else if (key == "write_records") rd.scalar(node, key, cfg.write_records);
    else if (key == "fidelity_thresholds") rd.list(node, key, cfg.fidelity_thresholds);
    else if (key == "t_pi") {
      if (node.IsSequence() && node.size() == 0) {
        cfg.t_pi.clear();
      } else {
        rd.list(node, key, cfg.t_pi);
      }
    } else if (key == "drive_off") {
      double v = 0.0;
      rd.scalar(node, key, v);
      cfg.drive_off = v;
    } else if (key == "n_traj" || key == "trace_runs" || key == "workers") {
      long long v = 0;
      const std::size_t before = errors.size();
      rd.scalar(node, key, v);
      if (errors.size() == before && v < 0) errors.push_back(key + ": must be non-negative");
      if (key == "n_traj") cfg.n_traj = static_cast<std::size_t>(std::max(0LL, v));
      if (key == "trace_runs") cfg.trace_runs = static_cast<std::size_t>(std::max(0LL, v));
      if (key == "workers") cfg.workers = static_cast<unsigned>(std::max(0LL, v));
    } else if (key == "integrator") {
      std::string s;
      rd.scalar(node, key, s);
      if (s == "exact") cfg.integrator = Integrator::exact;
      else if (s == "euler") cfg.integrator = Integrator::euler;
      else errors.push_back("integrator: expected 'exact' or 'euler'");
    }
  }
  if (given.count("eta") && given.count("detector_efficiency")) {
    errors.push_back("eta: alias of detector_efficiency, give only one");
  }

  auto non_negative = [&](const std::vector<double>& v, const char* name) {
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        errors.push_back(std::string(name) + ": must be >= 0 (got " + detail::fmt_number(x) + ")");
      }
    }
  };
  non_negative(cfg.mu, "mu");
  non_negative(cfg.Gamma, "Gamma");
  non_negative(cfg.omega_q, "omega_q");
  non_negative(cfg.beta, "beta");
  non_negative({cfg.omega_rd}, "omega_rd");
  non_negative(cfg.t_pi, "t_pi");
  if (!std::isfinite(cfg.delta)) errors.push_back("delta: must be finite");
  for (double e : cfg.detector_efficiency) {
    if (!(e >= 0.0 && e <= 1.0)) errors.push_back("detector_efficiency outside [0,1]");
  }
  if (cfg.gamma != 1.0) errors.push_back("gamma: rates are in units of gamma, so gamma must be 1");
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) errors.push_back("dt: must be > 0");
  if (cfg.n_traj < 1) errors.push_back("n_traj: must be >= 1");
  if (!(cfg.prior1 >= 0.0 && cfg.prior1 <= 1.0)) errors.push_back("prior1: must lie in [0,1]");
  if (!(cfg.output_interval > 0.0)) errors.push_back("output_interval: must be > 0");
  if (cfg.output.empty()) errors.push_back("output: must not be empty");
  for (double t : cfg.T) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      errors.push_back("T: must be > 0 (got " + detail::fmt_number(t) + ")");
      continue;
    }
    if (cfg.dt > 0.0 && t < cfg.dt) errors.push_back("T: shorter than dt");
    for (double tp : cfg.t_pi) {
      if (tp > t) errors.push_back("t_pi: pulse at " + detail::fmt_number(tp) + " lies after T = " + detail::fmt_number(t));
    }
    if (cfg.mode == Mode::entangle) {
      const double off = cfg.drive_off.value_or(t - cfg.relaxation);
      if (!(off >= 0.0 && off < t)) {
        errors.push_back("drive_off: must lie in [0, T) for T = " + detail::fmt_number(t));
      }
    }
  }
  if (cfg.mode == Mode::entangle && !(cfg.relaxation >= 0.0)) errors.push_back("relaxation: must be >= 0");
  for (double f : cfg.fidelity_thresholds) {
    if (!(f >= 0.0)) errors.push_back("fidelity_thresholds: must be >= 0");
  }
  if (cfg.mode == Mode::readout_decay && !given.count("Gamma")) {
    errors.push_back("Gamma: required by mode readout-decay");
  }

  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return validate_config(ss.str());
}

}  // namespace ancilla
