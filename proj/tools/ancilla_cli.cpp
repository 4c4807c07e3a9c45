// Command-line front end: run and validate experiment configs, list the
// bundled presets and evaluate the large-mu error formula.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ancilla/experiment/config.hpp"
#include "ancilla/experiment/runner.hpp"
#include "ancilla/inference/analytic.hpp"
#include "ancilla_presets.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::optional<std::string> find_preset(const std::string& name) {
  for (const auto& p : ancilla::presets::all) {
    if (name == p.name) return std::string(p.text);
  }
  return std::nullopt;
}

// A config argument is a file path, or "preset:<name>" for a bundled preset.
ancilla::ExperimentConfig load(const std::string& arg) {
  const std::string prefix = "preset:";
  if (arg.rfind(prefix, 0) == 0) {
    const auto text = find_preset(arg.substr(prefix.size()));
    if (!text) throw ancilla::ConfigError({"no preset named '" + arg.substr(prefix.size()) + "'"});
    return ancilla::validate_config(*text);
  }
  return ancilla::load_config(arg);
}

void print_errors(const ancilla::ConfigError& e) {
  std::cerr << "invalid config:\n";
  for (const auto& msg : e.errors()) std::cerr << "  " << msg << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ancilla-based qubit readout and heralded entanglement simulator"};
  app.require_subcommand(1);

  std::string config_arg;
  std::optional<std::string> output_override;
  std::optional<std::size_t> n_traj_override;
  std::optional<unsigned> workers_override;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_arg, "Config file, or preset:<name>")->required();
  run->add_option("--output", output_override, "Override the output directory");
  run->add_option("--n-traj", n_traj_override, "Override n_traj");
  run->add_option("--workers", workers_override, "Worker threads (0 = all cores)");

  auto* validate = app.add_subcommand("validate", "Check a config file and print the resolved settings");
  validate->add_option("config", config_arg, "Config file, or preset:<name>")->required();

  auto* presets = app.add_subcommand("presets", "Bundled figure presets");
  presets->require_subcommand(1);
  auto* list = presets->add_subcommand("list", "List preset names");
  std::string preset_name;
  auto* show = presets->add_subcommand("show", "Print a preset");
  show->add_option("name", preset_name)->required();

  double omega = 2.0;
  double gamma = 1.0;
  double prior1 = 0.5;
  std::vector<double> times;
  auto* analytic = app.add_subcommand("qe-analytic", "Error probability of the blockaded readout");
  analytic->add_option("--omega", omega, "Readout Rabi frequency")->required();
  analytic->add_option("--gamma", gamma, "Readout decay rate")->required();
  analytic->add_option("--t", times, "Probe durations")->required();
  analytic->add_option("--prior1", prior1, "Prior probability of the bright qubit state");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) {
      auto cfg = load(config_arg);
      if (output_override) cfg.output = *output_override;
      if (n_traj_override) cfg.n_traj = *n_traj_override;
      if (workers_override) cfg.workers = *workers_override;
      if (cfg.n_traj < 1) throw ancilla::ConfigError({"n_traj: must be >= 1"});
      const auto report = ancilla::run_experiment(cfg);
      std::cout << report.summary.dump(2) << '\n';
      std::cout << "wrote " << report.files.size() << " outputs to " << cfg.output << '\n';
    } else if (*validate) {
      const auto cfg = load(config_arg);
      std::cout << ancilla::to_json(cfg).dump(2) << '\n';
    } else if (*list) {
      for (const auto& p : ancilla::presets::all) std::cout << p.name << '\n';
    } else if (*show) {
      const auto text = find_preset(preset_name);
      if (!text) throw ancilla::ConfigError({"no preset named '" + preset_name + "'"});
      std::cout << *text;
    } else if (*analytic) {
      if (!(gamma > 0.0) || !(omega >= 0.0) || !(prior1 >= 0.0 && prior1 <= 1.0)) {
        throw ancilla::ConfigError({"qe-analytic: need gamma > 0, omega >= 0, prior1 in [0,1]"});
      }
      std::cout << "t,qe\n";
      for (double t : times) {
        std::cout << ancilla::format_double(t) << ','
                  << ancilla::format_double(ancilla::qe_analytic_large_mu(t, omega, gamma, prior1)) << '\n';
      }
    }
  } catch (const ancilla::ConfigError& e) {
    print_errors(e);
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
