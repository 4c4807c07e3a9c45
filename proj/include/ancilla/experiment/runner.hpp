#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ancilla/entangle/protocol.hpp"
#include "ancilla/experiment/config.hpp"
#include "ancilla/inference/analytic.hpp"
#include "ancilla/inference/error_rates.hpp"
#include "ancilla/models/builders.hpp"

#ifndef ANCILLA_VERSION
#define ANCILLA_VERSION "0.1.0"
#endif

namespace ancilla {

/// Shortest "%.*g" rendering that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  j["mu"] = c.mu;
  j["Gamma"] = c.Gamma;
  j["omega_q"] = c.omega_q;
  j["beta"] = c.beta;
  j["detector_efficiency"] = c.detector_efficiency;
  j["T"] = c.T;
  j["omega_rd"] = c.omega_rd;
  j["delta"] = c.delta;
  j["gamma"] = c.gamma;
  j["dt"] = c.dt;
  j["n_traj"] = c.n_traj;
  j["seed"] = c.seed;
  j["t_pi"] = c.t_pi;
  j["drive_off"] = c.drive_off ? nlohmann::json(*c.drive_off) : nlohmann::json(nullptr);
  j["relaxation"] = c.relaxation;
  j["prior1"] = c.prior1;
  j["output_interval"] = c.output_interval;
  j["trace_runs"] = c.trace_runs;
  j["fidelity_thresholds"] = c.fidelity_thresholds;
  j["output"] = c.output;
  j["write_records"] = c.write_records;
  j["workers"] = c.workers;
  j["integrator"] = c.integrator == Integrator::exact ? "exact" : "euler";
  return j;
}

struct RunReport {
  std::vector<std::string> files;
  nlohmann::json summary;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::size_t steps_per(double interval, double dt) {
  return static_cast<std::size_t>(std::max<long long>(1, std::llround(interval / dt)));
}

inline void run_readout(const ExperimentConfig& cfg, const std::filesystem::path& dir, RunReport& report) {
  const bool reflection = cfg.mode == Mode::readout_reflection;
  const std::vector<std::string> keys{"mu", "Gamma", "omega_q", "beta", "T", "variant"};
  auto with_keys = [&](std::vector<std::string> tail) {
    std::vector<std::string> h = keys;
    h.insert(h.end(), tail.begin(), tail.end());
    return h;
  };
  CsvWriter qe(dir / "qe_curve.csv",
               with_keys({"time", "qe_bayes", "qe_bayes_stderr", "qe_counts", "qe_analytic_large_mu"}));
  CsvWriter counts(dir / "counts.csv", with_keys({"hypothesis", "run_id", "total_clicks"}));
  CsvWriter cumulative(dir / "cumulative_counts.csv", with_keys({"hypothesis", "time", "mean_counts"}));
  CsvWriter traces(dir / "posterior_traces.csv", with_keys({"hypothesis", "run_id", "time", "p_h0", "p_h1"}));
  report.files.insert(report.files.end(),
                      {"qe_curve.csv", "counts.csv", "cumulative_counts.csv", "posterior_traces.csv"});
  const std::vector<double> beta_values = reflection ? cfg.beta : std::vector<double>{0.0};
  std::vector<std::string> variants;
  if (cfg.mode == Mode::readout_decay && !cfg.t_pi.empty()) variants.push_back("none");
  variants.push_back(cfg.t_pi.empty() ? "none" : "t_pi");

  report.summary["cases"] = nlohmann::json::array();
  std::size_t case_index = 0;
  for (double mu : cfg.mu) {
    for (double Gamma : cfg.Gamma) {
      for (double wq : cfg.omega_q) {
        for (double beta : beta_values) {
          for (double T : cfg.T) {
            for (const auto& variant : variants) {
              const std::vector<double> pulses = variant == "none" ? std::vector<double>{} : cfg.t_pi;
              ModelSpec model;
              double omega = cfg.omega_rd;
              if (reflection) {
                model = build_reflection_model({mu, beta, cfg.delta, cfg.gamma, Gamma, wq, pulses});
                omega = beta * std::sqrt(cfg.gamma);
              } else {
                model = build_direct_drive_model({mu, cfg.omega_rd, cfg.delta, cfg.gamma, Gamma, wq, pulses});
              }
              const auto hs = readout_hypotheses(model.space, cfg.prior1);
              QeOptions qo;
              qo.T = T;
              qo.dt = cfg.dt;
              qo.n_traj = cfg.n_traj;
              qo.seed = cfg.seed;
              qo.output_interval = cfg.output_interval;
              qo.workers = cfg.workers;
              qo.integrator = cfg.integrator;
              const auto est = estimate_qe(model, hs, qo);

              const std::vector<std::string> key_cells{format_double(mu), format_double(Gamma),
                                                       format_double(wq), format_double(beta),
                                                       format_double(T), variant};
              auto row = [&](CsvWriter& w, std::vector<std::string> tail) {
                std::vector<std::string> r = key_cells;
                r.insert(r.end(), tail.begin(), tail.end());
                w.row(r);
              };
              const auto& c = est.curve;
              for (std::size_t s = 0; s < c.times.size(); ++s) {
                row(qe, {format_double(c.times[s]), format_double(c.qe_bayes[s]),
                         format_double(c.qe_bayes_stderr[s]), format_double(c.qe_counts[s]),
                         format_double(qe_analytic_large_mu(c.times[s], omega, cfg.gamma, cfg.prior1))});
              }
              for (std::size_t h = 0; h < hs.size(); ++h) {
                for (std::size_t s = 0; s < c.times.size(); ++s) {
                  double sum = 0.0;
                  for (std::size_t r = 0; r < cfg.n_traj; ++r) sum += est.runs[h * cfg.n_traj + r].counts[s];
                  row(cumulative, {hs[h].label, format_double(c.times[s]),
                                   format_double(sum / static_cast<double>(cfg.n_traj))});
                }
                for (std::size_t r = 0; r < cfg.n_traj; ++r) {
                  const auto& run = est.runs[h * cfg.n_traj + r];
                  row(counts, {hs[h].label, std::to_string(r), std::to_string(run.counts.back())});
                }
                FilterOptions fo;
                fo.stride = steps_per(cfg.output_interval, cfg.dt);
                fo.integrator = cfg.integrator;
                fo.check_every_step = false;
                for (std::size_t r = 0; r < std::min(cfg.trace_runs, cfg.n_traj); ++r) {
                  const auto trace = bayesian_filter(est.runs[h * cfg.n_traj + r].record, model, hs, fo);
                  for (std::size_t s = 0; s < trace.times.size(); ++s) {
                    row(traces, {hs[h].label, std::to_string(r), format_double(trace.times[s]),
                                 format_double(trace.probabilities[s][0]),
                                 format_double(trace.probabilities[s][1])});
                  }
                }
              }
              if (cfg.write_records) {
                const auto rec_dir = dir / "records";
                std::filesystem::create_directories(rec_dir);
                for (std::size_t i = 0; i < est.runs.size(); ++i) {
                  const std::string name = "case" + std::to_string(case_index) + "_" +
                                           hs[est.runs[i].truth].label + "_run" +
                                           std::to_string(i % cfg.n_traj) + ".csv";
                  std::ofstream out(rec_dir / name);
                  write_record_csv(out, est.runs[i].record);
                }
                report.files.push_back("records/case" + std::to_string(case_index) + "_*.csv");
              }
              report.summary["cases"].push_back({{"mu", mu},
                                                 {"Gamma", Gamma},
                                                 {"omega_q", wq},
                                                 {"beta", beta},
                                                 {"T", T},
                                                 {"variant", variant},
                                                 {"final_qe_bayes", c.qe_bayes.back()},
                                                 {"final_qe_bayes_stderr", c.qe_bayes_stderr.back()},
                                                 {"final_qe_counts", c.qe_counts.back()}});
              ++case_index;
            }
          }
        }
      }
    }
  }
}

inline void run_entangle(const ExperimentConfig& cfg, const std::filesystem::path& dir, RunReport& report) {
  CsvWriter herald(dir / "herald.csv",
                   {"mu", "eta", "T", "run_id", "n_plus_clicks", "n_minus_clicks", "p1", "p2", "p3", "p4",
                    "fidelity", "heralded_label", "purity"});
  CsvWriter sweep(dir / "fidelity_sweep.csv", {"mu", "eta", "T", "f", "fraction"});
  CsvWriter pops(dir / "populations.csv", {"mu", "eta", "T", "run_id", "time", "p1", "p2", "p3", "p4"});
  report.files.insert(report.files.end(), {"herald.csv", "fidelity_sweep.csv", "populations.csv"});
  report.summary["cells"] = nlohmann::json::array();

  std::size_t cell = 0;
  for (double mu : cfg.mu) {
    for (double eta : cfg.detector_efficiency) {
      for (double T : cfg.T) {
        ProtocolConfig pc;
        pc.mu = mu;
        pc.omega_rd = cfg.omega_rd;
        pc.gamma = cfg.gamma;
        pc.detector_efficiency = eta;
        pc.T = T;
        pc.drive_off = cfg.drive_off.value_or(T - cfg.relaxation);
        pc.dt = cfg.dt;
        pc.integrator = cfg.integrator;
        const EntanglementProtocol plain(pc);
        pc.population_stride = steps_per(cfg.output_interval, cfg.dt);
        const EntanglementProtocol traced(pc);

        std::vector<HeraldOutcome> out(cfg.n_traj);
        parallel_for(cfg.n_traj, cfg.workers, [&](std::size_t r) {
          Rng rng = make_stream(cfg.seed, cell * cfg.n_traj + r);
          out[r] = (r < cfg.trace_runs ? traced : plain).run(rng);
        });

        const std::vector<std::string> key{format_double(mu), format_double(eta), format_double(T)};
        auto row = [&](CsvWriter& w, std::vector<std::string> tail) {
          std::vector<std::string> r = key;
          r.insert(r.end(), tail.begin(), tail.end());
          w.row(r);
        };
        std::array<std::size_t, 5> freq{};
        for (std::size_t r = 0; r < out.size(); ++r) {
          const auto& o = out[r];
          ++freq[static_cast<std::size_t>(o.label)];
          row(herald, {std::to_string(r), std::to_string(o.n_plus), std::to_string(o.n_minus),
                       format_double(o.populations[0]), format_double(o.populations[1]),
                       format_double(o.populations[2]), format_double(o.populations[3]),
                       format_double(o.fidelity), to_string(o.label), format_double(o.qubit_purity)});
          for (std::size_t s = 0; s < o.times.size(); ++s) {
            const auto& p = o.population_trace[s];
            row(pops, {std::to_string(r), format_double(o.times[s]), format_double(p[0]),
                       format_double(p[1]), format_double(p[2]), format_double(p[3])});
          }
          if (cfg.write_records) {
            const auto rec_dir = dir / "records";
            std::filesystem::create_directories(rec_dir);
            std::ofstream f(rec_dir / ("cell" + std::to_string(cell) + "_run" + std::to_string(r) + ".csv"));
            write_record_csv(f, o.record);
          }
        }
        if (cfg.write_records) report.files.push_back("records/cell" + std::to_string(cell) + "_*.csv");
        const double n = static_cast<double>(out.size());
        for (double f : cfg.fidelity_thresholds) {
          const auto k = std::count_if(out.begin(), out.end(), [f](const HeraldOutcome& o) { return o.fidelity >= f; });
          row(sweep, {format_double(f), format_double(static_cast<double>(k) / n)});
        }
        nlohmann::json labels;
        for (std::size_t i = 0; i < 5; ++i) {
          labels[to_string(static_cast<HeraldLabel>(i))] = static_cast<double>(freq[i]) / n;
        }
        const auto above = std::count_if(out.begin(), out.end(), [](const HeraldOutcome& o) { return o.fidelity > 0.9; });
        report.summary["cells"].push_back({{"mu", mu},
                                           {"eta", eta},
                                           {"T", T},
                                           {"drive_off", pc.drive_off},
                                           {"label_frequencies", labels},
                                           {"fraction_fidelity_above_0.9", static_cast<double>(above) / n}});
        ++cell;
      }
    }
  }
}

}  // namespace detail

/// Runs the campaign described by `cfg` and writes its datasets and a
/// manifest.json into cfg.output. CSV contents depend only on the config.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output);
  std::filesystem::create_directories(dir);
  RunReport report;
  if (cfg.mode == Mode::entangle) {
    detail::run_entangle(cfg, dir, report);
  } else {
    detail::run_readout(cfg, dir, report);
  }
  nlohmann::json manifest;
  manifest["version"] = ANCILLA_VERSION;
  manifest["timestamp"] = detail::utc_timestamp();
  manifest["seed"] = cfg.seed;
  manifest["config"] = to_json(cfg);
  manifest["files"] = report.files;
  manifest["summary"] = report.summary;
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  report.files.push_back("manifest.json");
  return report;
}

}  // namespace ancilla
