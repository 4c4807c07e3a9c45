#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ancilla/entangle/bell_basis.hpp"
#include "ancilla/trajectory/sampler.hpp"
#include "ancilla/util/parallel.hpp"

namespace ancilla {

enum class HeraldLabel { psi1, psi2, psi3, psi4, reject };

inline std::string to_string(HeraldLabel l) {
  switch (l) {
    case HeraldLabel::psi1: return "psi1";
    case HeraldLabel::psi2: return "psi2";
    case HeraldLabel::psi3: return "psi3";
    case HeraldLabel::psi4: return "psi4";
    case HeraldLabel::reject: return "reject";
  }
  return "reject";
}

struct ProtocolConfig {
  double mu = 5.0;
  double omega_rd = 2.0;
  double gamma = 1.0;
  double detector_efficiency = 1.0;
  double T = 25.0;
  /// Readout drives switch off here; the final pi-pulses act at T.
  double drive_off = 20.0;
  double dt = 1e-3;
  Integrator integrator = Integrator::exact;
  /// Steps between entries of the population trace; 0 records none.
  std::size_t population_stride = 0;
};

struct HeraldOutcome {
  DetectionRecord record;
  /// Tr(rho |psi_i><psi_i|) after the final pi-pulses, readouts in |down,down>.
  std::array<double, 4> populations{};
  HeraldLabel label = HeraldLabel::reject;
  double fidelity = 0.0;
  /// Tr(rho_q^2) of the two ion reduced state.
  double qubit_purity = 0.0;
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  /// Largest psi_4 population (pulse frame) seen before the first minus click.
  double max_p4_before_minus = 0.0;
  /// Whether the minus-click parity agrees with the state: odd counts go with
  /// p_4 > p_3, even counts with p_3 >= p_4.
  bool parity_consistent = true;
  std::vector<double> times;
  /// Bell populations in the pulse frame at `times`.
  std::vector<std::array<double, 4>> population_trace;
};

/// Label of the most populated Bell state, or reject when none exceeds 1/2.
inline HeraldLabel herald_label(const std::array<double, 4>& p) {
  const auto it = std::max_element(p.begin(), p.end());
  if (!(*it > 0.5)) return HeraldLabel::reject;
  return static_cast<HeraldLabel>(it - p.begin());
}

/// Accepts an outcome iff its fidelity reaches the threshold.
inline bool herald_decision(const HeraldOutcome& outcome, double threshold) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("herald threshold must be non-negative");
  return outcome.fidelity >= threshold;
}

class EntanglementProtocol {
 public:
  explicit EntanglementProtocol(const ProtocolConfig& config) : config_(config) {
    if (!(config.dt > 0.0)) throw ModelError("dt must be positive");
    if (!(config.drive_off >= 0.0 && config.drive_off < config.T)) {
      throw ModelError("drive_off must lie in [0, T)");
    }
    TwoCavityParams p;
    p.mu = config.mu;
    p.omega_rd = config.omega_rd;
    p.gamma = config.gamma;
    p.detector_efficiency = config.detector_efficiency;
    p.drive_off = config.drive_off;
    ModelSpec m = build_two_cavity_model(p);
    const Operator pi = pi_pulse(m.space, "qubit_A") * pi_pulse(m.space, "qubit_B");
    add_event(m, {config.T, InstantUnitary{pi, "pi_e0_AB"}});
    model_ = std::make_shared<const CompiledModel>(std::move(m));
    bell_ = std::make_unique<BellBasis>(space());
    frame_ = std::make_unique<BellBasis>(space(), level::qe);

    const double s = 1.0 / std::sqrt(2.0);
    Vector ket = Vector::Zero(static_cast<Eigen::Index>(space().total_dim()));
    for (std::size_t a : {level::q0, level::q1}) {
      for (std::size_t b : {level::q0, level::q1}) {
        ket(static_cast<Eigen::Index>(space().flat_index({a, level::down, b, level::down}))) = s * s;
      }
    }
    rho0_ = DensityMatrix::from_ket(space(), ket);
  }

  const ProtocolConfig& config() const { return config_; }
  const HilbertSpace& space() const { return model_->spec().space; }
  const ModelSpec& model() const { return model_->spec(); }
  const DensityMatrix& initial_state() const { return rho0_; }
  const BellBasis& bell_basis() const { return *bell_; }
  const BellBasis& pulse_frame_basis() const { return *frame_; }

  HeraldOutcome run(Rng& rng) const {
    const std::size_t n_steps = step_count(config_.T, config_.dt);
    PropagationOptions po;
    po.dt = config_.dt;
    po.integrator = config_.integrator;
    po.check_every_step = false;
    ConditionedState state(model_, rho0_, po);
    ScheduleCursor cursor(model_->spec(), config_.dt, n_steps);
    const auto samples = sample_steps(n_steps, config_.population_stride);
    const std::size_t minus_index = model_->spec().detector_index(port::minus);

    HeraldOutcome out;
    out.record = DetectionRecord(config_.dt, n_steps, model_->spec().detector_ids());
    std::size_t next_sample = 0;
    bool seen_minus = false;
    auto frame_populations = [&] {
      std::array<double, 4> p{};
      for (std::size_t i = 0; i < 4; ++i) p[i] = state.expectation(frame_->projector(i));
      return p;
    };

    for (std::size_t s = 0; s < n_steps; ++s) {
      cursor.apply_due(s, state);
      if (!seen_minus) {
        out.max_p4_before_minus =
            std::max(out.max_p4_before_minus, state.expectation(frame_->projector(3)));
      }
      if (config_.population_stride > 0 && next_sample < samples.size() && samples[next_sample] == s) {
        out.times.push_back(static_cast<double>(s) * config_.dt);
        out.population_trace.push_back(frame_populations());
        ++next_sample;
      }
      const int k = sample_step(state, rng);
      if (k < 0) continue;
      const int id = model_->spec().monitored[static_cast<std::size_t>(k)].detector_id;
      out.record.add_click(s, id);
      if (static_cast<std::size_t>(k) == minus_index) {
        ++out.n_minus;
        seen_minus = true;
      } else {
        ++out.n_plus;
      }
    }
    if (!seen_minus) {
      out.max_p4_before_minus =
          std::max(out.max_p4_before_minus, state.expectation(frame_->projector(3)));
    }
    if (config_.population_stride > 0) {
      out.times.push_back(static_cast<double>(n_steps) * config_.dt);
      out.population_trace.push_back(frame_populations());
    }
    cursor.apply_due(n_steps, state);

    const DensityMatrix rho = state.density_matrix();
    validate(rho);
    out.populations = bell_->populations(rho);
    out.label = herald_label(out.populations);
    out.fidelity = std::max(out.populations[2], out.populations[3]);
    const std::array<std::string, 2> ions{"qubit_A", "qubit_B"};
    out.qubit_purity = partial_trace(rho, ions).purity();
    const bool odd = out.n_minus % 2 == 1;
    out.parity_consistent = odd == (out.populations[3] > out.populations[2]);
    return out;
  }

 private:
  ProtocolConfig config_;
  std::shared_ptr<const CompiledModel> model_;
  std::unique_ptr<BellBasis> bell_;
  std::unique_ptr<BellBasis> frame_;
  DensityMatrix rho0_;
};

inline HeraldOutcome run_protocol(const ProtocolConfig& config, Rng& rng) {
  return EntanglementProtocol(config).run(rng);
}

/// Runs n independent protocol instances; run i uses stream i of `seed`.
inline std::vector<HeraldOutcome> run_protocol_ensemble(const ProtocolConfig& config, std::size_t n,
                                                        std::uint64_t seed, unsigned workers = 0) {
  const EntanglementProtocol protocol(config);
  std::vector<HeraldOutcome> out(n);
  parallel_for(n, workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    out[i] = protocol.run(rng);
  });
  return out;
}

struct FidelityCell {
  double detector_efficiency = 1.0;
  double T = 25.0;
  std::vector<double> fidelities;
  /// fraction_at_least[j] = fraction of runs with fidelity >= f_grid[j]
  std::vector<double> fraction_at_least;
  /// Counts in [k/bins, (k+1)/bins), the last bin closed at 1.
  std::vector<std::size_t> histogram;
};

struct FidelitySweepOptions {
  std::vector<double> efficiencies{0.95, 0.85, 0.75};
  std::vector<double> durations{25.0, 6.0, 15.0};
  std::vector<double> f_grid;
  std::size_t n_traj = 2500;
  std::uint64_t seed = 1;
  /// Time between drive-off and the final pi-pulses.
  double relaxation = 5.0;
  std::size_t histogram_bins = 20;
  unsigned workers = 0;
};

/// Fidelity statistics over a grid of detector efficiencies and durations.
/// The drive switches off `relaxation` before each T. Cell c draws its runs
/// from streams c * n_traj + r of the master seed.
inline std::vector<FidelityCell> fidelity_sweep(const ProtocolConfig& base,
                                                const FidelitySweepOptions& opts) {
  if (opts.histogram_bins == 0) throw std::invalid_argument("fidelity_sweep: need at least one bin");
  std::vector<FidelityCell> cells;
  std::size_t c = 0;
  for (double eta : opts.efficiencies) {
    for (double T : opts.durations) {
      ProtocolConfig cfg = base;
      cfg.detector_efficiency = eta;
      cfg.T = T;
      cfg.drive_off = T - opts.relaxation;
      cfg.population_stride = 0;
      const EntanglementProtocol protocol(cfg);
      FidelityCell cell;
      cell.detector_efficiency = eta;
      cell.T = T;
      cell.fidelities.resize(opts.n_traj);
      parallel_for(opts.n_traj, opts.workers, [&](std::size_t r) {
        Rng rng = make_stream(opts.seed, c * opts.n_traj + r);
        cell.fidelities[r] = protocol.run(rng).fidelity;
      });
      for (double f : opts.f_grid) {
        const auto n = std::count_if(cell.fidelities.begin(), cell.fidelities.end(),
                                     [f](double x) { return x >= f; });
        cell.fraction_at_least.push_back(static_cast<double>(n) / static_cast<double>(opts.n_traj));
      }
      cell.histogram.assign(opts.histogram_bins, 0);
      for (double x : cell.fidelities) {
        const auto bin = static_cast<std::size_t>(std::clamp(x, 0.0, 1.0) * static_cast<double>(opts.histogram_bins));
        ++cell.histogram[std::min(bin, opts.histogram_bins - 1)];
      }
      cells.push_back(std::move(cell));
      ++c;
    }
  }
  return cells;
}

}  // namespace ancilla
