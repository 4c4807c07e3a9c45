#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "ancilla/trajectory/conditioned_state.hpp"
#include "ancilla/util/rng.hpp"

namespace ancilla {

/// Draws one step of the jump / no-jump unraveling: a single uniform number
/// against the cumulative ladder of click probabilities. Returns the index
/// of the monitored jump that fired, or -1.
inline int sample_step(ConditionedState& state, Rng& rng) {
  const auto probs = state.jump_probabilities();
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) {
      state.jump(k);
      return static_cast<int>(k);
    }
  }
  state.no_jump();
  return -1;
}

/// One unraveling step from a bare density matrix, using the model's initial
/// amplitudes and ignoring its schedule. Returns the new state and the id of
/// the detector that clicked (kNoClick if none).
inline std::pair<DensityMatrix, int> step(const DensityMatrix& rho, const ModelSpec& model,
                                          double dt, Rng& rng) {
  PropagationOptions opts;
  opts.dt = dt;
  ConditionedState state(model, rho, opts);
  const int k = sample_step(state, rng);
  const int id = k < 0 ? kNoClick : model.monitored[static_cast<std::size_t>(k)].detector_id;
  return {state.density_matrix(), id};
}

struct SampleOptions {
  /// Steps between samples of observables / states; 0 samples the end only.
  std::size_t stride = 0;
  bool keep_states = false;
  Integrator integrator = Integrator::exact;
  bool check_every_step = kCheckEveryStepDefault;
};

struct TrajectoryResult {
  DetectionRecord record;
  DensityMatrix final_state;
  std::vector<double> times;
  /// observables[i][s] = Re Tr(O_i rho(times[s]))
  std::vector<std::vector<double>> observables;
  std::vector<DensityMatrix> states;
};

inline PropagationOptions propagation_options(double dt, const SampleOptions& o) {
  PropagationOptions p;
  p.dt = dt;
  p.integrator = o.integrator;
  p.check_every_step = o.check_every_step;
  return p;
}

/// Samples a conditioned trajectory over [0, T]. Scheduled pulses are
/// applied at the start of their step; events at T act after the last step.
inline TrajectoryResult sample_trajectory(std::shared_ptr<const CompiledModel> model,
                                          const DensityMatrix& rho0, double T, double dt,
                                          Rng& rng, std::span<const Operator> observables = {},
                                          const SampleOptions& opts = {}) {
  const std::size_t n_steps = step_count(T, dt);
  ConditionedState state(model, rho0, propagation_options(dt, opts));
  const ModelSpec& spec = model->spec();
  ScheduleCursor cursor(spec, dt, n_steps);

  TrajectoryResult out;
  out.record = DetectionRecord(dt, n_steps, spec.detector_ids());
  out.observables.resize(observables.size());
  const auto samples = sample_steps(n_steps, opts.stride);
  std::size_t next_sample = 0;

  auto take_sample = [&](std::size_t s) {
    out.times.push_back(static_cast<double>(s) * dt);
    for (std::size_t i = 0; i < observables.size(); ++i) {
      out.observables[i].push_back(state.expectation(observables[i]));
    }
    if (opts.keep_states) out.states.push_back(state.density_matrix());
  };

  for (std::size_t s = 0; s < n_steps; ++s) {
    cursor.apply_due(s, state);
    if (next_sample < samples.size() && samples[next_sample] == s) {
      take_sample(s);
      ++next_sample;
    }
    const int k = sample_step(state, rng);
    if (k >= 0) out.record.add_click(s, spec.monitored[static_cast<std::size_t>(k)].detector_id);
  }
  cursor.apply_due(n_steps, state);
  take_sample(n_steps);

  out.final_state = state.density_matrix();
  if (!opts.check_every_step) validate(out.final_state);
  return out;
}

inline TrajectoryResult sample_trajectory(const ModelSpec& model, const DensityMatrix& rho0,
                                          double T, double dt, Rng& rng,
                                          std::span<const Operator> observables = {},
                                          const SampleOptions& opts = {}) {
  return sample_trajectory(std::make_shared<const CompiledModel>(model), rho0, T, dt, rng,
                           observables, opts);
}

}  // namespace ancilla
