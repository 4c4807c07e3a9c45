#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ancilla/trajectory/conditioned_state.hpp"
#include "ancilla/trajectory/record.hpp"

namespace ancilla {

struct Hypothesis {
  std::string label;
  DensityMatrix rho0;
  double prior = 0.5;
};

inline void validate_hypotheses(std::span<const Hypothesis> hs, const HilbertSpace& space) {
  if (hs.empty()) throw std::invalid_argument("need at least one hypothesis");
  double total = 0.0;
  for (const auto& h : hs) {
    require_same_space(space, h.rho0.space(), "hypothesis " + h.label);
    validate(h.rho0);
    if (!(h.prior >= 0.0)) throw std::invalid_argument("hypothesis " + h.label + " has a negative prior");
    total += h.prior;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("hypothesis priors must sum to 1");
}

/// The two readout hypotheses: qubit in |0> or |1>, readout ion in |down>.
inline std::vector<Hypothesis> readout_hypotheses(const HilbertSpace& space, double prior1 = 0.5) {
  return {
      {"h0", DensityMatrix::basis_state(space, space.flat_index({0, 0})), 1.0 - prior1},
      {"h1", DensityMatrix::basis_state(space, space.flat_index({1, 0})), prior1},
  };
}

struct PosteriorTrace {
  std::vector<double> times;
  /// probabilities[s][i] = P(h_i | record up to times[s])
  std::vector<std::vector<double>> probabilities;
  std::vector<std::vector<double>> log_likelihoods;
};

/// Normalized exp(log_prior + log_likelihood); -inf entries map to exactly 0.
inline std::vector<double> posterior_from_log(std::span<const double> log_weight) {
  const double top = *std::max_element(log_weight.begin(), log_weight.end());
  std::vector<double> p(log_weight.size(), 0.0);
  if (!std::isfinite(top)) return p;
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::isfinite(log_weight[i]) ? std::exp(log_weight[i] - top) : 0.0;
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

/// Index of the strictly largest entry, or nullopt on an exact tie.
inline std::optional<std::size_t> argmax_unique(std::span<const double> v) {
  std::size_t best = 0;
  bool tie = false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) {
      best = i;
      tie = false;
    } else if (v[i] == v[best]) {
      tie = true;
    }
  }
  if (tie) return std::nullopt;
  return best;
}

/// Conditioned states of every hypothesis propagated in lockstep through
/// one record, with their accumulated log-likelihoods.
class HypothesisBank {
 public:
  HypothesisBank(std::shared_ptr<const CompiledModel> model, std::span<const Hypothesis> hypotheses,
                 PropagationOptions opts, std::size_t n_steps)
      : cursor_(model->spec(), opts.dt, n_steps) {
    validate_hypotheses(hypotheses, model->spec().space);
    for (const auto& h : hypotheses) {
      states_.emplace_back(model, h.rho0, opts);
      log_prior_.push_back(h.prior > 0.0 ? std::log(h.prior)
                                         : -std::numeric_limits<double>::infinity());
      log_lik_.push_back(0.0);
    }
  }

  std::size_t size() const { return states_.size(); }
  ConditionedState& state(std::size_t h) { return states_[h]; }
  bool alive(std::size_t h) const { return std::isfinite(log_lik_[h]); }
  std::span<const double> log_likelihoods() const { return log_lik_; }

  /// Applies pulses due at `step` to every live hypothesis.
  void begin_step(std::size_t step) {
    cursor_.apply_due(step, [&](const PulseEvent& ev) {
      for (std::size_t h = 0; h < states_.size(); ++h) {
        if (alive(h)) states_[h].apply(ev);
      }
    });
  }

  /// Consumes one step of the record: `jump` is the monitored-jump index
  /// that clicked, or -1.
  void observe(int jump) {
    for (std::size_t h = 0; h < states_.size(); ++h) {
      if (!alive(h)) continue;
      auto& st = states_[h];
      const auto probs = st.jump_probabilities();
      if (jump >= 0) {
        const double p = probs[static_cast<std::size_t>(jump)];
        if (!(p > 0.0)) {
          log_lik_[h] = -std::numeric_limits<double>::infinity();
          continue;
        }
        log_lik_[h] += std::log(p);
        st.jump(static_cast<std::size_t>(jump));
      } else {
        log_lik_[h] += std::log1p(-st.total_jump_probability());
        st.no_jump();
      }
    }
  }

  std::vector<double> log_weights() const {
    std::vector<double> w(states_.size());
    for (std::size_t h = 0; h < w.size(); ++h) w[h] = log_prior_[h] + log_lik_[h];
    return w;
  }

  std::vector<double> posteriors() const { return posterior_from_log(log_weights()); }

  /// Most probable hypothesis, nullopt on an exact tie.
  std::optional<std::size_t> choice() const { return argmax_unique(log_weights()); }

 private:
  ScheduleCursor cursor_;
  std::vector<ConditionedState> states_;
  std::vector<double> log_prior_;
  std::vector<double> log_lik_;
};

struct FilterOptions {
  std::size_t stride = 0;
  Integrator integrator = Integrator::exact;
  bool check_every_step = kCheckEveryStepDefault;
};

/// Posterior probabilities of each hypothesis along a record. The record
/// must have been produced with the model's dynamics at the same dt.
inline PosteriorTrace bayesian_filter(const DetectionRecord& record, const ModelSpec& model,
                                      std::span<const Hypothesis> hypotheses,
                                      const FilterOptions& opts = {}) {
  auto compiled = std::make_shared<const CompiledModel>(model);
  PropagationOptions po;
  po.dt = record.dt();
  po.integrator = opts.integrator;
  po.check_every_step = opts.check_every_step;
  HypothesisBank bank(compiled, hypotheses, po, record.steps());

  PosteriorTrace trace;
  const auto samples = sample_steps(record.steps(), opts.stride);
  std::size_t next_sample = 0;
  auto take = [&](std::size_t s) {
    trace.times.push_back(static_cast<double>(s) * record.dt());
    trace.probabilities.push_back(bank.posteriors());
    trace.log_likelihoods.emplace_back(bank.log_likelihoods().begin(), bank.log_likelihoods().end());
  };

  auto click = record.clicks().begin();
  for (std::size_t s = 0; s < record.steps(); ++s) {
    bank.begin_step(s);
    if (next_sample < samples.size() && samples[next_sample] == s) {
      take(s);
      ++next_sample;
    }
    int jump = -1;
    if (click != record.clicks().end() && click->step == s) {
      jump = static_cast<int>(model.detector_index(click->detector));
      ++click;
    }
    bank.observe(jump);
  }
  bank.begin_step(record.steps());
  take(record.steps());
  return trace;
}

/// Hypothesis with the largest final posterior, nullopt on an exact tie.
inline std::optional<std::size_t> classify(const PosteriorTrace& trace) {
  if (trace.probabilities.empty()) return std::nullopt;
  return argmax_unique(trace.probabilities.back());
}

inline std::string classify_label(const PosteriorTrace& trace, std::span<const Hypothesis> hs) {
  const auto c = classify(trace);
  return c ? hs[*c].label : std::string("tie");
}

}  // namespace ancilla
