#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "ancilla/inference/bayes_filter.hpp"
#include "ancilla/trajectory/sampler.hpp"
#include "ancilla/util/parallel.hpp"

namespace ancilla {

/// Misclassification probability of a decision rule that only sees the
/// total click number: 1 - sum_n max_j P(h_j) P(n | h_j). For two equally
/// likely hypotheses this is 1/2 sum_n min(P(n|h_0), P(n|h_1)).
inline double integrated_count_error(std::span<const std::vector<std::uint32_t>> counts,
                                     std::span<const double> priors) {
  if (counts.size() != priors.size()) {
    throw std::invalid_argument("integrated_count_error: one sample set per hypothesis");
  }
  std::map<std::uint32_t, std::vector<double>> weight;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j].empty()) throw std::invalid_argument("integrated_count_error: empty sample set");
    const double w = priors[j] / static_cast<double>(counts[j].size());
    for (auto n : counts[j]) {
      auto& row = weight[n];
      row.resize(counts.size(), 0.0);
      row[j] += w;
    }
  }
  // Summing the losing weights directly keeps the result exact (and >= 0)
  // when the distributions do not overlap.
  double error = 0.0;
  for (const auto& [n, row] : weight) {
    double total = 0.0;
    for (double w : row) total += w;
    error += total - *std::max_element(row.begin(), row.end());
  }
  return error;
}

struct QeOptions {
  double T = 25.0;
  double dt = 1e-3;
  /// Records simulated per hypothesis.
  std::size_t n_traj = 2000;
  std::uint64_t seed = 1;
  /// Spacing of the output time grid (rounded to whole steps).
  double output_interval = 0.25;
  unsigned workers = 0;
  Integrator integrator = Integrator::exact;
};

/// Outcome of one simulated record filtered against every hypothesis.
struct RunSummary {
  std::size_t truth = 0;
  /// Chosen hypothesis at each output time, -1 on a tie.
  std::vector<int> choices;
  /// Cumulative clicks at each output time.
  std::vector<std::uint32_t> counts;
  std::vector<double> final_posterior;
  std::vector<double> final_log_likelihood;
  DetectionRecord record;
};

struct QeCurve {
  std::vector<double> times;
  std::vector<double> qe_bayes;
  std::vector<double> qe_bayes_stderr;
  std::vector<double> qe_counts;
};

struct QeEstimate {
  QeCurve curve;
  /// Runs in order: hypothesis 0 runs first, then hypothesis 1, ...
  std::vector<RunSummary> runs;
};

/// Simulates one record under hypothesis `truth` while filtering it against
/// all hypotheses. The true hypothesis' filter state is the simulated
/// conditioned state, so the record is drawn from its click probabilities.
inline RunSummary simulate_and_filter(std::shared_ptr<const CompiledModel> model,
                                      std::span<const Hypothesis> hypotheses, std::size_t truth,
                                      const PropagationOptions& po, std::size_t n_steps,
                                      std::span<const std::size_t> samples, Rng& rng) {
  HypothesisBank bank(model, hypotheses, po, n_steps);
  RunSummary run;
  run.truth = truth;
  run.record = DetectionRecord(po.dt, n_steps, model->spec().detector_ids());
  std::uint32_t clicks = 0;
  std::size_t next_sample = 0;
  auto take = [&] {
    const auto c = bank.choice();
    run.choices.push_back(c ? static_cast<int>(*c) : -1);
    run.counts.push_back(clicks);
  };
  for (std::size_t s = 0; s < n_steps; ++s) {
    bank.begin_step(s);
    if (next_sample < samples.size() && samples[next_sample] == s) {
      take();
      ++next_sample;
    }
    const auto probs = bank.state(truth).jump_probabilities();
    const double u = uniform01(rng);
    double acc = 0.0;
    int jump = -1;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) {
        jump = static_cast<int>(k);
        break;
      }
    }
    if (jump >= 0) {
      ++clicks;
      run.record.add_click(s, model->spec().monitored[static_cast<std::size_t>(jump)].detector_id);
    }
    bank.observe(jump);
  }
  bank.begin_step(n_steps);
  take();
  run.final_posterior = bank.posteriors();
  run.final_log_likelihood.assign(bank.log_likelihoods().begin(), bank.log_likelihoods().end());
  return run;
}

/// Monte Carlo estimate of the Bayesian misassignment probability
/// Q_E(t) = sum_j P(h_j) P(choose h_i != h_j | h_j), ties counting 1/2,
/// together with the integrated-count error evaluated on the same records.
inline QeEstimate estimate_qe(const ModelSpec& model, std::span<const Hypothesis> hypotheses,
                              const QeOptions& opts) {
  if (opts.n_traj < 1) throw std::invalid_argument("estimate_qe: need at least one record per hypothesis");
  validate_hypotheses(hypotheses, model.space);
  auto compiled = std::make_shared<const CompiledModel>(model);
  const std::size_t n_steps = step_count(opts.T, opts.dt);
  const auto stride = static_cast<std::size_t>(std::max<long long>(1, std::llround(opts.output_interval / opts.dt)));
  const auto samples = sample_steps(n_steps, stride);

  PropagationOptions po;
  po.dt = opts.dt;
  po.integrator = opts.integrator;
  po.check_every_step = false;

  const std::size_t n_h = hypotheses.size();
  QeEstimate out;
  out.runs.resize(n_h * opts.n_traj);
  parallel_for(out.runs.size(), opts.workers, [&](std::size_t i) {
    Rng rng = make_stream(opts.seed, i);
    out.runs[i] = simulate_and_filter(compiled, hypotheses, i / opts.n_traj, po, n_steps, samples, rng);
  });

  const double n = static_cast<double>(opts.n_traj);
  std::vector<double> priors;
  for (const auto& h : hypotheses) priors.push_back(h.prior);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    double qe = 0.0;
    double var = 0.0;
    std::vector<std::vector<std::uint32_t>> counts(n_h);
    for (std::size_t j = 0; j < n_h; ++j) {
      double errors = 0.0;
      for (std::size_t r = 0; r < opts.n_traj; ++r) {
        const auto& run = out.runs[j * opts.n_traj + r];
        const int c = run.choices[s];
        if (c < 0) {
          errors += 0.5;
        } else if (static_cast<std::size_t>(c) != j) {
          errors += 1.0;
        }
        counts[j].push_back(run.counts[s]);
      }
      const double e = errors / n;
      qe += priors[j] * e;
      var += priors[j] * priors[j] * e * (1.0 - e) / n;
    }
    out.curve.times.push_back(static_cast<double>(samples[s]) * opts.dt);
    out.curve.qe_bayes.push_back(qe);
    out.curve.qe_bayes_stderr.push_back(std::sqrt(var));
    out.curve.qe_counts.push_back(integrated_count_error(counts, priors));
  }
  return out;
}

/// Integrated-count error from fresh records (no filtering).
inline double integrated_count_error(const ModelSpec& model, std::span<const Hypothesis> hypotheses,
                                     double T, double dt, std::size_t n_traj, std::uint64_t seed,
                                     unsigned workers = 0) {
  validate_hypotheses(hypotheses, model.space);
  auto compiled = std::make_shared<const CompiledModel>(model);
  const std::size_t n_h = hypotheses.size();
  std::vector<std::vector<std::uint32_t>> counts(n_h, std::vector<std::uint32_t>(n_traj));
  SampleOptions so;
  so.check_every_step = false;
  parallel_for(n_h * n_traj, workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    const auto res = sample_trajectory(compiled, hypotheses[i / n_traj].rho0, T, dt, rng, {}, so);
    counts[i / n_traj][i % n_traj] = static_cast<std::uint32_t>(res.record.total_clicks());
  });
  std::vector<double> priors;
  for (const auto& h : hypotheses) priors.push_back(h.prior);
  return integrated_count_error(counts, priors);
}

}  // namespace ancilla
