#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ancilla/trajectory/sampler.hpp"
#include "ancilla/util/parallel.hpp"

namespace ancilla {

struct EnsembleOptions {
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  std::size_t stride = 0;
  unsigned workers = 0;
  Integrator integrator = Integrator::exact;
};

struct EnsembleAverage {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
};

/// Mean of the conditioned states of n_traj independent runs at each sample
/// time. Run i uses stream i of the master seed, and runs are summed in
/// fixed-size blocks combined in block order, so the result does not depend
/// on the number of workers.
inline EnsembleAverage ensemble_average(const ModelSpec& model, const DensityMatrix& rho0, double T,
                                        double dt, const EnsembleOptions& opts) {
  if (opts.n_traj == 0) throw std::invalid_argument("ensemble_average: need at least one run");
  auto compiled = std::make_shared<const CompiledModel>(model);
  constexpr std::size_t block = 64;
  const std::size_t n_blocks = (opts.n_traj + block - 1) / block;
  const std::size_t n_samples = sample_steps(step_count(T, dt), opts.stride).size();
  const auto d = static_cast<Eigen::Index>(model.space.total_dim());

  SampleOptions so;
  so.stride = opts.stride;
  so.keep_states = true;
  so.integrator = opts.integrator;
  so.check_every_step = false;

  std::vector<std::vector<Matrix>> partial(n_blocks);
  std::vector<double> times;
  parallel_for(n_blocks, opts.workers, [&](std::size_t b) {
    std::vector<Matrix> sums(n_samples, Matrix::Zero(d, d));
    const std::size_t end = std::min(opts.n_traj, (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i) {
      Rng rng = make_stream(opts.seed, i);
      const auto res = sample_trajectory(compiled, rho0, T, dt, rng, {}, so);
      for (std::size_t s = 0; s < n_samples; ++s) sums[s] += res.states[s].matrix();
      if (i == 0) times = res.times;
    }
    partial[b] = std::move(sums);
  });

  EnsembleAverage out;
  out.times = std::move(times);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Matrix total = Matrix::Zero(d, d);
    for (const auto& p : partial) total += p[s];
    out.states.emplace_back(model.space, total / static_cast<double>(opts.n_traj));
  }
  return out;
}

}  // namespace ancilla
