#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ancilla/core/density_matrix.hpp"
#include "ancilla/models/model_spec.hpp"
#include "ancilla/trajectory/record.hpp"

namespace ancilla {

namespace detail {

/// Every jump of the model at full rate, detected or not.
inline std::vector<Matrix> all_jump_matrices(const ModelSpec& model) {
  std::vector<Matrix> out;
  for (const auto& m : model.monitored) out.push_back(m.op.matrix());
  for (const auto& c : model.unmonitored) out.push_back(c.matrix());
  return out;
}

}  // namespace detail

/// d rho / dt = -i[H, rho] + sum_k (C_k rho C_k^dag - 1/2 {C_k^dag C_k, rho}).
inline Matrix lindblad_rhs(const Matrix& h, const std::vector<Matrix>& jumps, const Matrix& rho) {
  const Complex i(0.0, 1.0);
  Matrix out = -i * (h * rho - rho * h);
  for (const auto& c : jumps) {
    const Matrix cd = c.adjoint();
    const Matrix cdc = cd * c;
    out += c * rho * cd - 0.5 * (cdc * rho + rho * cdc);
  }
  return out;
}

struct LindbladSolution {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
};

/// Deterministic RK4 integration of the ensemble-average master equation,
/// applying the model's pulse schedule at the same steps as the trajectory
/// sampler does. Samples every `stride` steps and at T.
inline LindbladSolution lindblad_oracle(const ModelSpec& model, const DensityMatrix& rho0, double T,
                                        double dt, std::size_t stride = 0) {
  model.validate();
  require_same_space(model.space, rho0.space(), "lindblad_oracle");
  const std::size_t n_steps = step_count(T, dt);
  std::vector<double> amplitudes = model.initial_amplitudes();
  Matrix h = model.hamiltonian(amplitudes).matrix();
  const auto jumps = detail::all_jump_matrices(model);

  std::vector<std::size_t> event_steps;
  for (const auto& ev : model.schedule) {
    const auto idx = static_cast<std::size_t>(std::llround(ev.time / dt));
    if (ev.time < 0.0 || idx > n_steps) throw ModelError("pulse outside [0, T]");
    event_steps.push_back(idx);
  }
  std::size_t next_event = 0;
  Matrix rho = rho0.matrix();
  auto apply_events = [&](std::size_t s) {
    while (next_event < event_steps.size() && event_steps[next_event] <= s) {
      const auto& ev = model.schedule[next_event];
      if (const auto* u = std::get_if<InstantUnitary>(&ev.action)) {
        rho = u->unitary.matrix() * rho * u->unitary.matrix().adjoint();
      } else {
        const auto& set = std::get<SetAmplitude>(ev.action);
        amplitudes[model.term_index(set.term)] = set.value;
        h = model.hamiltonian(amplitudes).matrix();
      }
      ++next_event;
    }
  };

  LindbladSolution out;
  auto take = [&](std::size_t s) {
    out.times.push_back(static_cast<double>(s) * dt);
    out.states.emplace_back(model.space, rho);
  };
  for (std::size_t s = 0; s < n_steps; ++s) {
    apply_events(s);
    if (stride > 0 && s % stride == 0) take(s);
    const Matrix k1 = lindblad_rhs(h, jumps, rho);
    const Matrix k2 = lindblad_rhs(h, jumps, rho + 0.5 * dt * k1);
    const Matrix k3 = lindblad_rhs(h, jumps, rho + 0.5 * dt * k2);
    const Matrix k4 = lindblad_rhs(h, jumps, rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  apply_events(n_steps);
  take(n_steps);
  return out;
}

/// Stationary state of the master equation with the model's initial
/// amplitudes, from the null space of the Liouvillian with Tr(rho) = 1
/// replacing one equation. Only meaningful when the steady state is unique.
inline DensityMatrix lindblad_steady_state(const ModelSpec& model) {
  const auto d = static_cast<Eigen::Index>(model.space.total_dim());
  const Matrix h = model.hamiltonian().matrix();
  const auto jumps = detail::all_jump_matrices(model);
  // Column-stacking vec: vec(A X B) = (B^T kron A) vec(X).
  const Matrix id = Matrix::Identity(d, d);
  auto kron = [](const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
      }
    }
    return out;
  };
  const Complex i(0.0, 1.0);
  Matrix liou = -i * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& c : jumps) {
    const Matrix cdc = c.adjoint() * c;
    liou += kron(c.conjugate(), c) - 0.5 * kron(id, cdc) - 0.5 * kron(cdc.transpose(), id);
  }
  Vector rhs = Vector::Zero(d * d);
  for (Eigen::Index k = 0; k < d; ++k) liou(0, k * d + k) = 1.0;
  for (Eigen::Index col = 0; col < d * d; ++col) {
    if (col % (d + 1) != 0) liou(0, col) = 0.0;
  }
  rhs(0) = 1.0;
  const Vector v = liou.fullPivLu().solve(rhs);
  Matrix rho = Eigen::Map<const Matrix>(v.data(), d, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix(model.space, rho);
}

}  // namespace ancilla
