#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ancilla/models/model_spec.hpp"

namespace ancilla {

/// Level indices. Qubit ion: |0>, |1>, |e>. Readout ion: |down>, |up>.
namespace level {
inline constexpr std::size_t q0 = 0;
inline constexpr std::size_t q1 = 1;
inline constexpr std::size_t qe = 2;
inline constexpr std::size_t down = 0;
inline constexpr std::size_t up = 1;
}  // namespace level

/// Detector ids of the two beamsplitter output ports.
namespace port {
inline constexpr int plus = 0;
inline constexpr int minus = 1;
}  // namespace port

struct DirectDriveParams {
  double mu = 5.0;
  double omega_rd = 2.0;
  double delta = 0.0;
  double gamma = 1.0;
  double Gamma = 0.0;
  double omega_q = 0.0;
  /// Extra |0> <-> |e> pi-pulses after the preparation pulse at t = 0.
  std::vector<double> reexcitation_times;
};

struct ReflectionParams {
  double mu = 5.0;
  double beta = 2.0;
  double delta = 0.0;
  double gamma = 1.0;
  double Gamma = 0.0;
  double omega_q = 0.0;
  std::vector<double> reexcitation_times;
};

struct TwoCavityParams {
  double mu = 5.0;
  double omega_rd = 2.0;
  double gamma = 1.0;
  double detector_efficiency = 1.0;
  /// Time at which both readout drives are switched off; none keeps them on.
  std::optional<double> drive_off = 20.0;
};

namespace detail {

inline void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ModelError(std::string(name) + " must be a finite non-negative number");
  }
}

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ModelError(std::string(name) + " must be positive");
  }
}

inline Matrix sigma_x2() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  return m;
}

/// |0><e| + |e><0| on the qubit ion.
inline Matrix qubit_drive3() {
  return local_ket_bra(3, level::q0, level::qe) + local_ket_bra(3, level::qe, level::q0);
}

/// Swap of |0> and |e>, identity on |1>.
inline Matrix pi_swap3() {
  Matrix m = Matrix::Zero(3, 3);
  m(level::q0, level::qe) = 1.0;
  m(level::qe, level::q0) = 1.0;
  m(level::q1, level::q1) = 1.0;
  return m;
}

/// Hamiltonian terms of one qubit + readout pair, names suffixed with `tag`.
inline void add_pair_terms(ModelSpec& m, const std::string& qubit, const std::string& readout,
                           const std::string& tag, double mu, double omega_rd, double delta,
                           double omega_q) {
  const Operator pe = embed(local_ket_bra(3, level::qe, level::qe), m.space, qubit);
  const Operator pup = embed(local_ket_bra(2, level::up, level::up), m.space, readout);
  m.terms.push_back({"dipole" + tag, pe * pup, mu});
  m.terms.push_back({"detuning" + tag, Complex(-1.0) * pup, delta});
  m.terms.push_back({"readout_drive" + tag, Complex(0.5) * embed(sigma_x2(), m.space, readout),
                     omega_rd});
  m.terms.push_back({"qubit_drive" + tag, Complex(0.5) * embed(qubit_drive3(), m.space, qubit),
                     omega_q});
}

inline Operator lowering(const ModelSpec& m, const std::string& readout, double gamma) {
  return std::sqrt(gamma) * embed(local_ket_bra(2, level::down, level::up), m.space, readout);
}

}  // namespace detail

inline HilbertSpace single_cavity_space() {
  return HilbertSpace({{"qubit", 3}, {"readout", 2}});
}

inline HilbertSpace two_cavity_space() {
  return HilbertSpace({{"qubit_A", 3}, {"readout_A", 2}, {"qubit_B", 3}, {"readout_B", 2}});
}

/// |0> <-> |e> pi-pulse on the named qubit subsystem.
inline Operator pi_pulse(const HilbertSpace& space, std::string_view qubit) {
  return embed(detail::pi_swap3(), space, qubit);
}

/// Qubit ion + directly driven readout ion monitored by one counter.
inline ModelSpec build_direct_drive_model(const DirectDriveParams& p) {
  detail::require_positive(p.gamma, "gamma");
  detail::require_non_negative(p.mu, "mu");
  detail::require_non_negative(p.omega_rd, "omega_rd");
  detail::require_non_negative(p.Gamma, "Gamma");
  detail::require_non_negative(p.omega_q, "omega_q");
  if (!std::isfinite(p.delta)) throw ModelError("delta must be finite");

  ModelSpec m;
  m.space = single_cavity_space();
  detail::add_pair_terms(m, "qubit", "readout", "", p.mu, p.omega_rd, p.delta, p.omega_q);
  m.monitored.push_back({detail::lowering(m, "readout", p.gamma), 0, 1.0});
  if (p.Gamma > 0.0) {
    for (std::size_t n : {level::q0, level::q1}) {
      m.unmonitored.push_back(std::sqrt(p.Gamma) *
                              embed(local_ket_bra(3, n, level::qe), m.space, "qubit"));
    }
  }
  const Operator pi = pi_pulse(m.space, "qubit");
  add_event(m, {0.0, InstantUnitary{pi, "pi_0e"}});
  for (double t : p.reexcitation_times) {
    detail::require_non_negative(t, "reexcitation time");
    add_event(m, {t, InstantUnitary{pi, "pi_0e"}});
  }
  return m;
}

/// Rabi frequency of the readout ion under a reflected coherent field beta.
inline double reflection_rabi_frequency(double beta, double gamma) { return beta * std::sqrt(gamma); }

/// Cavity-driven readout: the counter sees C_r + beta. The readout drive is
/// the cascade Hamiltonian (i beta / 2)(C_r - C_r^dag), i.e. Rabi frequency
/// beta sqrt(gamma) with the phase fixed by the reflected field; any other
/// phase breaks conservation of the reflected photon flux.
inline ModelSpec build_reflection_model(const ReflectionParams& p) {
  detail::require_non_negative(p.beta, "beta");
  DirectDriveParams d;
  d.mu = p.mu;
  d.omega_rd = reflection_rabi_frequency(p.beta, p.gamma);
  d.delta = p.delta;
  d.gamma = p.gamma;
  d.Gamma = p.Gamma;
  d.omega_q = p.omega_q;
  d.reexcitation_times = p.reexcitation_times;
  ModelSpec m = build_direct_drive_model(d);
  const Matrix sy = Complex(0.0, 1.0) * (local_ket_bra(2, level::down, level::up) -
                                         local_ket_bra(2, level::up, level::down));
  m.terms[m.term_index("readout_drive")].shape = Complex(0.5) * embed(sy, m.space, "readout");
  m.monitored.front().op += Complex(p.beta) * Operator::identity(m.space);
  return m;
}

/// Two cavities whose outputs are mixed on a 50:50 beamsplitter; port
/// `port::plus` monitors (C_A + C_B)/sqrt2 and `port::minus` (C_A - C_B)/sqrt2.
inline ModelSpec build_two_cavity_model(const TwoCavityParams& p) {
  detail::require_positive(p.gamma, "gamma");
  detail::require_non_negative(p.mu, "mu");
  detail::require_non_negative(p.omega_rd, "omega_rd");
  if (!(p.detector_efficiency >= 0.0 && p.detector_efficiency <= 1.0)) {
    throw ModelError("detector_efficiency outside [0,1]");
  }

  ModelSpec m;
  m.space = two_cavity_space();
  detail::add_pair_terms(m, "qubit_A", "readout_A", "_A", p.mu, p.omega_rd, 0.0, 0.0);
  detail::add_pair_terms(m, "qubit_B", "readout_B", "_B", p.mu, p.omega_rd, 0.0, 0.0);

  const Operator ca = detail::lowering(m, "readout_A", p.gamma);
  const Operator cb = detail::lowering(m, "readout_B", p.gamma);
  const Complex s(1.0 / std::sqrt(2.0));
  m.monitored.push_back({s * (ca + cb), port::plus, p.detector_efficiency});
  m.monitored.push_back({s * (ca - cb), port::minus, p.detector_efficiency});

  const Operator pi = pi_pulse(m.space, "qubit_A") * pi_pulse(m.space, "qubit_B");
  add_event(m, {0.0, InstantUnitary{pi, "pi_0e_AB"}});
  if (p.drive_off) {
    detail::require_non_negative(*p.drive_off, "drive_off");
    add_event(m, {*p.drive_off, SetAmplitude{"readout_drive_A", 0.0}});
    add_event(m, {*p.drive_off, SetAmplitude{"readout_drive_B", 0.0}});
  }
  return m;
}

/// Exchanges (qubit_A, readout_A) with (qubit_B, readout_B).
inline Operator swap_cavities(const HilbertSpace& space) {
  const auto d = static_cast<Eigen::Index>(space.total_dim());
  Matrix s = Matrix::Zero(d, d);
  for (std::size_t f = 0; f < space.total_dim(); ++f) {
    const auto l = space.local_indices(f);
    const std::size_t g = space.flat_index({l[2], l[3], l[0], l[1]});
    s(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(f)) = 1.0;
  }
  return Operator(space, std::move(s));
}

/// Cavity-enhanced emission rate of an emitter with coupling g in a cavity of
/// linewidth kappa (bad-cavity limit).
inline double purcell_rate(double g, double kappa) {
  if (!(kappa > 0.0)) throw ModelError("kappa must be positive");
  return 4.0 * g * g / kappa;
}

}  // namespace ancilla
