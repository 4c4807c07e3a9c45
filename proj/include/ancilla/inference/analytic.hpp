#pragma once

#include <cmath>
#include <stdexcept>

namespace ancilla {

/// Probability that a resonantly driven two-level emitter (Rabi frequency
/// omega, decay rate gamma) starting in its ground state emits nothing
/// during [0, t].
///
/// With s = omega^2 - gamma^2/4 the survival probability is
///   e^{-gamma t/2} [1 + gamma^2 (1 - cos(sqrt(s) t)) / (4 s) + gamma sin(sqrt(s) t) / (2 sqrt(s))],
/// which is analytic in s: for s < 0 the trigonometric functions become
/// hyperbolic, and at s = 0 both ratios are evaluated by their Taylor series.
inline double no_click_probability(double t, double omega, double gamma) {
  if (!(t >= 0.0)) throw std::invalid_argument("no_click_probability: t must be non-negative");
  const double s = omega * omega - 0.25 * gamma * gamma;
  const double x = s * t * t;
  double one_minus_cos_over_s;  // (1 - cos(sqrt(s) t)) / s
  double sin_over_root;         // sin(sqrt(s) t) / sqrt(s)
  if (std::abs(x) < 1e-4) {
    const double t2 = t * t;
    one_minus_cos_over_s = t2 / 2.0 - s * t2 * t2 / 24.0 + s * s * t2 * t2 * t2 / 720.0;
    sin_over_root = t - s * t2 * t / 6.0 + s * s * t2 * t2 * t / 120.0;
  } else if (s > 0.0) {
    const double w = std::sqrt(s);
    one_minus_cos_over_s = (1.0 - std::cos(w * t)) / s;
    sin_over_root = std::sin(w * t) / w;
  } else {
    const double k = std::sqrt(-s);
    one_minus_cos_over_s = (std::cosh(k * t) - 1.0) / (-s);
    sin_over_root = std::sinh(k * t) / k;
  }
  const double bracket =
      1.0 + 0.25 * gamma * gamma * one_minus_cos_over_s + 0.5 * gamma * sin_over_root;
  return std::exp(-0.5 * gamma * t) * bracket;
}

/// Error probability of the blockaded readout (mu >> gamma): only the
/// "no click at all" records of h_1 are misassigned.
inline double qe_analytic_large_mu(double t, double omega, double gamma, double prior1) {
  return no_click_probability(t, omega, gamma) * prior1;
}

/// Steady-state photon emission rate of a resonantly driven two-level
/// emitter: gamma omega^2 / (gamma^2 + 2 omega^2).
inline double resonance_fluorescence_rate(double omega, double gamma) {
  return gamma * omega * omega / (gamma * gamma + 2.0 * omega * omega);
}

}  // namespace ancilla
