#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "ancilla/models/model_spec.hpp"

namespace ancilla {

namespace constants {
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double hbar = 1.054571817e-34;                  // J s
}  // namespace constants

/// Static dipole pair: moment magnitudes in C m, separation in m.
struct DipoleGeometry {
  double mu_q = 0.0;
  double mu_r = 0.0;
  Eigen::Vector3d axis_q = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d axis_r = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d separation_axis = Eigen::Vector3d::UnitX();
  double separation = 0.0;
  double permittivity = 1.0;

  void validate() const {
    constexpr double tol = 1e-12;
    for (const auto* v : {&axis_q, &axis_r, &separation_axis}) {
      if (std::abs(v->norm() - 1.0) > tol) throw ModelError("dipole geometry: axis is not a unit vector");
    }
    if (!(separation > 0.0)) throw ModelError("dipole geometry: separation must be positive");
    if (!(permittivity > 0.0)) throw ModelError("dipole geometry: permittivity must be positive");
  }
};

/// Conditional level shift (rad/s) of the readout ion from the static
/// dipole-dipole interaction with local-field correction.
inline double dipole_strength(const DipoleGeometry& g) {
  g.validate();
  const double eps = g.permittivity;
  const double local_field = std::pow((eps + 2.0) / (3.0 * eps), 2);
  const double angular = g.axis_r.dot(g.axis_q) -
                         3.0 * g.axis_r.dot(g.separation_axis) * g.axis_q.dot(g.separation_axis);
  const double energy = local_field * g.mu_q * g.mu_r /
                        (4.0 * std::numbers::pi * constants::vacuum_permittivity *
                         std::pow(g.separation, 3)) *
                        angular;
  return energy / constants::hbar;
}

}  // namespace ancilla
