#pragma once

#include <array>
#include <cmath>

#include "ancilla/core/density_matrix.hpp"
#include "ancilla/models/builders.hpp"

namespace ancilla {

/// |psi_1> = |00>, |psi_2> = |11>, |psi_3,4> = (|01> +- |10>)/sqrt2 on the
/// two qubit ions of the two-cavity space. `zero_level` selects the ion level
/// playing the role of |0>; passing level::qe gives the basis in the frame
/// of the t = 0 pi-pulses, where |e> stands in for |0>.
class BellBasis {
 public:
  explicit BellBasis(const HilbertSpace& space, std::size_t zero_level = level::q0)
      : space_(space) {
    const double s = 1.0 / std::sqrt(2.0);
    // Amplitudes over (q_A, q_B) in {0,1}^2, ordered 00, 01, 10, 11.
    const std::array<std::array<double, 4>, 4> coeff = {{
        {1, 0, 0, 0},
        {0, 0, 0, 1},
        {0, s, s, 0},
        {0, s, -s, 0},
    }};
    const std::size_t z = zero_level;
    const std::size_t o = level::q1;
    const std::array<std::array<std::size_t, 2>, 4> qubits = {{{z, z}, {z, o}, {o, z}, {o, o}}};
    const auto d = static_cast<Eigen::Index>(space.total_dim());
    for (std::size_t i = 0; i < 4; ++i) {
      Vector ket = Vector::Zero(d);
      Matrix traced = Matrix::Zero(d, d);
      for (std::size_t a = 0; a < 4; ++a) {
        if (coeff[i][a] == 0.0) continue;
        ket(static_cast<Eigen::Index>(
            space.flat_index({qubits[a][0], level::down, qubits[a][1], level::down}))) = coeff[i][a];
      }
      // Readouts traced: sum over readout configurations of the same qubit projector.
      for (std::size_t ra = 0; ra < 2; ++ra) {
        for (std::size_t rb = 0; rb < 2; ++rb) {
          Vector k = Vector::Zero(d);
          for (std::size_t a = 0; a < 4; ++a) {
            if (coeff[i][a] == 0.0) continue;
            k(static_cast<Eigen::Index>(space.flat_index({qubits[a][0], ra, qubits[a][1], rb}))) =
                coeff[i][a];
          }
          traced += k * k.adjoint();
        }
      }
      kets_[i] = ket;
      projectors_[i] = Operator(space, ket * ket.adjoint());
      traced_projectors_[i] = Operator(space, traced);
    }
  }

  const HilbertSpace& space() const { return space_; }
  const Vector& ket(std::size_t i) const { return kets_.at(i); }

  /// |psi_i><psi_i| with both readout ions in |down>.
  const Operator& projector(std::size_t i) const { return projectors_.at(i); }

  /// |psi_i><psi_i| (x) 1 on the readout ions.
  const Operator& traced_projector(std::size_t i) const { return traced_projectors_.at(i); }

  std::array<double, 4> populations(const DensityMatrix& rho) const {
    std::array<double, 4> p{};
    for (std::size_t i = 0; i < 4; ++i) p[i] = (kets_[i].adjoint() * rho.matrix() * kets_[i])(0).real();
    return p;
  }

 private:
  HilbertSpace space_;
  std::array<Vector, 4> kets_;
  std::array<Operator, 4> projectors_;
  std::array<Operator, 4> traced_projectors_;
};

}  // namespace ancilla
