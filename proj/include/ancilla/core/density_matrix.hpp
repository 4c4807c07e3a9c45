#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "ancilla/core/operator.hpp"

namespace ancilla {

/// Raised when a state breaks Hermiticity, normalization or positivity.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StateTolerance {
  double hermiticity = 1e-10;
  double trace = 1e-9;
  double eigen_floor = -1e-8;
};

class DensityMatrix {
 public:
  DensityMatrix() = default;

  DensityMatrix(HilbertSpace space, Matrix entries)
      : space_(std::move(space)), entries_(std::move(entries)) {
    const auto d = static_cast<Eigen::Index>(space_.total_dim());
    if (entries_.rows() != d || entries_.cols() != d) {
      throw DimensionError("DensityMatrix: shape does not match the space");
    }
  }

  static DensityMatrix from_ket(const HilbertSpace& space, const Vector& ket) {
    if (ket.size() != static_cast<Eigen::Index>(space.total_dim())) {
      throw DimensionError("DensityMatrix::from_ket: ket has wrong length");
    }
    const double n2 = ket.squaredNorm();
    if (n2 <= 0.0) throw InvariantViolation("DensityMatrix::from_ket: zero vector");
    return DensityMatrix(space, ket * ket.adjoint() / n2);
  }

  static DensityMatrix basis_state(const HilbertSpace& space, std::size_t flat) {
    Vector ket = Vector::Zero(static_cast<Eigen::Index>(space.total_dim()));
    ket(static_cast<Eigen::Index>(flat)) = 1.0;
    return from_ket(space, ket);
  }

  static DensityMatrix maximally_mixed(const HilbertSpace& space) {
    const auto d = static_cast<Eigen::Index>(space.total_dim());
    return DensityMatrix(space, Matrix::Identity(d, d) / static_cast<double>(d));
  }

  const HilbertSpace& space() const { return space_; }
  const Matrix& matrix() const { return entries_; }
  std::size_t dim() const { return space_.total_dim(); }

  Complex operator()(std::size_t r, std::size_t c) const {
    return entries_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  Complex trace() const { return entries_.trace(); }

  double purity() const {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return entries_.cwiseAbs2().sum();
  }

  double hermiticity_error() const {
    return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  }

  DensityMatrix conjugated_by(const Operator& u) const {
    require_same_space(space_, u.space(), "conjugated_by");
    return DensityMatrix(space_, u.matrix() * entries_ * u.matrix().adjoint());
  }

 private:
  HilbertSpace space_;
  Matrix entries_;
};

/// Tr(op * rho).
inline Complex expectation(const DensityMatrix& rho, const Operator& op) {
  require_same_space(rho.space(), op.space(), "expectation");
  // Tr(AB) = sum_ij A_ij B_ji
  return op.matrix().cwiseProduct(rho.matrix().transpose()).sum();
}

/// Smallest eigenvalue of the Hermitian part.
inline double eigen_floor(const DensityMatrix& rho) {
  const Matrix h = 0.5 * (rho.matrix() + rho.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  require_same_space(a.space(), b.space(), "trace_distance");
  const Matrix diff = a.matrix() - b.matrix();
  const Matrix h = 0.5 * (diff + diff.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline void validate(const DensityMatrix& rho, const StateTolerance& tol = {}) {
  const double herm = rho.hermiticity_error();
  if (herm > tol.hermiticity) {
    throw InvariantViolation("density matrix not Hermitian (max |rho - rho^dag| = " +
                             std::to_string(herm) + ")");
  }
  const double tr_err = std::abs(rho.trace() - 1.0);
  if (tr_err > tol.trace) {
    throw InvariantViolation("density matrix trace off by " + std::to_string(tr_err));
  }
  const double floor = eigen_floor(rho);
  if (floor < tol.eigen_floor) {
    throw InvariantViolation("density matrix has eigenvalue " + std::to_string(floor));
  }
}

/// Traces out every subsystem whose label is not in `keep`. Kept subsystems
/// retain their original order.
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep) {
  const HilbertSpace& space = rho.space();
  const auto& subs = space.subsystems();
  std::vector<bool> kept(subs.size(), false);
  std::vector<Subsystem> kept_subs;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), subs[i].label) != keep.end()) {
      kept[i] = true;
      kept_subs.push_back(subs[i]);
    }
  }
  if (kept_subs.size() != keep.size()) {
    throw DimensionError("partial_trace: unknown or repeated subsystem label");
  }
  HilbertSpace reduced(std::move(kept_subs));
  const std::size_t d = space.total_dim();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(reduced.total_dim()),
                            static_cast<Eigen::Index>(reduced.total_dim()));

  // Row/column of the reduced matrix and the "environment" index of each flat index.
  std::vector<std::size_t> red_index(d);
  std::vector<std::size_t> env_index(d);
  for (std::size_t f = 0; f < d; ++f) {
    const auto local = space.local_indices(f);
    std::size_t r = 0;
    std::size_t e = 0;
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (kept[i]) {
        r = r * subs[i].dim + local[i];
      } else {
        e = e * subs[i].dim + local[i];
      }
    }
    red_index[f] = r;
    env_index[f] = e;
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      if (env_index[a] != env_index[b]) continue;
      out(static_cast<Eigen::Index>(red_index[a]), static_cast<Eigen::Index>(red_index[b])) +=
          rho(a, b);
    }
  }
  return DensityMatrix(std::move(reduced), std::move(out));
}

}  // namespace ancilla
