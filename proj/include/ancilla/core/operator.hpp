#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <string_view>

#include "ancilla/core/hilbert_space.hpp"

namespace ancilla {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Dense complex matrix tied to the space it acts on.
class Operator {
 public:
  Operator() = default;

  Operator(HilbertSpace space, Matrix entries)
      : space_(std::move(space)), entries_(std::move(entries)) {
    const auto d = static_cast<Eigen::Index>(space_.total_dim());
    if (entries_.rows() != d || entries_.cols() != d) {
      throw DimensionError("Operator: matrix is " + std::to_string(entries_.rows()) +
                           "x" + std::to_string(entries_.cols()) +
                           " but the space has dimension " + std::to_string(d));
    }
  }

  static Operator zero(const HilbertSpace& space) {
    const auto d = static_cast<Eigen::Index>(space.total_dim());
    return Operator(space, Matrix::Zero(d, d));
  }

  static Operator identity(const HilbertSpace& space) {
    const auto d = static_cast<Eigen::Index>(space.total_dim());
    return Operator(space, Matrix::Identity(d, d));
  }

  /// |row><col| on flat indices.
  static Operator ket_bra(const HilbertSpace& space, std::size_t row, std::size_t col) {
    Operator op = zero(space);
    op.entries_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = 1.0;
    return op;
  }

  const HilbertSpace& space() const { return space_; }
  const Matrix& matrix() const { return entries_; }
  std::size_t dim() const { return space_.total_dim(); }

  Complex operator()(std::size_t r, std::size_t c) const {
    return entries_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  Operator dagger() const { return Operator(space_, entries_.adjoint()); }

  double max_abs() const {
    return entries_.size() == 0 ? 0.0 : entries_.cwiseAbs().maxCoeff();
  }

  bool is_hermitian(double tol) const {
    return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff() <= tol;
  }

  bool is_unitary(double tol) const {
    const auto d = entries_.rows();
    return (entries_.adjoint() * entries_ - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <= tol;
  }

  Operator& operator+=(const Operator& o) {
    require_same_space(space_, o.space_, "operator +=");
    entries_ += o.entries_;
    return *this;
  }
  Operator& operator-=(const Operator& o) {
    require_same_space(space_, o.space_, "operator -=");
    entries_ -= o.entries_;
    return *this;
  }
  Operator& operator*=(Complex s) {
    entries_ *= s;
    return *this;
  }

  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator*(Complex s, Operator a) { return a *= s; }
  friend Operator operator*(Operator a, Complex s) { return a *= s; }
  friend Operator operator*(const Operator& a, const Operator& b) {
    require_same_space(a.space_, b.space_, "operator *");
    return Operator(a.space_, a.entries_ * b.entries_);
  }

 private:
  HilbertSpace space_;
  Matrix entries_;
};

/// Kronecker product; the result lives on a.space() ⊗ b.space().
inline Operator tensor(const Operator& a, const Operator& b) {
  const Matrix& x = a.matrix();
  const Matrix& y = b.matrix();
  Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    }
  }
  return Operator(a.space().tensor(b.space()), std::move(out));
}

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

/// Lifts an operator on one subsystem into `space`, identity on the rest.
inline Operator embed(const Matrix& local, const HilbertSpace& space, std::string_view label) {
  const std::size_t pos = space.position(label);
  const auto& subs = space.subsystems();
  if (static_cast<std::size_t>(local.rows()) != subs[pos].dim || local.rows() != local.cols()) {
    throw DimensionError("embed: local operator does not match subsystem '" +
                         std::string(label) + "'");
  }
  std::size_t left = 1;
  std::size_t right = 1;
  for (std::size_t i = 0; i < pos; ++i) left *= subs[i].dim;
  for (std::size_t i = pos + 1; i < subs.size(); ++i) right *= subs[i].dim;

  const auto d = static_cast<Eigen::Index>(space.total_dim());
  const auto n = local.rows();
  const auto r = static_cast<Eigen::Index>(right);
  Matrix out = Matrix::Zero(d, d);
  for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(left); ++l) {
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        if (local(a, b) == Complex{}) continue;
        for (Eigen::Index k = 0; k < r; ++k) {
          out((l * n + a) * r + k, (l * n + b) * r + k) = local(a, b);
        }
      }
    }
  }
  return Operator(space, std::move(out));
}

/// |i><j| on a single subsystem of dimension n.
inline Matrix local_ket_bra(std::size_t n, std::size_t i, std::size_t j) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
  return m;
}

}  // namespace ancilla
