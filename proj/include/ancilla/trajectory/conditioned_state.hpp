#pragma once

#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ancilla/core/density_matrix.hpp"
#include "ancilla/models/model_spec.hpp"
#include "ancilla/trajectory/record.hpp"

namespace ancilla {

/// Raised when dt is too coarse for the jump rates of the model.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Integrator {
  /// G = 1 - i H_eff dt, applied as G rho G^dag (first order, keeps rho >= 0)
  euler,
  /// G = exp(-i H_eff dt); sandwich terms stay first order
  exact,
};

#ifdef NDEBUG
inline constexpr bool kCheckEveryStepDefault = false;
#else
inline constexpr bool kCheckEveryStepDefault = true;
#endif

struct PropagationOptions {
  double dt = 1e-3;
  Integrator integrator = Integrator::exact;
  /// Validate Hermiticity, trace and positivity after every update.
  bool check_every_step = kCheckEveryStepDefault;
  /// Upper bound on the summed per-step click probability.
  double max_jump_probability = 0.1;
};

using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Per-model data shared read-only by every conditioned state of a run.
class CompiledModel {
 public:
  explicit CompiledModel(ModelSpec model) : spec_(std::move(model)) {
    spec_.validate();
    const auto d = static_cast<Eigen::Index>(spec_.space.total_dim());
    decay_ = Matrix::Zero(d, d);
    jump_pattern_ = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(d, d, false);
    auto mark = [&](const Matrix& m) {
      jump_pattern_ = jump_pattern_.array() || (m.array() != Complex{});
    };
    for (const auto& j : spec_.monitored) {
      const Matrix gram = j.op.matrix().adjoint() * j.op.matrix();
      grams_.push_back(gram);
      decay_ += gram;
      mark(j.op.matrix());
      mark(gram);
    }
    for (const auto& c : spec_.unmonitored) {
      const Matrix gram = c.matrix().adjoint() * c.matrix();
      decay_ += gram;
      mark(c.matrix());
      mark(gram);
    }
  }

  const ModelSpec& spec() const { return spec_; }
  /// Sum of C^dag C over every jump operator, monitored or not.
  const Matrix& decay() const { return decay_; }
  const Matrix& gram(std::size_t k) const { return grams_[k]; }
  const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& jump_pattern() const {
    return jump_pattern_;
  }

 private:
  ModelSpec spec_;
  Matrix decay_;
  std::vector<Matrix> grams_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> jump_pattern_;
};

/// Detection-conditioned state of one run under one model.
///
/// The state is held on the smallest set of basis states that contains its
/// support and is closed under the current Hamiltonian and all jump
/// operators; that set is recomputed whenever a pulse or drive change
/// alters the generator. While no unobserved channel acts on that set and
/// the state is pure, a ket is propagated instead of a density matrix. Both
/// representations apply the same Kraus maps, so the choice only affects
/// cost.
class ConditionedState {
 public:
  ConditionedState(std::shared_ptr<const CompiledModel> model, const DensityMatrix& rho0,
                   PropagationOptions opts = {})
      : model_(std::move(model)), opts_(opts) {
    require_same_space(model_->spec().space, rho0.space(), "ConditionedState");
    if (!(opts_.dt > 0.0)) throw std::invalid_argument("ConditionedState: dt must be positive");
    validate(rho0);
    amplitudes_ = model_->spec().initial_amplitudes();
    probs_.resize(model_->spec().monitored.size());

    Eigen::SelfAdjointEigenSolver<Matrix> es(rho0.matrix());
    const Eigen::Index top = es.eigenvalues().size() - 1;
    if (es.eigenvalues()(top) > 1.0 - 1e-12) {
      rebuild_from_ket(es.eigenvectors().col(top));
    } else {
      rebuild_from_matrix(rho0.matrix());
    }
  }

  ConditionedState(const ModelSpec& model, const DensityMatrix& rho0, PropagationOptions opts = {})
      : ConditionedState(std::make_shared<const CompiledModel>(model), rho0, opts) {}

  const CompiledModel& model() const { return *model_; }
  const PropagationOptions& options() const { return opts_; }
  bool is_pure() const { return pure_; }
  const std::vector<Eigen::Index>& support() const { return support_; }
  std::span<const double> amplitudes() const { return amplitudes_; }

  /// eta_k Tr[C_k rho C_k^dag] dt for every monitored jump.
  std::span<const double> jump_probabilities() {
    if (!probs_valid_) {
      total_prob_ = 0.0;
      for (std::size_t k = 0; k < probs_.size(); ++k) {
        double p = 0.0;
        if (efficiency_[k] > 0.0) {
          if (pure_) {
            scratch_vec_.noalias() = grams_[k] * psi_;
            p = psi_.dot(scratch_vec_).real();
          } else {
            p = trace_product(grams_[k], rho_);
          }
          p = std::max(p, 0.0) * efficiency_[k] * opts_.dt;
        }
        probs_[k] = p;
        total_prob_ += p;
      }
      if (total_prob_ >= opts_.max_jump_probability) {
        throw StepSizeError("click probability per step " + std::to_string(total_prob_) +
                            " exceeds " + std::to_string(opts_.max_jump_probability) +
                            "; reduce dt");
      }
      probs_valid_ = true;
    }
    return probs_;
  }

  double total_jump_probability() {
    jump_probabilities();
    return total_prob_;
  }

  /// State update after a click of monitored jump k.
  void jump(std::size_t k) {
    if (pure_) {
      scratch_vec_.noalias() = jumps_[k] * psi_;
      const double n2 = scratch_vec_.squaredNorm();
      if (!(n2 > 0.0)) throw InvariantViolation("click recorded where its probability is zero");
      psi_ = scratch_vec_ / std::sqrt(n2);
    } else {
      scratch_.noalias() = jumps_[k] * rho_;
      next_.noalias() = scratch_ * jumps_adj_[k];
      const double tr = next_.trace().real();
      if (!(tr > 0.0)) throw InvariantViolation("click recorded where its probability is zero");
      rho_ = (0.5 / tr) * (next_ + next_.adjoint());
    }
    after_update();
  }

  /// State update over one step without a click.
  void no_jump() {
    if (pure_) {
      scratch_vec_.noalias() = propagator_ * psi_;
      psi_ = scratch_vec_ / scratch_vec_.norm();
    } else {
      scratch_.noalias() = propagator_ * rho_;
      next_.noalias() = scratch_ * propagator_adj_;
      for (const auto& s : sandwiches_) {
        scratch_.noalias() = s.op * rho_;
        next_.noalias() += (s.weight * opts_.dt) * (scratch_ * s.op_adj);
      }
      const double tr = next_.trace().real();
      rho_ = (0.5 / tr) * (next_ + next_.adjoint());
    }
    after_update();
  }

  void apply_unitary(const Operator& u) {
    require_same_space(model_->spec().space, u.space(), "apply_unitary");
    if (pure_) {
      rebuild_from_ket(u.matrix() * full_ket());
    } else {
      rebuild_from_matrix(u.matrix() * full_matrix() * u.matrix().adjoint());
    }
  }

  void set_amplitude(std::size_t term, double value) {
    amplitudes_.at(term) = value;
    if (pure_) {
      rebuild_from_ket(full_ket());
    } else {
      rebuild_from_matrix(full_matrix());
    }
  }

  void apply(const PulseEvent& ev) {
    if (const auto* u = std::get_if<InstantUnitary>(&ev.action)) {
      apply_unitary(u->unitary);
    } else {
      const auto& s = std::get<SetAmplitude>(ev.action);
      set_amplitude(model_->spec().term_index(s.term), s.value);
    }
  }

  DensityMatrix density_matrix() const {
    return DensityMatrix(model_->spec().space, full_matrix());
  }

  /// Re Tr(op rho).
  double expectation(const Operator& op) const {
    const auto r = static_cast<Eigen::Index>(support_.size());
    Matrix sub(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) sub(i, j) = op.matrix()(support_[i], support_[j]);
    }
    if (pure_) return psi_.dot(sub * psi_).real();
    return sub.cwiseProduct(rho_.transpose()).sum().real();
  }

  /// Validates the state invariants; throws InvariantViolation.
  void check() const {
    if (pure_) {
      if (std::abs(psi_.squaredNorm() - 1.0) > 1e-9) {
        throw InvariantViolation("conditioned ket lost normalization");
      }
      return;
    }
    validate(DensityMatrix(HilbertSpace::single("support", support_.size()), rho_));
  }

 private:
  struct Sandwich {
    SparseMatrix op;
    SparseMatrix op_adj;
    double weight = 1.0;
  };

  static double trace_product(const SparseMatrix& a, const Matrix& rho) {
    // Re Tr(A rho) = Re sum_ij A_ij rho_ji
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
        acc += (it.value() * rho(it.col(), it.row())).real();
      }
    }
    return acc;
  }

  void after_update() {
    probs_valid_ = false;
    if (opts_.check_every_step) check();
  }

  Vector full_ket() const {
    Vector full = Vector::Zero(static_cast<Eigen::Index>(model_->spec().space.total_dim()));
    for (std::size_t i = 0; i < support_.size(); ++i) full(support_[i]) = psi_(static_cast<Eigen::Index>(i));
    return full;
  }

  Matrix full_matrix() const {
    const auto d = static_cast<Eigen::Index>(model_->spec().space.total_dim());
    Matrix full = Matrix::Zero(d, d);
    if (pure_) {
      const Vector k = full_ket();
      return k * k.adjoint();
    }
    for (std::size_t i = 0; i < support_.size(); ++i) {
      for (std::size_t j = 0; j < support_.size(); ++j) {
        full(support_[i], support_[j]) =
            rho_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    return full;
  }

  SparseMatrix restrict(const Matrix& m) const {
    const auto r = static_cast<Eigen::Index>(support_.size());
    Matrix sub(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) sub(i, j) = m(support_[i], support_[j]);
    }
    return sub.sparseView();
  }

  void rebuild_from_ket(const Vector& full) {
    std::vector<bool> seed(static_cast<std::size_t>(full.size()));
    for (Eigen::Index i = 0; i < full.size(); ++i) seed[static_cast<std::size_t>(i)] = full(i) != Complex{};
    compile(seed);
    if (sandwiches_.empty()) {
      pure_ = true;
      psi_.resize(static_cast<Eigen::Index>(support_.size()));
      for (std::size_t i = 0; i < support_.size(); ++i) psi_(static_cast<Eigen::Index>(i)) = full(support_[i]);
      psi_ /= psi_.norm();
    } else {
      rebuild_from_matrix(full * full.adjoint());
      return;
    }
    after_update();
  }

  void rebuild_from_matrix(const Matrix& full) {
    std::vector<bool> seed(static_cast<std::size_t>(full.rows()));
    for (Eigen::Index i = 0; i < full.rows(); ++i) seed[static_cast<std::size_t>(i)] = full(i, i) != Complex{};
    compile(seed);
    pure_ = false;
    const auto r = static_cast<Eigen::Index>(support_.size());
    rho_.resize(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) rho_(i, j) = full(support_[i], support_[j]);
    }
    rho_ = 0.5 * (rho_ + rho_.adjoint()).eval();
    rho_ /= rho_.trace().real();
    scratch_.resize(r, r);
    next_.resize(r, r);
    after_update();
  }

  /// Builds the closed support and every restricted operator for the
  /// current amplitudes.
  void compile(const std::vector<bool>& seed) {
    const ModelSpec& spec = model_->spec();
    const auto d = static_cast<Eigen::Index>(spec.space.total_dim());
    const Matrix h_eff = spec.hamiltonian(amplitudes_).matrix() - Complex(0.0, 0.5) * model_->decay();

    const auto& jp = model_->jump_pattern();
    std::vector<bool> in(seed);
    std::vector<Eigen::Index> queue;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (in[static_cast<std::size_t>(i)]) queue.push_back(i);
    }
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const Eigen::Index j = queue[q];
      for (Eigen::Index i = 0; i < d; ++i) {
        if (!in[static_cast<std::size_t>(i)] && (jp(i, j) || h_eff(i, j) != Complex{})) {
          in[static_cast<std::size_t>(i)] = true;
          queue.push_back(i);
        }
      }
    }
    support_.clear();
    for (Eigen::Index i = 0; i < d; ++i) {
      if (in[static_cast<std::size_t>(i)]) support_.push_back(i);
    }
    if (support_.empty()) throw InvariantViolation("conditioned state has empty support");

    const auto r = static_cast<Eigen::Index>(support_.size());
    Matrix h_sub(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) h_sub(i, j) = h_eff(support_[i], support_[j]);
    }
    Matrix g;
    if (opts_.integrator == Integrator::exact) {
      g = (Complex(0.0, -opts_.dt) * h_sub).exp();
    } else {
      g = Matrix::Identity(r, r) - Complex(0.0, opts_.dt) * h_sub;
    }
    propagator_ = g.sparseView();
    propagator_adj_ = SparseMatrix(g.adjoint().sparseView());

    jumps_.clear();
    jumps_adj_.clear();
    grams_.clear();
    efficiency_.clear();
    sandwiches_.clear();
    for (std::size_t k = 0; k < spec.monitored.size(); ++k) {
      const auto& mj = spec.monitored[k];
      SparseMatrix c = restrict(mj.op.matrix());
      SparseMatrix c_adj = c.adjoint();
      jumps_.push_back(c);
      jumps_adj_.push_back(c_adj);
      grams_.push_back(restrict(model_->gram(k)));
      efficiency_.push_back(mj.efficiency);
      if (mj.efficiency < 1.0 && c.nonZeros() > 0) {
        sandwiches_.push_back({c, c_adj, 1.0 - mj.efficiency});
      }
    }
    for (const auto& un : spec.unmonitored) {
      SparseMatrix c = restrict(un.matrix());
      if (c.nonZeros() == 0) continue;
      SparseMatrix c_adj = c.adjoint();
      sandwiches_.push_back({c, c_adj, 1.0});
    }
    scratch_vec_.resize(r);
    probs_valid_ = false;
  }

  std::shared_ptr<const CompiledModel> model_;
  PropagationOptions opts_;
  std::vector<double> amplitudes_;

  std::vector<Eigen::Index> support_;
  SparseMatrix propagator_;
  SparseMatrix propagator_adj_;
  std::vector<SparseMatrix> jumps_;
  std::vector<SparseMatrix> jumps_adj_;
  std::vector<SparseMatrix> grams_;
  std::vector<double> efficiency_;
  std::vector<Sandwich> sandwiches_;

  bool pure_ = false;
  Vector psi_;
  Matrix rho_;
  Vector scratch_vec_;
  Matrix scratch_;
  Matrix next_;

  std::vector<double> probs_;
  double total_prob_ = 0.0;
  bool probs_valid_ = false;
};

/// Applies scheduled pulses at the step nearest to their time.
class ScheduleCursor {
 public:
  ScheduleCursor(const ModelSpec& model, double dt, std::size_t n_steps) : events_(&model.schedule) {
    for (const auto& ev : model.schedule) {
      const auto idx = static_cast<std::size_t>(std::llround(ev.time / dt));
      if (ev.time < 0.0 || idx > n_steps) {
        throw ModelError("pulse at t=" + std::to_string(ev.time) + " lies outside [0, T]");
      }
      steps_.push_back(idx);
    }
  }

  /// Applies every not-yet-applied event scheduled at or before `step`.
  template <class ApplyFn>
  void apply_due(std::size_t step, ApplyFn&& apply) {
    while (next_ < steps_.size() && steps_[next_] <= step) {
      apply((*events_)[next_]);
      ++next_;
    }
  }

  void apply_due(std::size_t step, ConditionedState& state) {
    apply_due(step, [&](const PulseEvent& ev) { state.apply(ev); });
  }

 private:
  const std::vector<PulseEvent>* events_;
  std::vector<std::size_t> steps_;
  std::size_t next_ = 0;
};

/// Steps at which a run is sampled: 0, stride, 2 stride, ... and always the
/// final step. stride == 0 samples the final step only.
inline std::vector<std::size_t> sample_steps(std::size_t n_steps, std::size_t stride) {
  std::vector<std::size_t> out;
  if (stride > 0) {
    for (std::size_t s = 0; s <= n_steps; s += stride) out.push_back(s);
  }
  if (out.empty() || out.back() != n_steps) out.push_back(n_steps);
  return out;
}

}  // namespace ancilla
