#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ancilla {

/// Raised when operands live on incompatible spaces or have the wrong shape.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Subsystem {
  std::string label;
  std::size_t dim = 0;

  friend bool operator==(const Subsystem&, const Subsystem&) = default;
};

/// Ordered tensor product of labelled subsystems. The flat index is row-major
/// over the subsystem order, so the last subsystem varies fastest.
class HilbertSpace {
 public:
  HilbertSpace() = default;

  explicit HilbertSpace(std::vector<Subsystem> subsystems)
      : subsystems_(std::move(subsystems)) {
    if (subsystems_.empty()) {
      throw DimensionError("HilbertSpace needs at least one subsystem");
    }
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      if (subsystems_[i].dim == 0) {
        throw DimensionError("subsystem '" + subsystems_[i].label +
                             "' has zero dimension");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (subsystems_[j].label == subsystems_[i].label) {
          throw DimensionError("duplicate subsystem label '" +
                               subsystems_[i].label + "'");
        }
      }
    }
    total_dim_ = std::accumulate(
        subsystems_.begin(), subsystems_.end(), std::size_t{1},
        [](std::size_t acc, const Subsystem& s) { return acc * s.dim; });
  }

  static HilbertSpace single(std::string label, std::size_t dim) {
    return HilbertSpace({Subsystem{std::move(label), dim}});
  }

  std::size_t total_dim() const { return total_dim_; }
  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  std::size_t size() const { return subsystems_.size(); }

  std::size_t position(std::string_view label) const {
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      if (subsystems_[i].label == label) return i;
    }
    throw DimensionError("no subsystem labelled '" + std::string(label) + "'");
  }

  bool contains(std::string_view label) const {
    for (const auto& s : subsystems_) {
      if (s.label == label) return true;
    }
    return false;
  }

  /// Concatenation. Colliding labels on the right operand get a numeric
  /// suffix ("q" -> "q_1") so the product is always well formed.
  HilbertSpace tensor(const HilbertSpace& other) const {
    std::vector<Subsystem> merged = subsystems_;
    for (Subsystem s : other.subsystems_) {
      auto taken = [&](const std::string& l) {
        for (const auto& m : merged) {
          if (m.label == l) return true;
        }
        return false;
      };
      if (taken(s.label)) {
        std::size_t k = 1;
        while (taken(s.label + "_" + std::to_string(k))) ++k;
        s.label += "_" + std::to_string(k);
      }
      merged.push_back(std::move(s));
    }
    return HilbertSpace(std::move(merged));
  }

  std::size_t flat_index(std::span<const std::size_t> local) const {
    if (local.size() != subsystems_.size()) {
      throw DimensionError("flat_index: wrong number of local indices");
    }
    std::size_t flat = 0;
    for (std::size_t i = 0; i < local.size(); ++i) {
      if (local[i] >= subsystems_[i].dim) {
        throw DimensionError("flat_index: local index out of range");
      }
      flat = flat * subsystems_[i].dim + local[i];
    }
    return flat;
  }

  std::size_t flat_index(std::initializer_list<std::size_t> local) const {
    return flat_index(std::span<const std::size_t>(local.begin(), local.size()));
  }

  std::vector<std::size_t> local_indices(std::size_t flat) const {
    std::vector<std::size_t> local(subsystems_.size());
    for (std::size_t i = subsystems_.size(); i-- > 0;) {
      local[i] = flat % subsystems_[i].dim;
      flat /= subsystems_[i].dim;
    }
    return local;
  }

  friend bool operator==(const HilbertSpace& a, const HilbertSpace& b) {
    return a.subsystems_ == b.subsystems_;
  }

 private:
  std::vector<Subsystem> subsystems_;
  std::size_t total_dim_ = 0;
};

inline void require_same_space(const HilbertSpace& a, const HilbertSpace& b,
                               std::string_view what) {
  if (!(a == b)) {
    throw DimensionError(std::string(what) + ": operands live on different spaces");
  }
}

}  // namespace ancilla
