#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ancilla/core/operator.hpp"

namespace ancilla {

/// Raised for unphysical model parameters.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// H = sum_k amplitude_k * shape_k. Drive changes in the schedule address
/// terms by name.
struct HamiltonianTerm {
  std::string name;
  Operator shape;
  double amplitude = 0.0;
};

struct MonitoredJump {
  Operator op;
  int detector_id = 0;
  double efficiency = 1.0;
};

struct InstantUnitary {
  Operator unitary;
  std::string label;
};

struct SetAmplitude {
  std::string term;
  double value = 0.0;
};

struct PulseEvent {
  double time = 0.0;
  std::variant<InstantUnitary, SetAmplitude> action;
};

struct ModelSpec {
  HilbertSpace space;
  std::vector<HamiltonianTerm> terms;
  std::vector<MonitoredJump> monitored;
  std::vector<Operator> unmonitored;
  std::vector<PulseEvent> schedule;

  std::size_t term_index(std::string_view name) const {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i].name == name) return i;
    }
    throw ModelError("model has no Hamiltonian term '" + std::string(name) + "'");
  }

  std::vector<double> initial_amplitudes() const {
    std::vector<double> a;
    a.reserve(terms.size());
    for (const auto& t : terms) a.push_back(t.amplitude);
    return a;
  }

  Operator hamiltonian(std::span<const double> amplitudes) const {
    Operator h = Operator::zero(space);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (amplitudes[i] != 0.0) h += amplitudes[i] * terms[i].shape;
    }
    return h;
  }

  Operator hamiltonian() const {
    const auto a = initial_amplitudes();
    return hamiltonian(a);
  }

  std::vector<int> detector_ids() const {
    std::vector<int> ids;
    for (const auto& m : monitored) ids.push_back(m.detector_id);
    return ids;
  }

  std::size_t detector_index(int id) const {
    for (std::size_t k = 0; k < monitored.size(); ++k) {
      if (monitored[k].detector_id == id) return k;
    }
    throw ModelError("model has no detector " + std::to_string(id));
  }

  /// Throws ModelError on the first broken invariant.
  void validate() const {
    for (const auto& t : terms) {
      require_same_space(space, t.shape.space(), "ModelSpec term " + t.name);
      if (!t.shape.is_hermitian(1e-12)) {
        throw ModelError("Hamiltonian term '" + t.name + "' is not Hermitian");
      }
      if (!std::isfinite(t.amplitude)) {
        throw ModelError("Hamiltonian term '" + t.name + "' has non-finite amplitude");
      }
    }
    for (std::size_t k = 0; k < monitored.size(); ++k) {
      const auto& m = monitored[k];
      require_same_space(space, m.op.space(), "ModelSpec monitored jump");
      if (!(m.efficiency >= 0.0 && m.efficiency <= 1.0)) {
        throw ModelError("detector efficiency outside [0,1]");
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (monitored[j].detector_id == m.detector_id) {
          throw ModelError("duplicate detector id " + std::to_string(m.detector_id));
        }
      }
    }
    for (const auto& c : unmonitored) require_same_space(space, c.space(), "ModelSpec unmonitored jump");
    double last = -std::numeric_limits<double>::infinity();
    for (const auto& ev : schedule) {
      if (ev.time < last) throw ModelError("pulse schedule times must be non-decreasing");
      last = ev.time;
      if (const auto* u = std::get_if<InstantUnitary>(&ev.action)) {
        require_same_space(space, u->unitary.space(), "PulseEvent unitary");
        if (!u->unitary.is_unitary(1e-10)) {
          throw ModelError("pulse '" + u->label + "' is not unitary");
        }
      } else {
        const auto& s = std::get<SetAmplitude>(ev.action);
        (void)term_index(s.term);
      }
    }
  }
};

/// Stable insertion keeping the schedule sorted by time.
inline void add_event(ModelSpec& model, PulseEvent ev) {
  auto it = std::upper_bound(model.schedule.begin(), model.schedule.end(), ev.time,
                             [](double t, const PulseEvent& e) { return t < e.time; });
  model.schedule.insert(it, std::move(ev));
}

}  // namespace ancilla
