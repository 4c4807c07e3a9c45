#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ancilla {

/// Raised on malformed serialized records.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Click {
  std::size_t step = 0;
  int detector = 0;

  friend bool operator==(const Click&, const Click&) = default;
};

inline constexpr int kNoClick = -1;

/// Number of integration steps covering [0, T].
inline std::size_t step_count(double T, double dt) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw std::invalid_argument("step_count: need dt > 0 and T >= 0");
  return static_cast<std::size_t>(std::llround(T / dt));
}

/// Click / no-click history of one run. Stored sparsely: only steps with a
/// click are kept, at most one click per step.
class DetectionRecord {
 public:
  DetectionRecord() = default;
  DetectionRecord(double dt, std::size_t n_steps, std::vector<int> detector_ids)
      : dt_(dt), n_steps_(n_steps), detector_ids_(std::move(detector_ids)) {
    if (!(dt_ > 0.0)) throw std::invalid_argument("DetectionRecord: dt must be positive");
  }

  double dt() const { return dt_; }
  std::size_t steps() const { return n_steps_; }
  double duration() const { return dt_ * static_cast<double>(n_steps_); }
  const std::vector<int>& detector_ids() const { return detector_ids_; }
  const std::vector<Click>& clicks() const { return clicks_; }

  void add_click(std::size_t step, int detector) {
    if (step >= n_steps_) throw std::out_of_range("DetectionRecord: click after the last step");
    if (!clicks_.empty() && clicks_.back().step >= step) {
      throw std::invalid_argument("DetectionRecord: clicks must be added in increasing step order");
    }
    if (std::find(detector_ids_.begin(), detector_ids_.end(), detector) == detector_ids_.end()) {
      throw std::invalid_argument("DetectionRecord: unknown detector " + std::to_string(detector));
    }
    clicks_.push_back({step, detector});
  }

  int event_at(std::size_t step) const {
    auto it = std::lower_bound(clicks_.begin(), clicks_.end(), step,
                               [](const Click& c, std::size_t s) { return c.step < s; });
    return (it != clicks_.end() && it->step == step) ? it->detector : kNoClick;
  }

  std::size_t total_clicks() const { return clicks_.size(); }

  std::size_t clicks_of(int detector) const {
    return static_cast<std::size_t>(std::count_if(
        clicks_.begin(), clicks_.end(), [&](const Click& c) { return c.detector == detector; }));
  }

  /// Clicks strictly before the given step.
  std::size_t clicks_before(std::size_t step) const {
    return static_cast<std::size_t>(
        std::lower_bound(clicks_.begin(), clicks_.end(), step,
                         [](const Click& c, std::size_t s) { return c.step < s; }) -
        clicks_.begin());
  }

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;

 private:
  double dt_ = 1e-3;
  std::size_t n_steps_ = 0;
  std::vector<int> detector_ids_;
  std::vector<Click> clicks_;
};

/// CSV layout:
///   # dt=<17 significant digits>
///   # detectors=<id>,<id>,...
///   step_index,detector_id
///   one row per step, detector_id = -1 when nothing clicked
inline void write_record_csv(std::ostream& os, const DetectionRecord& rec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", rec.dt());
  os << "# dt=" << buf << "\n# detectors=";
  for (std::size_t i = 0; i < rec.detector_ids().size(); ++i) {
    if (i) os << ',';
    os << rec.detector_ids()[i];
  }
  os << "\nstep_index,detector_id\n";
  auto next = rec.clicks().begin();
  for (std::size_t s = 0; s < rec.steps(); ++s) {
    int det = kNoClick;
    if (next != rec.clicks().end() && next->step == s) {
      det = next->detector;
      ++next;
    }
    os << s << ',' << det << '\n';
  }
}

inline DetectionRecord read_record_csv(std::istream& is) {
  std::string line;
  auto expect_prefix = [&](const std::string& prefix) {
    if (!std::getline(is, line) || line.rfind(prefix, 0) != 0) {
      throw FormatError("record csv: expected line starting with '" + prefix + "'");
    }
    return line.substr(prefix.size());
  };
  const std::string dt_text = expect_prefix("# dt=");
  char* end = nullptr;
  const double dt = std::strtod(dt_text.c_str(), &end);
  if (end == dt_text.c_str()) throw FormatError("record csv: bad dt");

  std::vector<int> ids;
  {
    std::stringstream ss(expect_prefix("# detectors="));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) ids.push_back(std::stoi(tok));
    }
  }
  if (!std::getline(is, line) || line != "step_index,detector_id") {
    throw FormatError("record csv: missing header");
  }
  std::vector<Click> clicks;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("record csv: malformed row '" + line + "'");
    std::size_t step = 0;
    int det = 0;
    auto r1 = std::from_chars(line.data(), line.data() + comma, step);
    auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), det);
    if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
      throw FormatError("record csv: malformed row '" + line + "'");
    }
    if (step != rows) throw FormatError("record csv: step indices must be consecutive from 0");
    ++rows;
    if (det != kNoClick) clicks.push_back({step, det});
  }
  DetectionRecord rec(dt, rows, ids);
  for (const auto& c : clicks) rec.add_click(c.step, c.detector);
  return rec;
}

}  // namespace ancilla
