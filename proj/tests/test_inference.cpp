#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>

#include "ancilla/inference/analytic.hpp"
#include "ancilla/inference/bayes_filter.hpp"
#include "ancilla/inference/error_rates.hpp"
#include "ancilla/inference/lindblad.hpp"
#include "ancilla/models/builders.hpp"
#include "ancilla/trajectory/sampler.hpp"
#include "test_support.hpp"

using namespace ancilla;
using ancilla::testing::max_abs;

namespace {

// Hand-rolled 2x2 complex arithmetic for the brute-force filter oracle.
using M2 = std::array<std::array<Complex, 2>, 2>;

M2 mul(const M2& a, const M2& b) {
  M2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

M2 adj(const M2& a) {
  M2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = std::conj(a[j][i]);
  return c;
}

M2 add(const M2& a, const M2& b, Complex s = 1.0) {
  M2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][j] + s * b[i][j];
  return c;
}

double tr(const M2& a) { return (a[0][0] + a[1][1]).real(); }

M2 scale(const M2& a, double s) { return add(M2{}, a, s); }

/// exp(X) by a 30-term Taylor series (X is small).
M2 expm(const M2& x) {
  M2 out{{{1.0, 0.0}, {0.0, 1.0}}};
  M2 term = out;
  for (int n = 1; n <= 30; ++n) {
    term = scale(mul(term, x), 1.0 / n);
    out = add(out, term);
  }
  return out;
}

struct Toy {
  ModelSpec model;
  M2 h{};
  M2 c{};
};

// Two-level emitter |g>=0, |x>=1 with drive and decay, one detector.
Toy toy_model() {
  Toy t;
  const HilbertSpace s = HilbertSpace::single("x", 2);
  t.h = {{{0.3, 0.0}, {0.0, -0.3}}};
  t.h[0][1] = t.h[1][0] = 1.1;
  t.c[0][1] = std::sqrt(2.0);
  Matrix h(2, 2), c(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      h(i, j) = t.h[i][j];
      c(i, j) = t.c[i][j];
    }
  t.model.space = s;
  t.model.terms.push_back({"h", Operator(s, h), 1.0});
  t.model.monitored.push_back({Operator(s, c), 0, 0.9});
  return t;
}

std::vector<Hypothesis> toy_hypotheses() {
  const HilbertSpace s = HilbertSpace::single("x", 2);
  Matrix mixed(2, 2);
  mixed << 0.7, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.3;
  return {{"g", DensityMatrix::basis_state(s, 0), 0.2},
          {"x", DensityMatrix::basis_state(s, 1), 0.5},
          {"m", DensityMatrix(s, mixed), 0.3}};
}

}  // namespace

// Ten steps filtered by hand: exact Kraus step G rho G^dag + (1 - eta) dt C rho C^dag.
TEST(BayesFilter, MatchesBruteForceProduct) {
  const Toy toy = toy_model();
  const auto hs = toy_hypotheses();
  const double dt = 0.02;
  const double eta = 0.9;
  DetectionRecord rec(dt, 10, {0});
  rec.add_click(2, 0);
  rec.add_click(7, 0);

  const M2 cdc = mul(adj(toy.c), toy.c);
  const M2 h_eff = add(toy.h, cdc, Complex(0.0, -0.5));
  M2 minus_i_dt_heff{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) minus_i_dt_heff[i][j] = Complex(0.0, -dt) * h_eff[i][j];
  const M2 prop = expm(minus_i_dt_heff);

  std::vector<double> log_w;
  for (const auto& hyp : hs) {
    M2 rho{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) rho[i][j] = hyp.rho0(i, j);
    double log_l = 0.0;
    for (std::size_t s = 0; s < 10; ++s) {
      const M2 jumped = mul(mul(toy.c, rho), adj(toy.c));
      const double dp = eta * dt * tr(jumped);
      if (rec.event_at(s) == 0) {
        log_l += std::log(dp);
        rho = scale(jumped, 1.0 / tr(jumped));
      } else {
        log_l += std::log(1.0 - dp);
        M2 next = add(mul(mul(prop, rho), adj(prop)), jumped, (1.0 - eta) * dt);
        rho = scale(next, 1.0 / tr(next));
      }
    }
    log_w.push_back(std::log(hyp.prior) + log_l);
  }
  double z = 0.0;
  for (double w : log_w) z += std::exp(w);

  FilterOptions fo;
  fo.stride = 1;
  const auto trace = bayesian_filter(rec, toy.model, hs, fo);
  ASSERT_EQ(trace.probabilities.size(), 11u);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    EXPECT_NEAR(trace.probabilities.back()[i], std::exp(log_w[i]) / z, 1e-12) << hs[i].label;
    EXPECT_NEAR(trace.log_likelihoods.back()[i], log_w[i] - std::log(hs[i].prior), 1e-12);
  }
  // Posterior at t = 0 is the prior.
  for (std::size_t i = 0; i < hs.size(); ++i) EXPECT_NEAR(trace.probabilities.front()[i], hs[i].prior, 1e-15);
}

TEST(BayesFilter, ClicksIdentifyBrightQubitWhenBlockaded) {
  DirectDriveParams p;
  p.mu = 100.0;
  const auto m = build_direct_drive_model(p);
  const auto hs = readout_hypotheses(m.space);
  Rng rng = make_stream(1, 0);
  const auto res = sample_trajectory(m, hs[1].rho0, 5.0, 1e-3, rng);
  ASSERT_GE(res.record.total_clicks(), 1u);
  const auto trace = bayesian_filter(res.record, m, hs);
  // The blockaded hypothesis keeps a residual click rate of order (omega / 2 mu)^2.
  EXPECT_LT(trace.probabilities.back()[0], 1e-2);
  EXPECT_GT(trace.probabilities.back()[1], 0.99);
  EXPECT_EQ(classify_label(trace, hs), "h1");
}

TEST(BayesFilter, IdenticalHypothesesKeepPriors) {
  const auto m = build_direct_drive_model({});
  const auto rho = DensityMatrix::basis_state(m.space, m.space.flat_index({level::q1, level::down}));
  const std::vector<Hypothesis> hs{{"a", rho, 0.3}, {"b", rho, 0.7}};
  DetectionRecord empty(1e-3, 3000, m.detector_ids());
  FilterOptions fo;
  fo.stride = 500;
  const auto trace = bayesian_filter(empty, m, hs, fo);
  for (const auto& p : trace.probabilities) {
    EXPECT_NEAR(p[0], 0.3, 1e-12);
    EXPECT_NEAR(p[1], 0.7, 1e-12);
  }
}

TEST(BayesFilter, ImpossibleClickKillsHypothesis) {
  DirectDriveParams p;
  p.omega_rd = 0.0;
  const auto m = build_direct_drive_model(p);
  const auto hs = readout_hypotheses(m.space);
  DetectionRecord rec(1e-3, 100, m.detector_ids());
  rec.add_click(50, 0);
  const auto trace = bayesian_filter(rec, m, hs);
  // Neither hypothesis can click without a drive: both dead, no NaN.
  for (double x : trace.probabilities.back()) {
    EXPECT_FALSE(std::isnan(x));
    EXPECT_EQ(x, 0.0);
  }
  EXPECT_EQ(trace.log_likelihoods.back()[0], -std::numeric_limits<double>::infinity());
}

TEST(BayesFilter, RejectsBadHypotheses) {
  const auto m = build_direct_drive_model({});
  auto hs = readout_hypotheses(m.space);
  hs[0].prior = 0.7;
  DetectionRecord rec(1e-3, 10, m.detector_ids());
  EXPECT_THROW(bayesian_filter(rec, m, hs), std::invalid_argument);
}

TEST(Classify, ArgmaxAndTies) {
  PosteriorTrace t;
  t.probabilities = {{0.9, 0.1}};
  EXPECT_EQ(classify(t), std::optional<std::size_t>(0));
  t.probabilities = {{0.5, 0.5}};
  EXPECT_EQ(classify(t), std::nullopt);
  t.probabilities = {{0.2, 0.8}};
  EXPECT_EQ(classify(t), std::optional<std::size_t>(1));
}

TEST(Posterior, LogDomainNormalization) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::array<double, 3> w{-1e4, -1e4 + std::log(3.0), -inf};
  const auto p = posterior_from_log(w);
  EXPECT_NEAR(p[0], 0.25, 1e-12);
  EXPECT_NEAR(p[1], 0.75, 1e-12);
  EXPECT_EQ(p[2], 0.0);
}

TEST(QeEstimate, IdenticalHypothesesGiveOneHalf) {
  const auto m = build_direct_drive_model({});
  const auto rho = DensityMatrix::basis_state(m.space, m.space.flat_index({level::q1, level::down}));
  const std::vector<Hypothesis> hs{{"a", rho, 0.5}, {"b", rho, 0.5}};
  QeOptions o;
  o.T = 2.0;
  o.n_traj = 100;
  o.output_interval = 0.5;
  const auto est = estimate_qe(m, hs, o);
  ASSERT_EQ(est.curve.times.size(), 5u);
  for (double q : est.curve.qe_bayes) EXPECT_DOUBLE_EQ(q, 0.5);
  // Independent samples of one distribution overlap almost completely.
  EXPECT_GT(est.curve.qe_counts.back(), 0.35);
  EXPECT_LE(est.curve.qe_counts.back(), 0.5);
  EXPECT_DOUBLE_EQ(est.curve.qe_counts.front(), 0.5);
}

TEST(IntegratedCountError, HandComputedHistograms) {
  const std::vector<std::vector<std::uint32_t>> counts{{0, 0, 1, 1}, {1, 1, 2, 2}};
  const std::array<double, 2> equal{0.5, 0.5};
  EXPECT_DOUBLE_EQ(integrated_count_error(counts, equal), 0.25);
  // Unequal priors: 1 - sum_n max_j P(h_j) P(n | h_j) = 1 - (0.4 + 0.3 + 0.2) = 0.1.
  const std::array<double, 2> skewed{0.8, 0.2};
  EXPECT_NEAR(integrated_count_error(counts, skewed), 0.1, 1e-15);
  const std::vector<std::vector<std::uint32_t>> disjoint{{0, 0}, {5, 6}};
  EXPECT_EQ(integrated_count_error(disjoint, equal), 0.0);
}

TEST(Analytic, Limits) {
  for (double omega : {0.2, 0.5, 2.0}) {
    EXPECT_NEAR(qe_analytic_large_mu(0.0, omega, 1.0, 0.5), 0.5, 1e-15);
    EXPECT_NEAR(qe_analytic_large_mu(0.0, omega, 1.0, 0.3), 0.3, 1e-15);
    EXPECT_LT(qe_analytic_large_mu(1000.0, omega, 1.0, 0.5), 1e-6);
  }
  EXPECT_THROW(no_click_probability(-1.0, 2.0, 1.0), std::invalid_argument);
  // Continuous through omega = gamma / 2.
  const double at = no_click_probability(3.0, 0.5, 1.0);
  EXPECT_NEAR(no_click_probability(3.0, 0.5 + 1e-7, 1.0), at, 1e-6);
  EXPECT_NEAR(no_click_probability(3.0, 0.5 - 1e-7, 1.0), at, 1e-6);
  EXPECT_NEAR(resonance_fluorescence_rate(2.0, 1.0), 4.0 / 9.0, 1e-15);
}

// Survival probability from RK4 integration of the no-jump equation
// d rho / dt = -i (H_eff rho - rho H_eff^dag) for a driven two-level emitter.
TEST(Analytic, MatchesNoJumpIntegration) {
  for (double omega : {2.0, 0.5, 0.3}) {
    const double gamma = 1.0;
    Matrix h_eff(2, 2);
    h_eff << 0.0, 0.5 * omega, 0.5 * omega, Complex(0.0, -0.5 * gamma);  // basis |down>, |up>
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    const Complex i(0.0, 1.0);
    auto rhs = [&](const Matrix& r) -> Matrix { return -i * (h_eff * r - r * h_eff.adjoint()); };
    const double dt = 1e-4;
    const double t_end = 2.0;
    for (int s = 0; s < static_cast<int>(std::lround(t_end / dt)); ++s) {
      const Matrix k1 = rhs(rho);
      const Matrix k2 = rhs(rho + 0.5 * dt * k1);
      const Matrix k3 = rhs(rho + 0.5 * dt * k2);
      const Matrix k4 = rhs(rho + dt * k3);
      rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    EXPECT_NEAR(qe_analytic_large_mu(t_end, omega, gamma, 0.5), 0.5 * rho.trace().real(), 1e-6)
        << "omega=" << omega;
  }
}

TEST(Lindblad, ClosedSystemAndTrace) {
  DirectDriveParams p;
  const auto m = build_direct_drive_model(p);
  const auto rho0 = DensityMatrix::basis_state(m.space, m.space.flat_index({level::q1, level::down}));
  const auto sol = lindblad_oracle(m, rho0, 30.0, 1e-3, 1000);
  for (const auto& r : sol.states) {
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-8);
    EXPECT_NO_THROW(validate(r));
  }

  ModelSpec closed;
  closed.space = HilbertSpace::single("x", 2);
  Matrix sx(2, 2);
  sx << 0.0, 1.0, 1.0, 0.0;
  closed.terms.push_back({"x", Operator(closed.space, sx), 1.0});
  const auto start = DensityMatrix::basis_state(closed.space, 0);
  const auto u = lindblad_oracle(closed, start, 0.7, 1e-3);
  // exp(-i sx t)|0> has |<1|psi>|^2 = sin^2 t.
  EXPECT_NEAR(u.states.back()(1, 1).real(), std::pow(std::sin(0.7), 2), 1e-10);
}

TEST(Lindblad, SteadyStateExcitation) {
  // Readout ion alone: unique steady state with excitation Omega^2 / (gamma^2 + 2 Omega^2).
  for (double omega : {0.5, 2.0}) {
    ModelSpec m;
    m.space = HilbertSpace::single("readout", 2);
    m.terms.push_back({"drive", Operator(m.space, 0.5 * (local_ket_bra(2, 0, 1) + local_ket_bra(2, 1, 0))), omega});
    m.monitored.push_back({Operator(m.space, local_ket_bra(2, 0, 1)), 0, 1.0});
    const auto ss = lindblad_steady_state(m);
    EXPECT_NEAR(ss(1, 1).real(), omega * omega / (1.0 + 2.0 * omega * omega), 1e-12);
    EXPECT_NEAR(ss(1, 1).real(), resonance_fluorescence_rate(omega, 1.0), 1e-12);
  }
}
