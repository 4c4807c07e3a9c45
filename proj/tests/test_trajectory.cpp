#include <gtest/gtest.h>

#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "ancilla/inference/lindblad.hpp"
#include "ancilla/models/builders.hpp"
#include "ancilla/trajectory/ensemble.hpp"
#include "ancilla/trajectory/sampler.hpp"
#include "test_support.hpp"

using namespace ancilla;
using ancilla::testing::max_abs;

namespace {

DensityMatrix basis(const ModelSpec& m, std::size_t q, std::size_t r) {
  return DensityMatrix::basis_state(m.space, m.space.flat_index({q, r}));
}

/// Model with no pulses so that step() sees the bare generator.
ModelSpec fig2_without_pulses() {
  ModelSpec m = build_direct_drive_model({});
  m.schedule.clear();
  return m;
}

}  // namespace

TEST(Step, DarkStateDoesNotClick) {
  DirectDriveParams p;
  p.omega_rd = 0.0;
  ModelSpec m = build_direct_drive_model(p);
  m.schedule.clear();
  const auto rho = basis(m, level::q1, level::down);
  ConditionedState st(m, rho);
  EXPECT_EQ(st.total_jump_probability(), 0.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto [next, event] = step(rho, m, 1e-3, rng);
    EXPECT_EQ(event, kNoClick);
    EXPECT_LT(max_abs(next.matrix() - rho.matrix()), 1e-15);
  }
}

TEST(Step, JumpFromExcitedReadout) {
  const ModelSpec m = fig2_without_pulses();
  ConditionedState st(m, basis(m, level::q1, level::up));
  EXPECT_NEAR(st.total_jump_probability(), 1e-3, 1e-15);
  st.jump(0);
  EXPECT_LT(max_abs(st.density_matrix().matrix() - basis(m, level::q1, level::down).matrix()), 1e-15);
}

TEST(Step, ClickWithZeroProbabilityIsAnError) {
  const ModelSpec m = fig2_without_pulses();
  ConditionedState st(m, basis(m, level::q1, level::down));
  EXPECT_THROW(st.jump(0), InvariantViolation);
}

// One no-jump step against rho - i[H, rho] dt - 1/2 {C^dag C, rho} dt, renormalized.
TEST(Step, NoJumpMatchesFirstOrderExpansion) {
  const ModelSpec m = fig2_without_pulses();
  const Matrix h = m.hamiltonian().matrix();
  const Matrix c = m.monitored[0].op.matrix();
  const Matrix cdc = c.adjoint() * c;
  std::mt19937_64 gen(23);
  const Complex i(0.0, 1.0);
  for (double dt : {1e-3, 5e-4}) {
    for (int trial = 0; trial < 3; ++trial) {
      const DensityMatrix rho = trial == 0 ? basis(m, level::q1, level::down)
                                           : ancilla::testing::random_state(m.space, gen);
      Matrix oracle = rho.matrix() - i * dt * (h * rho.matrix() - rho.matrix() * h) -
                      0.5 * dt * (cdc * rho.matrix() + rho.matrix() * cdc);
      oracle /= oracle.trace().real();
      for (auto integ : {Integrator::exact, Integrator::euler}) {
        PropagationOptions po;
        po.dt = dt;
        po.integrator = integ;
        ConditionedState st(m, rho, po);
        st.no_jump();
        EXPECT_LT(max_abs(st.density_matrix().matrix() - oracle), 50.0 * dt * dt);
      }
    }
  }
}

TEST(Step, UnmonitoredAndMissedClicksEnterAsSandwiches) {
  TwoCavityParams p;
  p.detector_efficiency = 0.6;
  ModelSpec m = build_two_cavity_model(p);
  m.schedule.clear();
  std::mt19937_64 gen(29);
  const auto rho = ancilla::testing::random_state(m.space, gen);
  const double dt = 1e-3;
  const Complex i(0.0, 1.0);
  const Matrix h = m.hamiltonian().matrix();
  Matrix oracle = rho.matrix() - i * dt * (h * rho.matrix() - rho.matrix() * h);
  for (const auto& j : m.monitored) {
    const Matrix c = j.op.matrix();
    const Matrix cdc = c.adjoint() * c;
    oracle += -0.5 * dt * (cdc * rho.matrix() + rho.matrix() * cdc) +
              (1.0 - j.efficiency) * dt * c * rho.matrix() * c.adjoint();
  }
  oracle /= oracle.trace().real();
  ConditionedState st(m, rho);
  auto probs = st.jump_probabilities();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const Matrix c = m.monitored[k].op.matrix();
    EXPECT_NEAR(probs[k], 0.6 * dt * (c * rho.matrix() * c.adjoint()).trace().real(), 1e-15);
  }
  st.no_jump();
  EXPECT_LT(max_abs(st.density_matrix().matrix() - oracle), 1e-5);
}

TEST(Step, StepSizeGuard) {
  const ModelSpec m = fig2_without_pulses();
  PropagationOptions po;
  po.dt = 0.2;
  ConditionedState st(m, basis(m, level::q1, level::up), po);
  EXPECT_THROW(st.jump_probabilities(), StepSizeError);
}

TEST(SampleTrajectory, BlockadedReadoutStaysDark) {
  DirectDriveParams p;
  p.mu = 100.0;
  const auto m = build_direct_drive_model(p);
  const auto compiled = std::make_shared<const CompiledModel>(m);
  // The residual off-resonant excitation is about (omega / 2 mu)^2, so the
  // expected total over all runs is ~0.1 clicks.
  std::size_t total = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng = make_stream(3, i);
    total += sample_trajectory(compiled, basis(m, level::q0, level::down), 10.0, 1e-3, rng).record.total_clicks();
  }
  EXPECT_LE(total, 3u);
}

// Mean click number for a bright qubit: compared with gamma times the
// integrated readout excitation of the master equation, and with the
// steady-state rate T gamma Omega^2 / (gamma^2 + 2 Omega^2).
TEST(SampleTrajectory, MeanCountMatchesFluorescenceRate) {
  const auto m = build_direct_drive_model({});
  const auto rho0 = basis(m, level::q1, level::down);
  const double T = 25.0;
  const double dt = 1e-3;
  const auto sol = lindblad_oracle(m, rho0, T, dt, 10);
  const Operator n_up = embed(local_ket_bra(2, level::up, level::up), m.space, "readout");
  double integral = 0.0;  // trapezoid over samples every 10 steps
  for (std::size_t s = 1; s < sol.states.size(); ++s) {
    const double a = expectation(sol.states[s - 1], n_up).real();
    const double b = expectation(sol.states[s], n_up).real();
    integral += 0.5 * (a + b) * (sol.times[s] - sol.times[s - 1]);
  }
  const double steady = T * 4.0 / 9.0;
  EXPECT_NEAR(steady, 11.11, 0.01);
  EXPECT_NEAR(integral, steady, 0.6);  // only the turn-on transient differs

  const auto compiled = std::make_shared<const CompiledModel>(m);
  const std::size_t n = 400;
  double sum = 0.0;
  double sum2 = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng = make_stream(8, i);
    SampleOptions so;
    so.check_every_step = false;
    const double c = static_cast<double>(sample_trajectory(compiled, rho0, T, dt, rng, {}, so).record.total_clicks());
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, integral, 4.0 * se);
}

TEST(SampleTrajectory, SameSeedSameRecord) {
  TwoCavityParams p;
  p.drive_off = std::nullopt;
  const auto m = build_two_cavity_model(p);
  Vector ket = Vector::Zero(36);
  for (std::size_t a : {level::q0, level::q1})
    for (std::size_t b : {level::q0, level::q1}) ket(m.space.flat_index({a, 0, b, 0})) = 0.5;
  const auto rho0 = DensityMatrix::from_ket(m.space, ket);
  Rng r1 = make_stream(42, 7);
  Rng r2 = make_stream(42, 7);
  const auto a = sample_trajectory(m, rho0, 5.0, 1e-3, r1);
  const auto b = sample_trajectory(m, rho0, 5.0, 1e-3, r2);
  EXPECT_GT(a.record.total_clicks(), 0u);
  EXPECT_TRUE(a.record == b.record);
  EXPECT_TRUE(a.final_state.matrix() == b.final_state.matrix());
}

TEST(SampleTrajectory, ObservablesAreSampledOnTheGrid) {
  const auto m = build_direct_drive_model({});
  const Operator n_up = embed(local_ket_bra(2, level::up, level::up), m.space, "readout");
  const std::array<Operator, 1> obs{n_up};
  Rng rng(4);
  SampleOptions so;
  so.stride = 100;
  so.keep_states = true;
  const auto res = sample_trajectory(m, basis(m, level::q1, level::down), 1.0, 1e-3, rng, obs, so);
  ASSERT_EQ(res.times.size(), 11u);
  EXPECT_DOUBLE_EQ(res.times.back(), 1.0);
  ASSERT_EQ(res.observables[0].size(), 11u);
  EXPECT_EQ(res.states.size(), 11u);
  for (std::size_t s = 0; s < res.times.size(); ++s) {
    EXPECT_NEAR(res.observables[0][s], expectation(res.states[s], n_up).real(), 1e-12);
    EXPECT_NO_THROW(validate(res.states[s]));
  }
}

TEST(Record, CsvRoundTripIsExact) {
  DetectionRecord rec(1e-3, 2000, {port::plus, port::minus});
  rec.add_click(0, port::plus);
  rec.add_click(17, port::minus);
  rec.add_click(1999, port::plus);
  std::stringstream ss;
  write_record_csv(ss, rec);
  const auto back = read_record_csv(ss);
  EXPECT_TRUE(back == rec);
  EXPECT_EQ(back.event_at(17), port::minus);
  EXPECT_EQ(back.event_at(18), kNoClick);
  EXPECT_EQ(back.clicks_before(1999), 2u);
}

TEST(Record, RejectsMalformedInput) {
  std::stringstream bad("# dt=0.001\n# detectors=0\nstep_index,detector_id\n0,-1\n2,0\n");
  EXPECT_THROW(read_record_csv(bad), FormatError);
  std::stringstream no_header("0,-1\n");
  EXPECT_THROW(read_record_csv(no_header), FormatError);
  DetectionRecord rec(1e-3, 10, {0});
  rec.add_click(3, 0);
  EXPECT_THROW(rec.add_click(3, 0), std::invalid_argument);
  EXPECT_THROW(rec.add_click(4, 5), std::invalid_argument);
  EXPECT_THROW(rec.add_click(10, 0), std::out_of_range);
}

TEST(Ensemble, SingleRunEqualsTrajectory) {
  const auto m = build_direct_drive_model({});
  const auto rho0 = basis(m, level::q1, level::down);
  EnsembleOptions eo;
  eo.n_traj = 1;
  eo.seed = 9;
  eo.stride = 500;
  const auto avg = ensemble_average(m, rho0, 2.0, 1e-3, eo);
  Rng rng = make_stream(9, 0);
  SampleOptions so;
  so.stride = 500;
  so.keep_states = true;
  const auto res = sample_trajectory(m, rho0, 2.0, 1e-3, rng, {}, so);
  ASSERT_EQ(avg.states.size(), res.states.size());
  for (std::size_t s = 0; s < res.states.size(); ++s) {
    EXPECT_LT(max_abs(avg.states[s].matrix() - res.states[s].matrix()), 1e-15);
  }
}

TEST(Ensemble, ClosedSystemIsUnitary) {
  ModelSpec m;
  m.space = single_cavity_space();
  m.terms.push_back({"drive", Complex(0.5) * embed(local_ket_bra(2, 0, 1) + local_ket_bra(2, 1, 0), m.space, "readout"), 1.3});
  m.terms.push_back({"shift", embed(local_ket_bra(3, 2, 2), m.space, "qubit"), 0.7});
  std::mt19937_64 gen(31);
  const auto rho0 = ancilla::testing::random_state(m.space, gen);
  EnsembleOptions eo;
  eo.n_traj = 3;
  eo.stride = 1000;
  const double T = 3.0;
  const auto avg = ensemble_average(m, rho0, T, 1e-3, eo);
  const Matrix h = m.hamiltonian().matrix();
  for (std::size_t s = 0; s < avg.times.size(); ++s) {
    const Matrix u = (Complex(0.0, -avg.times[s]) * h).exp();
    EXPECT_LT(max_abs(avg.states[s].matrix() - u * rho0.matrix() * u.adjoint()), 1e-10);
  }
}

TEST(Ensemble, ResultDoesNotDependOnWorkers) {
  const auto m = build_direct_drive_model({});
  const auto rho0 = basis(m, level::q1, level::down);
  EnsembleOptions eo;
  eo.n_traj = 70;
  eo.workers = 1;
  const auto a = ensemble_average(m, rho0, 1.0, 1e-3, eo);
  eo.workers = 3;
  const auto b = ensemble_average(m, rho0, 1.0, 1e-3, eo);
  EXPECT_TRUE(a.states.back().matrix() == b.states.back().matrix());
}

TEST(Rng, StreamRule) {
  EXPECT_EQ(stream_seed(1, 0), splitmix64(splitmix64(1) ^ 0));
  EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
  EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
