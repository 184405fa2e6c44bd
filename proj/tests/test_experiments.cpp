#include "reqc/experiments.hpp"

#include <gtest/gtest.h>

using namespace reqc;

namespace {

SweepConfig small_grid(std::size_t n) {
  auto c = SweepConfig::nominal(2 * pi);
  c.dc_count = c.dt_count = n;
  return c;
}

}  // namespace

TEST(Fidelity, WorkedExample) {
  Matrix u0 = Matrix::Identity(4, 4);
  u0(2, 2) = u0(3, 3) = -1.0;  // Z on control
  const Vector psi = equal_superposition();
  EXPECT_NEAR(gate_fidelity(Matrix::Identity(4, 4), u0, psi), 0.0, 1e-15);
  Matrix u1 = Matrix::Identity(4, 4);
  u1(3, 3) = -1.0;  // CZ vs identity: |<psi|CZ|psi>|^2 = (1/2)^2
  EXPECT_NEAR(gate_fidelity(u1, Matrix::Identity(4, 4), psi), 0.25, 1e-15);
  EXPECT_NEAR(gate_fidelity(u1, u1, psi), 1.0, 1e-15);
}

TEST(Fidelity, GlobalPhaseInvariant) {
  Matrix u = Matrix::Identity(4, 4);
  u(3, 3) = -1.0;
  EXPECT_NEAR(gate_fidelity(Matrix(std::exp(I * 0.7) * u), u, equal_superposition()), 1.0, 1e-14);
}

TEST(Fidelity, FullSpaceAndColumnForms) {
  Matrix u = Matrix::Identity(kPairDim, kPairDim);
  const Matrix u0 = Matrix::Identity(4, 4);
  EXPECT_NEAR(gate_fidelity(u, u0, equal_superposition()), 1.0, 1e-15);
  Matrix cols = Matrix::Zero(kPairDim, 4);
  for (int k = 0; k < 4; ++k) cols(kQubitIndices[k], k) = 1.0;
  EXPECT_NEAR(gate_fidelity(cols, u0, equal_superposition()), 1.0, 1e-15);
}

// leaked population counts as infidelity, never renormalized
TEST(Fidelity, LeakageLowersFidelity) {
  Matrix cols = Matrix::Zero(kPairDim, 4);
  for (int k = 0; k < 4; ++k) cols(kQubitIndices[k], k) = 1.0;
  cols.col(0).setZero();
  cols(pair_index(Level::ground0, Level::excited), 0) = 1.0;
  EXPECT_NEAR(gate_fidelity(cols, Matrix::Identity(4, 4), equal_superposition()), 0.5625, 1e-14);
}

TEST(Fidelity, DensityMatrixForm) {
  const Vector psi = detail::embed(equal_superposition(), kPairDim);
  EXPECT_NEAR(gate_fidelity(DensityMatrix::pure(psi), Matrix::Identity(4, 4), equal_superposition()), 1.0, 1e-15);
  const DensityMatrix mixed{Matrix::Identity(kPairDim, kPairDim) / 9.0};
  EXPECT_NEAR(gate_fidelity(mixed, Matrix::Identity(4, 4), equal_superposition()), 1.0 / 9.0, 1e-15);
}

TEST(Fidelity, RejectsBadInput) {
  Vector bad = equal_superposition() * 2.0;
  EXPECT_THROW(gate_fidelity(Matrix::Identity(4, 4), Matrix::Identity(4, 4), bad), ConfigError);
  Vector ex = Vector::Zero(kPairDim);
  ex(pair_index(Level::excited, Level::ground0)) = 1.0;
  EXPECT_THROW(detail::qubit_state(ex, 4), ConfigError);
  EXPECT_THROW(gate_fidelity(Matrix::Identity(3, 3), Matrix::Identity(4, 4), equal_superposition()),
               DimensionError);
}

TEST(Fidelity, ClipToleratesRoundoffOnly) {
  EXPECT_DOUBLE_EQ(detail::clip_fidelity(1.0 + 1e-12), 1.0);
  EXPECT_DOUBLE_EQ(detail::clip_fidelity(-1e-12), 0.0);
  EXPECT_THROW(detail::clip_fidelity(1.01), std::logic_error);
}

TEST(ReferenceGate, NearestUnitaryAndInvariant) {
  Matrix cz = Matrix::Identity(4, 4);
  cz(3, 3) = -1.0;
  EXPECT_NEAR(cphase_invariant(cz), pi, 1e-14);
  EXPECT_NEAR(cphase_invariant(Matrix::Identity(4, 4)), 0.0, 1e-14);
  const Matrix m = 0.97 * cz;
  EXPECT_LT(max_abs(nearest_unitary(m) - cz), 1e-14);
  EXPECT_EQ(matrix_checksum(cz), matrix_checksum(Matrix(cz)));
  EXPECT_NE(matrix_checksum(cz), matrix_checksum(Matrix::Identity(4, 4)));
  EXPECT_EQ(matrix_checksum(cz).size(), 16u);
}

TEST(ReferenceGate, PinnedChecksum) {
  const auto c = SweepConfig::nominal(2 * pi);
  const auto prog = robust_cphase_program(c.pulse);
  const auto ref = reference_gate(prog, c.delta_c, c.delta_t, c.blockade, c.tol_state);
  EXPECT_NEAR(ref.invariant, pi, 1e-3);
  EXPECT_LT(unitarity_defect(ref.u0), 1e-12);
  EXPECT_LT(max_abs(ref.projected - ref.u0), 1e-2);
}

TEST(Sweep, NominalPointNearOne) {
  auto c = small_grid(1);
  c.dc_min = c.dc_max = 0.0;
  c.dt_min = c.dt_max = 0.0;
  const auto s = sweep_hyperfine(c);
  ASSERT_EQ(s.values.size(), 1u);
  EXPECT_GT(s.values[0], 0.999);
  EXPECT_TRUE(s.failures.empty());
}

TEST(Sweep, SmallGridShapeAndDeterminism) {
  auto c = small_grid(2);
  const auto a = sweep_hyperfine(c);
  a.validate();
  EXPECT_EQ(a.x.values.size(), 2u);
  EXPECT_EQ(a.y.values.size(), 2u);
  EXPECT_NEAR(a.x.values.front(), -0.03 * 2 * pi, 1e-15);
  c.jobs = 2;
  const auto b = sweep_hyperfine(c);
  for (std::size_t k = 0; k < a.values.size(); ++k) EXPECT_EQ(a.values[k], b.values[k]);
  EXPECT_EQ(a.u0_checksum, b.u0_checksum);
  EXPECT_NEAR(a.min(), 0.9797, 2e-3);  // grid corners, delta_t = +-0.03
}

TEST(Sweep, ChecksumMismatchRejected) {
  auto c = small_grid(1);
  const auto a = sweep_hyperfine(c);
  c.delta_c = 0.12 * 2 * pi;
  const auto b = sweep_hyperfine(c);
  EXPECT_NE(a.u0_checksum, b.u0_checksum);
  EXPECT_THROW(surface_difference(a, b), ConfigError);
  EXPECT_NO_THROW(surface_difference(a, a));
}

TEST(Sweep, DecayLowersFidelity) {
  auto c = small_grid(1);
  c.dc_min = c.dc_max = c.dt_min = c.dt_max = 0.0;
  const auto clean = sweep_hyperfine(c);
  c.decay = true;
  const auto noisy = sweep_hyperfine(c);
  EXPECT_EQ(clean.u0_checksum, noisy.u0_checksum);
  EXPECT_LT(noisy.values[0], clean.values[0] - 0.05);
  EXPECT_GT(noisy.values[0], 0.5);
}

TEST(Sweep, LifetimeShape) {
  auto c = small_grid(2);
  c.te_list = {100.0, 1.0e6};
  const auto l = sweep_lifetime(c);
  ASSERT_EQ(l.values.size(), 2u);
  ASSERT_EQ(l.values[0].size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_LT(l.values[0][j], l.values[1][j]);
}

TEST(Sweep, ValidateRejects) {
  auto c = small_grid(2);
  c.te_list = {};
  EXPECT_THROW(sweep_hyperfine(c), ConfigError);
  c = small_grid(2);
  c.b0 = 0.3;
  EXPECT_THROW(c.validate(), ConfigError);
  c.loss = true;
  EXPECT_NO_THROW(c.validate());
  c = small_grid(2);
  c.dc_count = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Ensemble, SingleSampleEqualsPoint) {
  auto c = small_grid(1);
  c.dc_min = c.dc_max = 0.01 * 2 * pi;
  c.dt_min = c.dt_max = -0.02 * 2 * pi;
  const auto s = sweep_hyperfine(c);
  const EnsembleSample one{{c.delta_c, 0.01 * 2 * pi, std::nullopt}, {c.delta_t, -0.02 * 2 * pi, std::nullopt}};
  EXPECT_NEAR(ensemble_average_fidelity(c, std::span(&one, 1)), s.values[0], 1e-12);
  EXPECT_THROW(ensemble_average_fidelity(c, {}), ConfigError);
}

TEST(Leakage, MatchesPerturbative) {
  auto cfg = LeakageConfig::nominal(2 * pi);
  cfg.points = 41;
  const auto s = leakage_scan(cfg);
  ASSERT_EQ(s.t.size(), 41u);
  EXPECT_NEAR(s.numeric.back(), s.perturbative.back(), 0.1 * s.numeric.back());
  EXPECT_NEAR(s.numeric.front(), 0.0, 1e-12);
}

TEST(Bloch, FirstOrderTracksOde) {
  const auto b = bloch_trajectories(SechPulseParams{}.scaled(2 * pi), 0.1 * 2 * pi, 31);
  ASSERT_EQ(b.rows.size(), 31u);
  EXPECT_LT(b.max_first_order_distance, 0.02);
  EXPECT_GT(b.max_zeroth_order_distance, 0.2);
  for (const auto& r : b.rows) EXPECT_NEAR(std::hypot(r.ode.x, r.ode.y, r.ode.z), 1.0, 1e-6);
}

TEST(Utilities, Linspace) {
  const auto v = linspace(-1, 1, 5);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_DOUBLE_EQ(v[2], 0.0);
  EXPECT_DOUBLE_EQ(v.back(), 1.0);
  EXPECT_EQ(linspace(3, 4, 1), std::vector<double>{3});
}
