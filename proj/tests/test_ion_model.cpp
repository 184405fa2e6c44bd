#include "reqc/dynamics.hpp"
#include "reqc/ion_model.hpp"
#include "reqc/pulse.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace reqc;

namespace {

cd random_cd(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return {u(rng), u(rng)};
}

}  // namespace

TEST(SingleIon, DiagonalLimit) {
  const IonParams ion{0.1, 0.03, std::nullopt};
  const Matrix h = single_ion_hamiltonian(ion, {});
  Matrix expect = Matrix::Zero(3, 3);
  expect(1, 1) = -0.03;
  expect(2, 2) = 0.1;
  EXPECT_LT(max_abs(h - expect), 1e-15);
}

TEST(SingleIon, HalfRabiCoupling) {
  const std::vector<Drive> d{{Transition::g0, 4.0}};
  const Matrix h = single_ion_hamiltonian({}, d);
  EXPECT_EQ(h(2, 0), cd(2.0, 0.0));
  EXPECT_EQ(h(0, 2), cd(2.0, 0.0));
  EXPECT_EQ(h(2, 1), cd(0.0, 0.0));
}

TEST(SingleIon, DuplicateDriveRejected) {
  const std::vector<Drive> d{{Transition::g1, 1.0}, {Transition::g1, 2.0}};
  EXPECT_THROW(single_ion_hamiltonian({}, d), ConfigError);
}

TEST(SingleIon, HermitianAtRandomPoints) {
  std::mt19937 rng(7);
  for (int k = 0; k < 50; ++k) {
    const std::vector<Drive> d{{Transition::g0, random_cd(rng)}, {Transition::g1, random_cd(rng)}};
    const IonParams ion{random_cd(rng).real(), random_cd(rng).real(), std::nullopt};
    EXPECT_LT(hermiticity_defect(single_ion_hamiltonian(ion, d)), 1e-14);
    EXPECT_LT(hermiticity_defect(bar_basis_hamiltonian(ion, {random_cd(rng).real()}, d)), 1e-14);
  }
}

// |e> -> e^{i phi}|e> removes the chirp: (Delta + phidot)|e><e| + Omega_R/2 (|i><e| + h.c.)
TEST(SingleIon, AcceleratedFrameEquivalence) {
  const SechPulseParams p;
  const IonParams ion{0.1, 0.0, std::nullopt};
  for (double t : {0.2, 0.6, 0.75, 1.3}) {
    const cd w = complex_rabi(p, t);
    const std::vector<Drive> d{{Transition::g0, w}};
    const Matrix h = single_ion_hamiltonian(ion, d);
    // R = diag(1, 1, e^{-i phi}); H' = R H R^dag + i (dR/dt) R^dag
    Matrix r = Matrix::Identity(3, 3);
    r(2, 2) = std::polar(1.0, -chirp_phase(p, t));
    Matrix hp = r * h * r.adjoint();
    hp(2, 2) += instantaneous_detuning(p, t);
    Matrix expect = Matrix::Zero(3, 3);
    expect(2, 2) = ion.delta_opt + instantaneous_detuning(p, t);
    expect(2, 0) = expect(0, 2) = 0.5 * rabi_envelope(p, t);
    EXPECT_LT(max_abs(hp - expect), 1e-13) << t;
  }
}

// numerical conjugation B^dag H B against the closed form
TEST(BarBasis, ConjugationOracle) {
  std::mt19937 rng(11);
  for (int k = 0; k < 100; ++k) {
    const std::vector<Drive> d{{Transition::g0, random_cd(rng)}, {Transition::g1, random_cd(rng)}};
    const IonParams ion{random_cd(rng).real(), random_cd(rng).real(), std::nullopt};
    const BarBasis bar{random_cd(rng).real()};
    const Matrix a = to_bar_basis(single_ion_hamiltonian(ion, d), bar);
    EXPECT_LT(max_abs(a - bar_basis_hamiltonian(ion, bar, d)), 1e-12);
    EXPECT_LT(max_abs(from_bar_basis(a, bar) - single_ion_hamiltonian(ion, d)), 1e-12);
  }
}

TEST(BarBasis, TransformUnitary) {
  const Matrix b = bar_transform({0.37});
  EXPECT_LT(unitarity_defect(b), 1e-15);
  // two applications of the change of basis and its inverse
  EXPECT_LT(max_abs(b * b.adjoint() - Matrix::Identity(3, 3)), 1e-15);
}

// laser phase alpha + pi on g1 (amplitude e^{-i(alpha+pi)} Omega) decouples |0bar>
TEST(BarBasis, SelectiveAddressing) {
  const double alpha = 0.9;
  const cd w = 2.5;
  const std::vector<Drive> d{{Transition::g0, w}, {Transition::g1, std::polar(1.0, -(alpha + pi)) * w}};
  const Matrix h = bar_basis_hamiltonian({}, {alpha}, d);
  EXPECT_LT(std::abs(h(2, 0)), 1e-15);
  EXPECT_GT(std::abs(h(2, 1)), 1.0);
}

TEST(BarBasis, NoHyperfineNoBarMixing) {
  const std::vector<Drive> d{{Transition::g0, 1.0}};
  const Matrix h = bar_basis_hamiltonian({0.1, 0.0, std::nullopt}, {0.2}, d);
  EXPECT_EQ(h(0, 1), cd(0.0));
  EXPECT_EQ(h(1, 0), cd(0.0));
}

TEST(SplitH0V, ReconstructsAndSpectrum) {
  const std::vector<Drive> d{{Transition::g0, cd(1.0, 0.3)}, {Transition::g1, cd(-0.4, 2.0)}};
  const IonParams ion{0.1, 0.03, std::nullopt};
  const BarBasis bar{0.4};
  const auto s = split_h0_v(ion, bar, d);
  EXPECT_LT(max_abs(s.h0 + s.v - bar_basis_hamiltonian(ion, bar, d)), 1e-16);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.v.topLeftCorner(2, 2));
  EXPECT_NEAR(es.eigenvalues()(0), -0.03, 1e-15);
  EXPECT_NEAR(es.eigenvalues()(1), 0.0, 1e-15);
  EXPECT_NEAR(s.v.operatorNorm(), 0.03, 1e-15);
}

TEST(TwoIon, TensorSumWithoutBlockade) {
  const IonParams c{0.1, 0.02, std::nullopt}, t{0.08, -0.01, std::nullopt};
  const Matrix h = two_ion_hamiltonian(c, t, {0.0}, {}, {});
  EXPECT_LT(max_abs(h - Matrix(h.diagonal().asDiagonal())), 1e-16);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double ea = a == 2 ? 0.1 : (a == 1 ? -0.02 : 0.0);
      const double eb = b == 2 ? 0.08 : (b == 1 ? 0.01 : 0.0);
      EXPECT_NEAR(h(3 * a + b, 3 * a + b).real(), ea + eb, 1e-16);
    }
}

TEST(TwoIon, BlockadeEnergy) {
  const IonParams c{0.1, 0.0, std::nullopt}, t{0.08, 0.0, std::nullopt};
  const Matrix h = two_ion_hamiltonian(c, t, {20.0}, {}, {});
  EXPECT_NEAR(h(pair_index(Level::excited, Level::excited), pair_index(Level::excited, Level::excited)).real(), 20.18,
              1e-14);
  EXPECT_EQ(pair_index(Level::ground1, Level::ground0), 3);
}

TEST(TwoIon, HermitianWithDrives) {
  const std::vector<Drive> dc{{Transition::g0, cd(1.0, 2.0)}};
  const std::vector<Drive> dt{{Transition::g1, cd(0.5, -1.0)}, {Transition::g0, cd(0.0, 0.3)}};
  EXPECT_LT(hermiticity_defect(two_ion_hamiltonian({0.1, 0.01}, {0.2, 0.02}, {20.0}, dc, dt)), 1e-15);
}

// control parked in |e>; resonant sech pi-pulse on the target barely excites it
TEST(TwoIon, BlockadeSuppressesTargetExcitation) {
  const SechPulseParams p;
  auto fill = [p](double t, Matrix& h) {
    const std::vector<Drive> dt{{Transition::g0, complex_rabi(p, t)}};
    h = two_ion_hamiltonian({0.0}, {0.0}, {20.0}, {}, dt);
  };
  const TimeDependentHamiltonian h{9, fill, {p.t_start, p.t_end()}};
  const auto psi = propagate_state(h, QuantumState::basis(9, pair_index(Level::excited, Level::ground0)), 0.0,
                                   p.duration, Tolerances::uniform(1e-10));
  const double pe = std::norm(psi.psi(pair_index(Level::excited, Level::excited)));
  EXPECT_LT(pe, 0.1);
  EXPECT_LT(pe, 0.01);  // oracle value is about 2e-3
}

TEST(Hyperfine, WindowCheck) {
  EXPECT_TRUE(hyperfine_within({0.0, 0.06}));
  EXPECT_FALSE(hyperfine_within({0.0, -0.07}));
}

TEST(DecayChannel, Validation) {
  EXPECT_THROW(DecayChannel::from_lifetime(0.0), ConfigError);
  auto d = DecayChannel::from_lifetime(100.0, 0.3, 0.3);
  EXPECT_THROW(d.validate(), ConfigError);
  d.loss = true;
  EXPECT_NO_THROW(d.validate());
  EXPECT_NEAR(d.loss_fraction(), 0.4, 1e-15);
  EXPECT_THROW(DecayChannel::from_lifetime(1.0, 0.8, 0.8).validate(), ConfigError);
}
