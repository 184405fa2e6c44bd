#pragma once

// Hamiltonians of a single three-level ion and of a dipole-blockaded ion pair.
//
// Per-ion basis ordering is (|0>, |1>, |e>). In two-ion products the control
// ion is the first tensor factor, so |c t> has index 3 c + t.
//
// Frame: fixed rotating frame of the channel center. A drive on i<->e with
// complex Rabi frequency Omega_i(t) contributes (Omega_i/2)|e><i| + h.c.

#include "reqc/linalg.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <span>

namespace reqc {

enum class Level : int { ground0 = 0, ground1 = 1, excited = 2 };

/// Optical transition addressed by one color.
enum class Transition : int { g0 = 0, g1 = 1 };

inline constexpr Eigen::Index kIonDim = 3;
inline constexpr Eigen::Index kPairDim = 9;

inline Eigen::Index pair_index(Level control, Level target) {
  return 3 * static_cast<Eigen::Index>(control) + static_cast<Eigen::Index>(target);
}

/// Computational-basis indices |00>, |01>, |10>, |11> inside the 9-dim space.
inline constexpr std::array<Eigen::Index, 4> kQubitIndices{0, 1, 3, 4};

/// Spontaneous decay |e> -> |0>, |1> with rate gamma and branching b0, b1.
struct DecayChannel {
  double gamma = 0.0;  ///< 1 / T_e (1/us)
  double b0 = 0.5;
  double b1 = 0.5;
  /// When set, the remaining fraction 1 - b0 - b1 decays out of the
  /// simulated manifold (trace is not preserved).
  bool loss = false;

  static DecayChannel from_lifetime(double te_us, double b0 = 0.5, double b1 = 0.5) {
    if (!(te_us > 0.0)) throw ConfigError("decay: lifetime must be > 0");
    return {1.0 / te_us, b0, b1, false};
  }

  double loss_fraction() const { return std::max(0.0, 1.0 - b0 - b1); }

  void validate() const {
    if (gamma < 0.0) throw ConfigError("decay: gamma must be >= 0");
    if (b0 < 0.0 || b1 < 0.0) throw ConfigError("decay: branching ratios must be >= 0");
    if (b0 + b1 > 1.0 + 1e-12) throw ConfigError("decay: b0 + b1 must be <= 1");
    if (!loss && std::abs(b0 + b1 - 1.0) > 1e-12)
      throw ConfigError("decay: b0 + b1 must equal 1 unless the loss channel is enabled");
  }
};

struct IonParams {
  double delta_opt = 0.0;  ///< optical detuning from the channel center (rad/us)
  double delta_hf = 0.0;   ///< hyperfine shift of |1> (rad/us)
  std::optional<DecayChannel> decay;
};

/// True when |delta_hf| is inside the expected hyperfine distribution.
/// Out-of-range shifts are legal; callers are expected to warn.
inline bool hyperfine_within(const IonParams& ion, double bound = 0.06) {
  return std::abs(ion.delta_hf) <= bound;
}

struct BarBasis {
  double alpha = 0.0;
};

struct BlockadeParams {
  double delta_dd = 20.0;  ///< |ee> energy shift (rad/us)
  void validate() const {
    if (delta_dd < 0.0) throw ConfigError("blockade: delta_dd must be >= 0");
  }
};

struct Drive {
  Transition transition;
  cd amplitude;  ///< complex Rabi frequency Omega_i(t)
};

namespace detail {

inline std::array<cd, 2> collect_drives(std::span<const Drive> drives) {
  std::array<cd, 2> omega{};
  std::array<bool, 2> seen{};
  for (const auto& d : drives) {
    const auto k = static_cast<std::size_t>(d.transition);
    if (seen[k]) throw ConfigError("duplicate drive on one transition");
    seen[k] = true;
    omega[k] = d.amplitude;
  }
  return omega;
}

}  // namespace detail

/// H = Delta |e><e| - delta |1><1| + sum_i (Omega_i/2 |e><i| + h.c.)
inline Matrix single_ion_hamiltonian(const IonParams& ion, std::span<const Drive> drives) {
  const auto omega = detail::collect_drives(drives);
  Matrix h = Matrix::Zero(kIonDim, kIonDim);
  h(2, 2) = ion.delta_opt;
  h(1, 1) = -ion.delta_hf;
  for (int k = 0; k < 2; ++k) {
    h(2, k) = 0.5 * omega[k];
    h(k, 2) = std::conj(h(2, k));
  }
  return h;
}

/// Columns are |0bar>, |1bar>, |e> expressed in the logical basis, with
/// |0bar>, |1bar> = (|0> +- e^{i alpha}|1>)/sqrt(2).
inline Matrix bar_transform(const BarBasis& bar) {
  const double r = 1.0 / std::sqrt(2.0);
  const cd ph = std::polar(1.0, bar.alpha);
  Matrix b = Matrix::Zero(kIonDim, kIonDim);
  b(0, 0) = r;
  b(1, 0) = r * ph;
  b(0, 1) = r;
  b(1, 1) = -r * ph;
  b(2, 2) = 1.0;
  return b;
}

/// Logical-basis operator expressed in the ordered bar basis (|0bar>, |1bar>, |e>).
inline Matrix to_bar_basis(const Matrix& logical, const BarBasis& bar) {
  const Matrix b = bar_transform(bar);
  return b.adjoint() * logical * b;
}

inline Matrix from_bar_basis(const Matrix& barred, const BarBasis& bar) {
  const Matrix b = bar_transform(bar);
  return b * barred * b.adjoint();
}

/// Closed form of the single-ion Hamiltonian in the bar basis
/// (|0bar>, |1bar>, |e>): couplings (Omega_0 +- e^{i alpha} Omega_1)/(2 sqrt 2)
/// and the delta/2 block that mixes the bar states.
inline Matrix bar_basis_hamiltonian(const IonParams& ion, const BarBasis& bar,
                                    std::span<const Drive> drives) {
  const auto omega = detail::collect_drives(drives);
  const cd ph = std::polar(1.0, bar.alpha);
  const double k = 1.0 / (2.0 * std::sqrt(2.0));
  const double d = ion.delta_hf;
  Matrix h = Matrix::Zero(kIonDim, kIonDim);
  h(2, 2) = ion.delta_opt;
  h(0, 0) = -0.5 * d;
  h(1, 1) = -0.5 * d;
  h(0, 1) = 0.5 * d;
  h(1, 0) = 0.5 * d;
  h(2, 0) = k * (omega[0] + ph * omega[1]);
  h(2, 1) = k * (omega[0] - ph * omega[1]);
  h(0, 2) = std::conj(h(2, 0));
  h(1, 2) = std::conj(h(2, 1));
  return h;
}

struct SplitHamiltonian {
  Matrix h0;  ///< drive and optical-detuning part
  Matrix v;   ///< hyperfine perturbation on the bar subspace
};

inline Matrix hyperfine_perturbation(double delta_hf) {
  Matrix v = Matrix::Zero(kIonDim, kIonDim);
  v(0, 0) = -0.5 * delta_hf;
  v(1, 1) = -0.5 * delta_hf;
  v(0, 1) = 0.5 * delta_hf;
  v(1, 0) = 0.5 * delta_hf;
  return v;
}

inline SplitHamiltonian split_h0_v(const IonParams& ion, const BarBasis& bar,
                                   std::span<const Drive> drives) {
  Matrix h = bar_basis_hamiltonian(ion, bar, drives);
  Matrix v = hyperfine_perturbation(ion.delta_hf);
  return {h - v, std::move(v)};
}

/// H_c (x) 1 + 1 (x) H_t + Delta_dd |ee><ee|
inline Matrix two_ion_hamiltonian(const IonParams& control, const IonParams& target,
                                  const BlockadeParams& blockade,
                                  std::span<const Drive> control_drives,
                                  std::span<const Drive> target_drives) {
  const Matrix id = Matrix::Identity(kIonDim, kIonDim);
  Matrix h = kron(single_ion_hamiltonian(control, control_drives), id) +
             kron(id, single_ion_hamiltonian(target, target_drives));
  const auto ee = pair_index(Level::excited, Level::excited);
  h(ee, ee) += blockade.delta_dd;
  return h;
}

}  // namespace reqc
