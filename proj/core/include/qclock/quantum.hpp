#pragma once

#include <Eigen/Dense>

#include <vector>

namespace qclock {

/// Pure state of N two-level atoms, 2^N amplitudes with unit norm.
class PureState {
 public:
  explicit PureState(Eigen::VectorXcd amplitudes);

  int atoms() const { return atoms_; }
  Eigen::Index dim() const { return amps_.size(); }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }

  /// All atoms in |0>.
  static PureState ground(int atoms);

 private:
  Eigen::VectorXcd amps_;
  int atoms_;
};

/// Complete positive operator-valued measure: Hermitian PSD elements summing
/// to the identity.
struct Povm {
  std::vector<Eigen::MatrixXcd> elements;

  int outcomes() const { return static_cast<int>(elements.size()); }
  Eigen::Index dim() const { return elements.empty() ? 0 : elements.front().rows(); }
  void validate(double tol = 1e-9) const;
};

/// One interrogation's quantum algorithm: preparation, measurement, and the
/// outcome-to-phase-estimate labels g(a) in radians (omega*T scale).
struct InterrogationAlgorithm {
  PureState state;
  Povm povm;
  Eigen::VectorXd labels;
};

/// Per-basis-state phases of the collective rotation exp applied by free
/// evolution: basis string b picks up e^{i*phi*(weight(b) - N/2)} with
/// phi = omega*T and R_z(phi) = diag(e^{-i phi/2}, e^{+i phi/2}) per atom.
Eigen::VectorXcd evolution_phases(int atoms, double phi);

PureState free_evolution(const PureState& psi, double omega, double duration);

/// Born-rule outcome distribution p(a | omega) for the evolved state.
/// Tiny negative values are clipped to zero.
Eigen::VectorXd outcome_probs(const PureState& state, const Povm& povm,
                              double omega, double duration);
Eigen::VectorXd outcome_probs(const InterrogationAlgorithm& alg, double omega,
                              double duration);
/// Same with the collective rotation angle given directly (used by the
/// timing-compensation machinery, where the angle is not omega*T).
Eigen::VectorXd outcome_probs_at_phase(const PureState& state, const Povm& povm,
                                       double rotation_phase);

/// Conjugates every element by the collective rotation of the given angle;
/// measuring the rotated POVM equals advancing the state by the same angle.
Povm rotate_povm(const Povm& povm, double phase);

/// Standard Ramsey interrogation: (|0> - i|1>)/sqrt(2) per atom, per-atom
/// readout in the phase-rotated |+/-> basis, outcomes grouped by excitation
/// count (N+1 outcomes). Labels are zeros; callers assign g externally.
InterrogationAlgorithm ramsey_algorithm(int atoms, double phase);

/// Baseline optimized for a uniform phase prior: symmetric-subspace sine
/// state with a discretized covariant phase measurement. Labels are the
/// measurement phases in (-pi, pi]. outcomes must be >= atoms + 1.
InterrogationAlgorithm buzek_algorithm(int atoms, int outcomes = 12);

}  // namespace qclock
