#pragma once

#include "qclock/quantum.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace qclock {

/// Tabulated interrogation cost C(omega_j, a) on the frequency grid, together
/// with the prior weights, the centered conditional phase means
/// E(theta - E(theta) | omega_j), and the outcome labels g(a).
struct CostTable {
  Eigen::VectorXd omegas;        // rad/s
  Eigen::VectorXd priors;        // sums to 1
  Eigen::VectorXd phase_offsets; // rad, one per grid node
  Eigen::VectorXd labels;        // rad, one per outcome
  Eigen::MatrixXd costs;         // omegas.size() x labels.size(), rad^2
  double duration = 1.0;         // s
};

/// C(omega, a) = (omega*T - g(a))^2 + 2*(omega*T - g(a)) * E(theta - E(theta) | omega).
CostTable build_cost(const Eigen::VectorXd& omegas, const Eigen::VectorXd& priors,
                     const Eigen::VectorXd& phase_offsets, double duration,
                     const Eigen::VectorXd& labels);

/// Operators R_a = sum_j p_j C(omega_j, a) |psi'_j><psi'_j| so that the
/// expected cost of measuring {P_a} equals sum_a tr(P_a R_a).
std::vector<Eigen::MatrixXcd> povm_cost_operators(const CostTable& cost,
                                                  const PureState& state);

/// Conjugated operator S = sum_j p_j U_j^dag (sum_a C(omega_j,a) P_a) U_j so
/// that the expected cost of preparing |psi> equals <psi|S|psi>.
Eigen::MatrixXcd state_cost_operator(const CostTable& cost, const Povm& povm);

/// Direct evaluation sum_a sum_j C(omega_j,a) p(omega_j) p(a|omega_j).
double expected_cost(const InterrogationAlgorithm& alg, const CostTable& cost);

struct PovmSolverOptions {
  double gap_tol = 1e-10;   // target duality gap relative to problem scale
  double mu_shrink = 0.12;
  int max_outer = 60;
  int max_newton = 40;
};

struct PovmCertificate {
  double hermiticity_residual = 0.0;  // max |Y - Y^dag| for Y = sum_a P_a R_a
  double min_slack = 0.0;             // min_a lambda_min(R_a - herm(Y))
  double duality_gap = 0.0;
  bool converged = false;
};

/// Minimizes sum_a tr(P_a R_a) over POVMs {P_a} by a dense barrier method on
/// the dual (max tr Y s.t. Y <= R_a). Sized for dim <= 8.
Povm optimal_povm(const std::vector<Eigen::MatrixXcd>& cost_operators,
                  PovmCertificate* certificate = nullptr,
                  const PovmSolverOptions& options = {});

Povm optimal_povm_for_state(const PureState& state, const CostTable& cost,
                            int n_outcomes, PovmCertificate* certificate = nullptr,
                            const PovmSolverOptions& options = {});

/// Minimal-eigenvalue eigenvector of the state-step operator; ties broken
/// deterministically. Returns the state and its expected cost.
std::pair<PureState, double> optimal_state_for_povm(const Povm& povm,
                                                    const CostTable& cost);

struct SeesawOptions {
  int atoms = 1;            // sets the dimension 2^atoms when no warm start
  int n_outcomes = 0;       // 0: one outcome per grid node
  int starts = 8;           // random initial states
  int max_iters = 60;
  double tol = 1e-10;       // stop when the objective improves less than this
  int refine_rounds = 8;    // label refinement rounds in optimize_interrogation
  bool ramsey_anchor = true;
  std::uint64_t seed = 0x6b43a9b1u;
  PovmSolverOptions povm;
};

struct SdpSolution {
  InterrogationAlgorithm algorithm;
  double objective = 0.0;
  PovmCertificate certificate;
  std::vector<double> trace;  // objective after each seesaw iteration
};

/// Alternates the POVM SDP and the state eigenproblem for the fixed labels of
/// the cost table, multistarted. The objective is non-increasing across
/// iterations; a violation beyond numerical slack throws.
SdpSolution seesaw(const CostTable& cost, const SeesawOptions& options,
                   const InterrogationAlgorithm* warm_start = nullptr);

/// Posterior-mean labels for an algorithm under the table's prior:
/// g'(a) = E(theta - E(theta) + omega*T | a). Outcomes with probability
/// below 1e-12 keep their current label.
Eigen::VectorXd refined_labels(const InterrogationAlgorithm& alg,
                               const CostTable& cost);

/// One g -> g' refinement followed by a warm re-solve. The refined objective
/// never exceeds the input objective beyond numerical slack.
SdpSolution refine_g(const SdpSolution& solution, const CostTable& cost,
                     const SeesawOptions& options);

/// Full per-interrogation optimization: multistart seesaw with identity grid
/// labels, a best-phase Ramsey-anchored branch, and refinement of the winner
/// to a label fixed point. The returned objective equals the expected
/// posterior variance increase of the returned algorithm.
SdpSolution optimize_interrogation(const Eigen::VectorXd& omegas,
                                   const Eigen::VectorXd& priors,
                                   const Eigen::VectorXd& phase_offsets,
                                   double duration, const SeesawOptions& options,
                                   const InterrogationAlgorithm* warm_start = nullptr);

}  // namespace qclock
