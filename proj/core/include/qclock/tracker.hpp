#pragma once

#include "qclock/gaussian.hpp"
#include "qclock/quantum.hpp"

#include <Eigen/Dense>

namespace qclock {

struct TrackerConfig {
  int memory = 1;        // retained frequencies m
  int grid_points = 41;  // nodes per frequency axis, odd
  double grid_span = 4.0;
  int max_moment = 2;    // K, >= 2
  double duration = 1.0; // interrogation duration T (s)
};

struct PhaseStatistics {
  double estimate = 0.0;  // E(theta_n | a_n)
  double variance = 0.0;  // V(theta_n | a_n)
  // E(theta_n - E(theta_n) | omega_{n+1} node, a_n), one entry per node of the
  // newest axis; empty unless the belief holds an extended prior.
  Eigen::VectorXd conditional_offsets;
};

/// Discretized joint posterior over the retained average frequencies together
/// with the conditional phase moments M_{k,n} = E(theta_n^k | s_n, a_n).
///
/// Per interrogation the owner calls, in order:
///   extend_prior() -> [predict_outcomes / phase_statistics /
///   expected_variance_increase] -> bayes_update(alg, outcome) ->
///   update_moments() -> truncate().
class ClockBelief {
 public:
  /// freq_cov is the covariance of (omega_1 .. omega_H) with omega_0 pinned
  /// to zero; H bounds the number of interrogations the belief can track.
  ClockBelief(TrackerConfig config, Eigen::MatrixXd freq_cov);

  int step() const { return step_; }
  bool extended() const { return extended_; }
  const TrackerConfig& config() const { return config_; }

  /// Appends the omega_{n+1} axis using the conditional Gaussian given the
  /// retained frequencies; moments are broadcast across the new axis.
  void extend_prior();

  /// Marginal outcome distribution p(a_{n+1} | a_n) under the extended prior.
  Eigen::VectorXd predict_outcomes(const InterrogationAlgorithm& alg) const;

  /// Expected posterior variance increase of the cumulative phase for one
  /// interrogation with the given algorithm, from the extended prior.
  double expected_variance_increase(const InterrogationAlgorithm& alg) const;

  /// Multiplies in the outcome likelihood and renormalizes. A zero
  /// predicted probability for the observed outcome is a hard error.
  void bayes_update(const InterrogationAlgorithm& alg, int outcome);

  /// Binomial expansion of theta_{n+1} = theta_n + omega_{n+1} T onto the
  /// extended grid; valid after bayes_update.
  void update_moments();

  /// Marginalizes out the oldest axis when more than `memory` are retained;
  /// moments are re-aggregated as mixture moments over the removed axis.
  void truncate();

  /// Convenience: bayes_update + update_moments + truncate.
  void advance(const InterrogationAlgorithm& alg, int outcome);

  PhaseStatistics phase_statistics() const;

  const GridDistribution& joint() const { return joint_; }
  const Eigen::MatrixXd& moments() const { return moments_; }

  /// Nodes and marginal prior of the newest (omega_{n+1}) axis.
  Eigen::VectorXd new_axis_nodes() const;
  Eigen::VectorXd new_axis_marginal() const;
  double prior_mean() const;

  /// Posterior mean of the most recent frequency (after advance()).
  double frequency_estimate() const;

 private:
  void require_extended(const char* op) const;

  TrackerConfig config_;
  Eigen::MatrixXd freq_cov_;
  int step_ = 0;
  bool extended_ = false;
  bool updated_ = false;
  bool moments_advanced_ = false;
  GridDistribution joint_;
  Eigen::MatrixXd moments_;  // joint_.size() x (K+1); column k holds M_k
};

}  // namespace qclock
