#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace qclock {

/// Power-law oscillator noise, S(w) proportional to w^alpha.
///
/// Supported exponents: alpha = -2 (Brownian frequency noise), alpha = -1
/// (flicker), and generic alpha in (-3,-1) via adaptive quadrature of the
/// formal point kernel. Times are in seconds, frequency deviations in rad/s.
class NoiseModel {
 public:
  NoiseModel(double alpha, double amplitude);

  double alpha() const { return alpha_; }
  double amplitude() const { return h_; }
  bool has_closed_form() const { return alpha_ == -2.0 || alpha_ == -1.0; }

  /// Formal covariance Cov(w(s), w(s')) at separation dt = |s - s'| > 0.
  /// Only interval averages of frequency differences are well defined; the
  /// point kernel itself is a generalized function and dt = 0 is rejected.
  double point_kernel(double dt) const;

 private:
  double alpha_;
  double h_;
};

/// Interval boundaries t_0 < t_1 < ... < t_{n+1}. I_0 = [t_0, t_1] is the
/// reference interval before the first interrogation; I_1..I_n are the
/// interrogation intervals.
class IntervalGrid {
 public:
  explicit IntervalGrid(std::vector<double> boundaries);
  static IntervalGrid uniform(double duration, int interrogations);

  int interrogations() const { return static_cast<int>(boundaries_.size()) - 2; }
  double start(int interval) const { return boundaries_.at(interval); }
  double stop(int interval) const { return boundaries_.at(interval + 1); }
  double length(int interval) const { return stop(interval) - start(interval); }

 private:
  std::vector<double> boundaries_;
};

/// Covariance of the interval-averaged frequency differences,
/// C(i,j) = Cov(w_i - w_0, w_j - w_0), i, j = 1..n. Symmetric PSD.
struct DiffCovariance {
  Eigen::MatrixXd matrix;
};

struct QuadratureOptions {
  double rel_tol = 1e-8;
  int max_depth = 48;
};

/// Covariance of interval averages over [a,b] and [c,d]: the double integral
/// of the point kernel over the rectangle divided by the interval lengths.
/// Closed form for alpha in {-2,-1}; adaptive quadrature otherwise.
double avg_cov(const NoiseModel& model, double a, double b, double c, double d);

/// Quadrature evaluation of avg_cov for any supported model. Throws if the
/// requested relative tolerance is not reached, reporting the achieved error.
double avg_cov_quadrature(const NoiseModel& model, double a, double b, double c,
                          double d, const QuadratureOptions& options = {});

/// Assembles C(i,j) = Cov(w_i - w_0, w_j - w_0) by bilinear expansion into
/// four avg_cov terms and verifies the PSD invariant
/// (min eigenvalue >= -1e-9 * spectral norm).
DiffCovariance diff_cov_matrix(const NoiseModel& model, const IntervalGrid& grid);

/// Zero-mean multivariate Gaussian draw with covariance C. Eigenvalues within
/// the PSD tolerance below zero are clipped before factorization.
/// Deterministic given the seed.
Eigen::VectorXd sample_trajectory(const DiffCovariance& cov, std::uint64_t seed);

/// Caches the factorization of C for repeated draws.
class TrajectorySampler {
 public:
  explicit TrajectorySampler(const DiffCovariance& cov);
  Eigen::VectorXd sample(std::uint64_t seed) const;

 private:
  Eigen::MatrixXd transform_;
};

}  // namespace qclock
