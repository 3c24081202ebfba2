#pragma once

#include <Eigen/Dense>

#include <vector>

namespace qclock {

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct Conditional {
  double mean;
  double variance;
};

/// Mean/variance of the last coordinate given observed values for the others.
/// The leading block is regularized by +1e-12*trace when near singular.
Conditional condition_last(const Gaussian& g, const Eigen::VectorXd& observed);

/// Same conditioning with the dependence on the observed values kept
/// symbolic: mean = offset + weights . observed.
struct ConditionalSpec {
  Eigen::VectorXd weights;
  double offset;
  double variance;
};
ConditionalSpec conditional_last_spec(const Gaussian& g);

/// Discrete distribution on a tensor-product grid. Axis values are sorted
/// grid nodes; probabilities are stored flat with the last axis fastest.
class GridDistribution {
 public:
  GridDistribution(std::vector<Eigen::VectorXd> axes, Eigen::VectorXd probs);
  static GridDistribution delta(double value);

  int rank() const { return static_cast<int>(axes_.size()); }
  Eigen::Index size() const { return probs_.size(); }
  const Eigen::VectorXd& axis(int a) const { return axes_[a]; }
  const std::vector<Eigen::VectorXd>& axes() const { return axes_; }
  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::VectorXd& probs() { return probs_; }

  Eigen::Index stride(int axis) const { return strides_[axis]; }
  Eigen::Index index_on_axis(int axis, Eigen::Index flat) const {
    return (flat / strides_[axis]) % axes_[axis].size();
  }
  double node(int axis, Eigen::Index flat) const {
    return axes_[axis](index_on_axis(axis, flat));
  }

  /// Sums probabilities over the named axis; total mass preserved.
  GridDistribution marginalize(int axis) const;
  /// Axis-length vector of marginal probabilities.
  Eigen::VectorXd marginal(int axis) const;

  double mean(int axis) const;
  double variance(int axis) const;

  void normalize();

 private:
  std::vector<Eigen::VectorXd> axes_;
  std::vector<Eigen::Index> strides_;
  Eigen::VectorXd probs_;
};

/// Uniform grid over mean +- span standard deviations with weights
/// proportional to the Gaussian density, renormalized. points must be odd
/// and >= 3. A degenerate variance collapses all mass onto the center node.
GridDistribution discretize(double mean, double variance, int points, double span);

}  // namespace qclock
