#include "qclock/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace qclock {

ConditionalSpec conditional_last_spec(const Gaussian& g) {
  const Eigen::Index n = g.mean.size();
  if (g.cov.rows() != n || g.cov.cols() != n) {
    throw std::invalid_argument("conditional_last_spec: dimension mismatch");
  }
  if (n == 1) {
    double var = g.cov(0, 0);
    if (var < 0.0) var = 0.0;
    return {Eigen::VectorXd(0), g.mean(0), var};
  }
  const Eigen::Index m = n - 1;
  Eigen::MatrixXd block = g.cov.topLeftCorner(m, m);
  const Eigen::VectorXd cross = g.cov.topRightCorner(m, 1);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
  Eigen::VectorXd w;
  bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
  if (ok) {
    w = ldlt.solve(cross);
    ok = (block * w - cross).norm() <= 1e-8 * (cross.norm() + block.norm());
  }
  if (!ok) {
    block.diagonal().array() += 1e-12 * block.trace();
    Eigen::LDLT<Eigen::MatrixXd> reg(block);
    if (reg.info() != Eigen::Success) {
      throw std::runtime_error("condition_last: degenerate conditioning block");
    }
    w = reg.solve(cross);
  }
  double var = g.cov(n - 1, n - 1) - cross.dot(w);
  if (var < 0.0) var = 0.0;
  const double offset = g.mean(n - 1) - w.dot(g.mean.head(m));
  return {std::move(w), offset, var};
}

Conditional condition_last(const Gaussian& g, const Eigen::VectorXd& observed) {
  if (observed.size() != g.mean.size() - 1) {
    throw std::invalid_argument("condition_last: expected N-1 observed values");
  }
  const ConditionalSpec spec = conditional_last_spec(g);
  const double mean = spec.weights.size() == 0
                          ? spec.offset
                          : spec.offset + spec.weights.dot(observed);
  return {mean, spec.variance};
}

GridDistribution::GridDistribution(std::vector<Eigen::VectorXd> axes,
                                   Eigen::VectorXd probs)
    : axes_(std::move(axes)), probs_(std::move(probs)) {
  if (axes_.empty()) throw std::invalid_argument("GridDistribution: no axes");
  Eigen::Index total = 1;
  for (const auto& ax : axes_) {
    if (ax.size() < 1) throw std::invalid_argument("GridDistribution: empty axis");
    total *= ax.size();
  }
  if (total != probs_.size()) {
    throw std::invalid_argument("GridDistribution: probs size mismatch");
  }
  if ((probs_.array() < -1e-15).any()) {
    throw std::invalid_argument("GridDistribution: negative probability");
  }
  const double sum = probs_.sum();
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("GridDistribution: probabilities must sum to 1");
  }
  strides_.assign(axes_.size(), 1);
  for (int a = static_cast<int>(axes_.size()) - 2; a >= 0; --a) {
    strides_[a] = strides_[a + 1] * axes_[a + 1].size();
  }
}

GridDistribution GridDistribution::delta(double value) {
  Eigen::VectorXd ax(1);
  ax << value;
  Eigen::VectorXd p(1);
  p << 1.0;
  return GridDistribution({ax}, p);
}

GridDistribution GridDistribution::marginalize(int axis) const {
  if (axis < 0 || axis >= rank()) throw std::invalid_argument("marginalize: bad axis");
  if (rank() == 1) {
    throw std::invalid_argument("marginalize: cannot remove the only axis");
  }
  std::vector<Eigen::VectorXd> new_axes;
  for (int a = 0; a < rank(); ++a) {
    if (a != axis) new_axes.push_back(axes_[a]);
  }
  Eigen::Index new_size = size() / axes_[axis].size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(new_size);

  const Eigen::Index inner = strides_[axis];                 // stride of removed axis
  const Eigen::Index count = axes_[axis].size();
  const Eigen::Index outer = size() / (inner * count);
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index base = o * inner * count + k * inner;
      for (Eigen::Index i = 0; i < inner; ++i) {
        out(o * inner + i) += probs_(base + i);
      }
    }
  }
  return GridDistribution(std::move(new_axes), std::move(out));
}

Eigen::VectorXd GridDistribution::marginal(int axis) const {
  if (axis < 0 || axis >= rank()) throw std::invalid_argument("marginal: bad axis");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(axes_[axis].size());
  for (Eigen::Index f = 0; f < size(); ++f) {
    out(index_on_axis(axis, f)) += probs_(f);
  }
  return out;
}

double GridDistribution::mean(int axis) const {
  const Eigen::VectorXd m = marginal(axis);
  return m.dot(axes_[axis]);
}

double GridDistribution::variance(int axis) const {
  const Eigen::VectorXd m = marginal(axis);
  const double mu = m.dot(axes_[axis]);
  const double second = m.dot(axes_[axis].cwiseProduct(axes_[axis]));
  return std::max(0.0, second - mu * mu);
}

void GridDistribution::normalize() {
  const double sum = probs_.sum();
  if (!(sum > 0.0)) throw std::runtime_error("GridDistribution: zero total mass");
  probs_ /= sum;
}

GridDistribution discretize(double mean, double variance, int points, double span) {
  if (points < 3 || points % 2 == 0) {
    throw std::invalid_argument("discretize: points must be odd and >= 3");
  }
  if (!(span > 0.0)) throw std::invalid_argument("discretize: span must be > 0");
  if (variance < 0.0) throw std::invalid_argument("discretize: negative variance");

  Eigen::VectorXd nodes(points);
  Eigen::VectorXd probs(points);
  const double sigma = std::sqrt(variance);
  if (sigma <= 1e-14 * (1.0 + std::abs(mean))) {
    nodes.setConstant(mean);
    probs.setZero();
    probs(points / 2) = 1.0;
    return GridDistribution({nodes}, probs);
  }
  const double lo = mean - span * sigma;
  const double step = 2.0 * span * sigma / (points - 1);
  for (int i = 0; i < points; ++i) {
    nodes(i) = lo + i * step;
    const double z = (nodes(i) - mean) / sigma;
    probs(i) = std::exp(-0.5 * z * z);
  }
  probs /= probs.sum();
  return GridDistribution({nodes}, probs);
}

}  // namespace qclock
