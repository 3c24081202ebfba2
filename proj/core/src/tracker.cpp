#include "qclock/tracker.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qclock {

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

ClockBelief::ClockBelief(TrackerConfig config, Eigen::MatrixXd freq_cov)
    : config_(config),
      freq_cov_(std::move(freq_cov)),
      joint_(GridDistribution::delta(0.0)),
      moments_(Eigen::MatrixXd::Zero(1, config.max_moment + 1)) {
  if (config_.memory < 1) throw std::invalid_argument("TrackerConfig: memory >= 1");
  if (config_.max_moment < 2) throw std::invalid_argument("TrackerConfig: max_moment >= 2");
  if (config_.grid_points < 3 || config_.grid_points % 2 == 0) {
    throw std::invalid_argument("TrackerConfig: grid_points must be odd and >= 3");
  }
  if (!(config_.duration > 0.0)) throw std::invalid_argument("TrackerConfig: duration > 0");
  if (freq_cov_.rows() != freq_cov_.cols() || freq_cov_.rows() < 1) {
    throw std::invalid_argument("ClockBelief: bad covariance");
  }
  moments_(0, 0) = 1.0;  // theta_0 = 0 exactly
}

void ClockBelief::require_extended(const char* op) const {
  if (!extended_) {
    std::ostringstream os;
    os << op << ": belief holds no extended prior (call extend_prior first)";
    throw std::logic_error(os.str());
  }
}

void ClockBelief::extend_prior() {
  if (extended_) throw std::logic_error("extend_prior: already extended");
  const int next = step_ + 1;
  if (next > freq_cov_.rows()) {
    throw std::logic_error("extend_prior: covariance horizon exhausted");
  }

  // Conditioning set: retained interrogation indices (>= 1). The pinned
  // omega_0 axis carries no information and is excluded.
  const int rank = joint_.rank();
  const int first_axis_index = step_ - rank + 1;
  std::vector<int> cond_axes;
  std::vector<int> cond_indices;
  for (int a = 0; a < rank; ++a) {
    const int idx = first_axis_index + a;
    if (idx >= 1) {
      cond_axes.push_back(a);
      cond_indices.push_back(idx);
    }
  }

  const int nc = static_cast<int>(cond_indices.size());
  Gaussian g;
  g.mean = Eigen::VectorXd::Zero(nc + 1);
  g.cov.resize(nc + 1, nc + 1);
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < nc; ++j) {
      g.cov(i, j) = freq_cov_(cond_indices[i] - 1, cond_indices[j] - 1);
    }
    g.cov(i, nc) = freq_cov_(cond_indices[i] - 1, next - 1);
    g.cov(nc, i) = g.cov(i, nc);
  }
  g.cov(nc, nc) = freq_cov_(next - 1, next - 1);
  const ConditionalSpec spec = conditional_last_spec(g);

  // Conditional mean per retained-history node.
  const Eigen::Index old_size = joint_.size();
  Eigen::VectorXd cond_mean = Eigen::VectorXd::Constant(old_size, spec.offset);
  for (int c = 0; c < nc; ++c) {
    const int a = cond_axes[c];
    for (Eigen::Index f = 0; f < old_size; ++f) {
      cond_mean(f) += spec.weights(c) * joint_.node(a, f);
    }
  }

  const Eigen::VectorXd& old_probs = joint_.probs();
  const double mean_bar = old_probs.dot(cond_mean);
  const double mean_sq = old_probs.dot(cond_mean.cwiseProduct(cond_mean));
  const double marg_var =
      spec.variance + std::max(0.0, mean_sq - mean_bar * mean_bar);

  const int points = config_.grid_points;
  Eigen::VectorXd nodes(points);
  const double sigma = std::sqrt(marg_var);
  const double lo = mean_bar - config_.grid_span * sigma;
  const double dx = points > 1 ? 2.0 * config_.grid_span * sigma / (points - 1) : 0.0;
  for (int j = 0; j < points; ++j) nodes(j) = lo + j * dx;

  Eigen::VectorXd ext_probs(old_size * points);
  Eigen::MatrixXd ext_moments(old_size * points, config_.max_moment + 1);
  Eigen::VectorXd logd(points);
  for (Eigen::Index f = 0; f < old_size; ++f) {
    if (spec.variance > 0.0) {
      for (int j = 0; j < points; ++j) {
        const double t = nodes(j) - cond_mean(f);
        logd(j) = -0.5 * t * t / spec.variance;
      }
      const double peak = logd.maxCoeff();
      double wsum = 0.0;
      for (int j = 0; j < points; ++j) {
        logd(j) = std::exp(logd(j) - peak);
        wsum += logd(j);
      }
      for (int j = 0; j < points; ++j) {
        ext_probs(f * points + j) = old_probs(f) * logd(j) / wsum;
      }
    } else {
      Eigen::Index nearest = 0;
      (nodes.array() - cond_mean(f)).abs().minCoeff(&nearest);
      for (int j = 0; j < points; ++j) {
        ext_probs(f * points + j) = j == nearest ? old_probs(f) : 0.0;
      }
    }
    for (int j = 0; j < points; ++j) {
      ext_moments.row(f * points + j) = moments_.row(f);
    }
  }

  std::vector<Eigen::VectorXd> axes = joint_.axes();
  axes.push_back(std::move(nodes));
  joint_ = GridDistribution(std::move(axes), std::move(ext_probs));
  moments_ = std::move(ext_moments);
  extended_ = true;
  updated_ = false;
  moments_advanced_ = false;
}

Eigen::VectorXd ClockBelief::predict_outcomes(const InterrogationAlgorithm& alg) const {
  require_extended("predict_outcomes");
  const int axis = joint_.rank() - 1;
  const Eigen::VectorXd marg = joint_.marginal(axis);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(alg.povm.outcomes());
  for (Eigen::Index j = 0; j < marg.size(); ++j) {
    if (marg(j) == 0.0) continue;
    out += marg(j) *
           outcome_probs(alg.state, alg.povm, joint_.axis(axis)(j), config_.duration);
  }
  return out;
}

double ClockBelief::expected_variance_increase(const InterrogationAlgorithm& alg) const {
  require_extended("expected_variance_increase");
  if (updated_) {
    throw std::logic_error("expected_variance_increase: prior already consumed");
  }
  const int axis = joint_.rank() - 1;
  const Eigen::VectorXd& nodes = joint_.axis(axis);
  const int points = static_cast<int>(nodes.size());
  const int n_out = alg.povm.outcomes();

  Eigen::MatrixXd lik(points, n_out);
  for (int j = 0; j < points; ++j) {
    lik.row(j) =
        outcome_probs(alg.state, alg.povm, nodes(j), config_.duration).transpose();
  }

  const Eigen::VectorXd& probs = joint_.probs();
  const double t = config_.duration;

  double e1_prior = 0.0, e2_prior = 0.0;
  Eigen::VectorXd pa = Eigen::VectorXd::Zero(n_out);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(n_out);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(n_out);
  for (Eigen::Index f = 0; f < joint_.size(); ++f) {
    const double p = probs(f);
    if (p == 0.0) continue;
    const int j = static_cast<int>(f % points);
    const double wt = nodes(j) * t;
    const double m1 = moments_(f, 1);
    const double m2 = moments_(f, 2);
    e1_prior += p * m1;
    e2_prior += p * m2;
    const double phase1 = m1 + wt;
    const double phase2 = m2 + 2.0 * m1 * wt + wt * wt;
    for (int a = 0; a < n_out; ++a) {
      const double q = p * lik(j, a);
      pa(a) += q;
      e1(a) += q * phase1;
      e2(a) += q * phase2;
    }
  }
  const double v_before = std::max(0.0, e2_prior - e1_prior * e1_prior);

  double dv = -v_before;
  for (int a = 0; a < n_out; ++a) {
    if (pa(a) <= 0.0) continue;
    const double mean = e1(a) / pa(a);
    const double var = std::max(0.0, e2(a) / pa(a) - mean * mean);
    dv += pa(a) * var;
  }
  return dv;
}

void ClockBelief::bayes_update(const InterrogationAlgorithm& alg, int outcome) {
  require_extended("bayes_update");
  if (updated_) throw std::logic_error("bayes_update: outcome already applied");
  if (outcome < 0 || outcome >= alg.povm.outcomes()) {
    throw std::invalid_argument("bayes_update: outcome out of range");
  }
  const int axis = joint_.rank() - 1;
  const Eigen::VectorXd& nodes = joint_.axis(axis);
  const int points = static_cast<int>(nodes.size());
  Eigen::VectorXd lik(points);
  for (int j = 0; j < points; ++j) {
    lik(j) = outcome_probs(alg.state, alg.povm, nodes(j), config_.duration)(outcome);
  }
  Eigen::VectorXd& probs = joint_.probs();
  for (Eigen::Index f = 0; f < joint_.size(); ++f) {
    probs(f) *= lik(static_cast<int>(f % points));
  }
  const double norm = probs.sum();
  if (!(norm > 0.0)) {
    throw std::runtime_error(
        "bayes_update: observed outcome has zero probability under the belief "
        "(model/likelihood mismatch)");
  }
  probs /= norm;
  updated_ = true;
}

void ClockBelief::update_moments() {
  require_extended("update_moments");
  if (!updated_) throw std::logic_error("update_moments: no outcome applied yet");
  if (moments_advanced_) throw std::logic_error("update_moments: already advanced");
  const int axis = joint_.rank() - 1;
  const Eigen::VectorXd& nodes = joint_.axis(axis);
  const int points = static_cast<int>(nodes.size());
  const int kmax = config_.max_moment;
  const double t = config_.duration;

  Eigen::VectorXd updated(kmax + 1);
  for (Eigen::Index f = 0; f < joint_.size(); ++f) {
    const double wt = nodes(static_cast<int>(f % points)) * t;
    for (int k = 0; k <= kmax; ++k) {
      double acc = 0.0;
      double power = 1.0;
      for (int i = 0; i <= k; ++i) {
        acc += binom(k, i) * power * moments_(f, k - i);
        power *= wt;
      }
      updated(k) = acc;
    }
    moments_.row(f) = updated;
  }
  moments_advanced_ = true;
}

void ClockBelief::truncate() {
  require_extended("truncate");
  if (!moments_advanced_) {
    throw std::logic_error("truncate: update_moments must run first");
  }
  while (joint_.rank() > config_.memory) {
    const Eigen::Index count = joint_.axis(0).size();
    const Eigen::Index inner = joint_.size() / count;  // axis 0 is slowest
    Eigen::VectorXd new_probs = Eigen::VectorXd::Zero(inner);
    Eigen::MatrixXd new_moments =
        Eigen::MatrixXd::Zero(inner, config_.max_moment + 1);
    const Eigen::VectorXd& probs = joint_.probs();
    for (Eigen::Index k = 0; k < count; ++k) {
      for (Eigen::Index i = 0; i < inner; ++i) {
        const double p = probs(k * inner + i);
        new_probs(i) += p;
        if (p > 0.0) new_moments.row(i) += p * moments_.row(k * inner + i);
      }
    }
    for (Eigen::Index i = 0; i < inner; ++i) {
      if (new_probs(i) > 0.0) {
        new_moments.row(i) /= new_probs(i);
      } else {
        new_moments.row(i).setZero();
        new_moments(i, 0) = 1.0;
      }
    }
    std::vector<Eigen::VectorXd> axes(joint_.axes().begin() + 1,
                                      joint_.axes().end());
    joint_ = GridDistribution(std::move(axes), std::move(new_probs));
    moments_ = std::move(new_moments);
  }
  extended_ = false;
  updated_ = false;
  moments_advanced_ = false;
  ++step_;
}

void ClockBelief::advance(const InterrogationAlgorithm& alg, int outcome) {
  bayes_update(alg, outcome);
  update_moments();
  truncate();
}

PhaseStatistics ClockBelief::phase_statistics() const {
  PhaseStatistics st;
  const Eigen::VectorXd& probs = joint_.probs();
  st.estimate = probs.dot(moments_.col(1));
  const double second = probs.dot(moments_.col(2));
  st.variance = std::max(0.0, second - st.estimate * st.estimate);

  if (extended_ && !updated_) {
    const int axis = joint_.rank() - 1;
    const Eigen::Index points = joint_.axis(axis).size();
    Eigen::VectorXd num = Eigen::VectorXd::Zero(points);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(points);
    for (Eigen::Index f = 0; f < joint_.size(); ++f) {
      const Eigen::Index j = f % points;
      num(j) += probs(f) * moments_(f, 1);
      den(j) += probs(f);
    }
    st.conditional_offsets = Eigen::VectorXd::Zero(points);
    for (Eigen::Index j = 0; j < points; ++j) {
      if (den(j) > 0.0) st.conditional_offsets(j) = num(j) / den(j) - st.estimate;
    }
  }
  return st;
}

Eigen::VectorXd ClockBelief::new_axis_nodes() const {
  require_extended("new_axis_nodes");
  return joint_.axis(joint_.rank() - 1);
}

Eigen::VectorXd ClockBelief::new_axis_marginal() const {
  require_extended("new_axis_marginal");
  return joint_.marginal(joint_.rank() - 1);
}

double ClockBelief::prior_mean() const {
  require_extended("prior_mean");
  return joint_.mean(joint_.rank() - 1);
}

double ClockBelief::frequency_estimate() const {
  if (extended_) throw std::logic_error("frequency_estimate: step in progress");
  if (step_ < 1) throw std::logic_error("frequency_estimate: no interrogations yet");
  return joint_.mean(joint_.rank() - 1);
}

}  // namespace qclock
