#include "qclock/noise.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qclock {

namespace {

bool supported_alpha(double alpha) {
  return alpha > -3.0 && alpha < -1.0 ? true : alpha == -1.0;
}

// Double antiderivatives G with G''(u) = kernel shape, so that the rectangle
// integral of a stationary kernel f(s - s') reduces to
// G(b-c) + G(a-d) - G(a-c) - G(b-d).
double g_abs_cubed(double u) {
  const double x = std::abs(u);
  return x * x * x / 6.0;
}

double g_log(double u) {
  if (u == 0.0) return 0.0;
  const double x = std::abs(u);
  return x * x * (0.5 * std::log(x) - 0.75);
}

double g_power(double u, double p) {
  const double x = std::abs(u);
  return std::pow(x, p + 2.0) / ((p + 1.0) * (p + 2.0));
}

struct OverlapPiece {
  double lo, hi;      // u range with linear overlap weight
  double w0, slope;   // overlap length = w0 + slope * u on the piece
};

// Length of the overlap of [a,b] and [c+u, d+u] as a function of u; piecewise
// linear with breakpoints where the clamping switches.
std::vector<OverlapPiece> overlap_pieces(double a, double b, double c, double d) {
  std::vector<double> cuts = {a - d, a - c, b - d, b - c, 0.0};
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double lo = a - d;
  const double hi = b - c;
  std::vector<OverlapPiece> pieces;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double x0 = std::max(cuts[i], lo);
    const double x1 = std::min(cuts[i + 1], hi);
    if (x1 <= x0) continue;
    const double mid = 0.5 * (x0 + x1);
    auto overlap = [&](double u) {
      return std::max(0.0, std::min(b, d + u) - std::max(a, c + u));
    };
    const double f0 = overlap(x0);
    const double f1 = overlap(x1);
    const double slope = (f1 - f0) / (x1 - x0);
    const double w0 = overlap(mid) - slope * mid;
    pieces.push_back({x0, x1, w0, slope});
  }
  return pieces;
}

struct AdaptiveState {
  double abs_tol;
  int max_depth;
  double achieved = 0.0;
  bool converged = true;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth, AdaptiveState& st) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double err = (left + right - whole) / 15.0;
  if (depth >= st.max_depth) {
    st.achieved += std::abs(err);
    if (std::abs(err) > tol) st.converged = false;
    return left + right + err;
  }
  if (std::abs(err) <= tol) {
    st.achieved += std::abs(err);
    return left + right + err;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, st) +
         adaptive_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth + 1, st);
}

double integrate_piece(const std::function<double(double)>& f, double a,
                       double b, double tol, AdaptiveState& st) {
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = simpson(a, b, fa, fm, fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 0, st);
}

// Exact integral of kernel(u) * (w0 + slope*u) over [0, delta] for the two
// kernel families; used to peel the u = 0 endpoint where the log kernel is
// singular and the power kernel has unbounded derivatives.
double singular_patch(const NoiseModel& model, double w0, double slope,
                      double delta) {
  if (delta <= 0.0) return 0.0;
  if (model.alpha() == -1.0) {
    const double lg = std::log(delta);
    const double c0 = w0 * delta * (lg - 1.0);
    const double c1 = slope * delta * delta * (0.5 * lg - 0.25);
    return -2.0 * model.amplitude() * (c0 + c1);
  }
  const double p = -model.alpha() - 1.0;
  const double c0 = w0 * std::pow(delta, p + 1.0) / (p + 1.0);
  const double c1 = slope * std::pow(delta, p + 2.0) / (p + 2.0);
  return -0.5 * model.amplitude() * (c0 + c1);
}

}  // namespace

NoiseModel::NoiseModel(double alpha, double amplitude)
    : alpha_(alpha), h_(amplitude) {
  if (!(h_ > 0.0)) throw std::invalid_argument("NoiseModel: amplitude must be > 0");
  if (!supported_alpha(alpha_)) {
    std::ostringstream os;
    os << "NoiseModel: unsupported exponent alpha = " << alpha_
       << " (supported: -2, -1, and alpha in (-3,-1))";
    throw std::invalid_argument(os.str());
  }
}

double NoiseModel::point_kernel(double dt) const {
  if (!(dt > 0.0)) {
    throw std::invalid_argument(
        "point_kernel: dt must be > 0 (the kernel is a generalized function)");
  }
  if (alpha_ == -1.0) return -2.0 * h_ * std::log(dt);
  return -0.5 * h_ * std::pow(dt, -alpha_ - 1.0);
}

IntervalGrid::IntervalGrid(std::vector<double> boundaries)
    : boundaries_(std::move(boundaries)) {
  if (boundaries_.size() < 3) {
    throw std::invalid_argument(
        "IntervalGrid: need at least the reference interval and one interrogation");
  }
  for (std::size_t i = 0; i + 1 < boundaries_.size(); ++i) {
    if (!(boundaries_[i + 1] > boundaries_[i])) {
      throw std::invalid_argument("IntervalGrid: boundaries must strictly increase");
    }
  }
}

IntervalGrid IntervalGrid::uniform(double duration, int interrogations) {
  if (!(duration > 0.0) || interrogations < 1) {
    throw std::invalid_argument("IntervalGrid::uniform: bad arguments");
  }
  std::vector<double> b(interrogations + 2);
  for (int i = 0; i < interrogations + 2; ++i) b[i] = i * duration;
  return IntervalGrid(std::move(b));
}

double avg_cov(const NoiseModel& model, double a, double b, double c, double d) {
  if (!(b > a) || !(d > c)) {
    throw std::invalid_argument("avg_cov: intervals must have positive length");
  }
  const double tk = b - a;
  const double tl = d - c;
  if (model.alpha() == -2.0) {
    const double g = g_abs_cubed(b - c) + g_abs_cubed(a - d) - g_abs_cubed(a - c) -
                     g_abs_cubed(b - d);
    return -0.5 * model.amplitude() * g / (tk * tl);
  }
  if (model.alpha() == -1.0) {
    const double g = g_log(b - c) + g_log(a - d) - g_log(a - c) - g_log(b - d);
    return -2.0 * model.amplitude() * g / (tk * tl);
  }
  return avg_cov_quadrature(model, a, b, c, d);
}

double avg_cov_quadrature(const NoiseModel& model, double a, double b, double c,
                          double d, const QuadratureOptions& options) {
  if (!(b > a) || !(d > c)) {
    throw std::invalid_argument("avg_cov_quadrature: intervals must have positive length");
  }
  const double tk = b - a;
  const double tl = d - c;

  // Reduce the rectangle integral of the stationary kernel to a 1-D integral
  // against the interval-overlap weight: int f(|u|) * overlap(u) du.
  auto pieces = overlap_pieces(a, b, c, d);

  // Rough magnitude estimate to convert the relative tolerance into an
  // absolute one shared across pieces.
  double rough = 0.0;
  for (const auto& p : pieces) {
    const double mid = 0.5 * (p.lo + p.hi);
    const double w = p.w0 + p.slope * mid;
    if (std::abs(mid) > 0.0) rough += std::abs(model.point_kernel(std::abs(mid)) * w * (p.hi - p.lo));
  }
  rough = std::max(rough, model.amplitude() * tk * tl * 1e-6);

  AdaptiveState st{options.rel_tol * rough / 4.0, options.max_depth};
  auto integrand = [&](double u) {
    const double x = std::abs(u);
    if (x == 0.0) return 0.0;  // measure-zero; pieces touching 0 are patched
    double w = 0.0;
    for (const auto& p : pieces) {
      if (u >= p.lo && u <= p.hi) {
        w = p.w0 + p.slope * u;
        break;
      }
    }
    return model.point_kernel(x) * w;
  };

  double total = 0.0;
  for (const auto& p : pieces) {
    double lo = p.lo;
    double hi = p.hi;
    // Peel a patch around u = 0 and integrate it in closed form against the
    // linear overlap weight.
    if (lo == 0.0 || hi == 0.0) {
      const double len = hi - lo;
      const double delta = std::min(0.125 * len, 1e-3 * (tk + tl));
      if (delta > 0.0) {
        if (lo == 0.0) {
          total += singular_patch(model, p.w0, p.slope, delta);
          lo += delta;
        } else {
          // mirror u -> -u: weight becomes w0 - slope*u
          total += singular_patch(model, p.w0, -p.slope, delta);
          hi -= delta;
        }
      }
    }
    if (hi > lo) {
      total += integrate_piece(integrand, lo, hi, st.abs_tol, st);
    }
  }

  if (!st.converged) {
    std::ostringstream os;
    os << "avg_cov_quadrature: failed to reach rel_tol " << options.rel_tol
       << ", achieved absolute error estimate " << st.achieved;
    throw std::runtime_error(os.str());
  }
  return total / (tk * tl);
}

DiffCovariance diff_cov_matrix(const NoiseModel& model, const IntervalGrid& grid) {
  const int n = grid.interrogations();
  if (n < 1) throw std::invalid_argument("diff_cov_matrix: need n >= 1 interrogations");

  auto pair_cov = [&](int k, int l) {
    return avg_cov(model, grid.start(k), grid.stop(k), grid.start(l), grid.stop(l));
  };

  Eigen::MatrixXd interval_cov(n + 1, n + 1);
  for (int k = 0; k <= n; ++k) {
    for (int l = k; l <= n; ++l) {
      const double v = pair_cov(k, l);
      interval_cov(k, l) = v;
      interval_cov(l, k) = v;
    }
  }

  Eigen::MatrixXd c(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const double v = interval_cov(i, j) - interval_cov(i, 0) -
                       interval_cov(0, j) + interval_cov(0, 0);
      c(i - 1, j - 1) = v;
      c(j - 1, i - 1) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  const double norm = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  if (min_eig < -1e-9 * norm) {
    std::ostringstream os;
    os << "diff_cov_matrix: covariance not PSD, min eigenvalue " << min_eig
       << " vs norm " << norm << " (unsupported alpha or quadrature failure)";
    throw std::runtime_error(os.str());
  }
  return DiffCovariance{std::move(c)};
}

TrajectorySampler::TrajectorySampler(const DiffCovariance& cov) {
  const Eigen::MatrixXd& c = cov.matrix;
  if (c.rows() != c.cols()) throw std::invalid_argument("TrajectorySampler: square matrix required");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("TrajectorySampler: eigendecomposition failed");
  }
  const double norm = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  if (es.eigenvalues().minCoeff() < -1e-9 * norm) {
    throw std::runtime_error("TrajectorySampler: covariance not PSD within tolerance");
  }
  Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  transform_ = es.eigenvectors() * clipped.asDiagonal();
}

Eigen::VectorXd TrajectorySampler::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(transform_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return transform_ * z;
}

Eigen::VectorXd sample_trajectory(const DiffCovariance& cov, std::uint64_t seed) {
  return TrajectorySampler(cov).sample(seed);
}

}  // namespace qclock
