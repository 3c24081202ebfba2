#include "qclock/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qclock {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Orthonormal real basis of d x d Hermitian matrices under tr(AB):
// E_ii, then (E_ij + E_ji)/sqrt(2) and i(E_ij - E_ji)/sqrt(2) for i < j.
struct HermBasis {
  explicit HermBasis(int dim) : d(dim) {
    kinds.reserve(d * d);
    rows.reserve(d * d);
    cols.reserve(d * d);
    for (int i = 0; i < d; ++i) {
      kinds.push_back(0);
      rows.push_back(i);
      cols.push_back(i);
    }
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        kinds.push_back(1);
        rows.push_back(i);
        cols.push_back(j);
        kinds.push_back(2);
        rows.push_back(i);
        cols.push_back(j);
      }
    }
  }

  int size() const { return d * d; }

  VectorXd to_vec(const MatrixXcd& m) const {
    VectorXd x(size());
    const double s = std::numbers::sqrt2;
    for (int p = 0; p < size(); ++p) {
      const int i = rows[p];
      const int j = cols[p];
      switch (kinds[p]) {
        case 0: x(p) = m(i, i).real(); break;
        case 1: x(p) = s * m(i, j).real(); break;
        default: x(p) = s * m(i, j).imag(); break;
      }
    }
    return x;
  }

  MatrixXcd to_mat(const VectorXd& x) const {
    MatrixXcd m = MatrixXcd::Zero(d, d);
    const double inv_s = 1.0 / std::numbers::sqrt2;
    for (int p = 0; p < size(); ++p) {
      const int i = rows[p];
      const int j = cols[p];
      switch (kinds[p]) {
        case 0: m(i, i) += x(p); break;
        case 1:
          m(i, j) += x(p) * inv_s;
          m(j, i) += x(p) * inv_s;
          break;
        default:
          m(i, j) += std::complex<double>(0.0, x(p) * inv_s);
          m(j, i) += std::complex<double>(0.0, -x(p) * inv_s);
          break;
      }
    }
    return m;
  }

  int d;
  std::vector<int> kinds, rows, cols;
};

MatrixXcd hermitize(const MatrixXcd& m) { return 0.5 * (m + m.adjoint()); }

double min_eigenvalue(const MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// log det of a Hermitian PD matrix via LLT; returns false if not PD.
bool logdet_pd(const MatrixXcd& m, double* out) {
  Eigen::LLT<MatrixXcd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double piv = l(i, i).real();
    if (!(piv > 0.0)) return false;
    s += std::log(piv);
  }
  *out = 2.0 * s;
  return true;
}

PureState random_state(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = std::complex<double>(normal(rng), normal(rng));
  v /= v.norm();
  return PureState(std::move(v));
}

// Fixes the global phase so the largest-magnitude component is real positive.
PureState canonical_phase(const VectorXcd& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const std::complex<double> z = v(imax);
  const std::complex<double> rot =
      std::abs(z) > 0.0 ? std::conj(z) / std::abs(z) : 1.0;
  return PureState(v * rot);
}

int atoms_for_dim(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index(1) << n) < dim) ++n;
  return n;
}

}  // namespace

CostTable build_cost(const VectorXd& omegas, const VectorXd& priors,
                     const VectorXd& phase_offsets, double duration,
                     const VectorXd& labels) {
  if (omegas.size() != priors.size() || omegas.size() != phase_offsets.size()) {
    throw std::invalid_argument("build_cost: grid size mismatch");
  }
  if (std::abs(priors.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("build_cost: priors must sum to 1");
  }
  CostTable t;
  t.omegas = omegas;
  t.priors = priors;
  t.phase_offsets = phase_offsets;
  t.labels = labels;
  t.duration = duration;
  t.costs.resize(omegas.size(), labels.size());
  for (Eigen::Index j = 0; j < omegas.size(); ++j) {
    const double wt = omegas(j) * duration;
    for (Eigen::Index a = 0; a < labels.size(); ++a) {
      const double diff = wt - labels(a);
      t.costs(j, a) = diff * diff + 2.0 * diff * phase_offsets(j);
    }
  }
  if (!t.costs.allFinite()) throw std::invalid_argument("build_cost: non-finite cost");
  return t;
}

std::vector<MatrixXcd> povm_cost_operators(const CostTable& cost,
                                           const PureState& state) {
  const Eigen::Index d = state.dim();
  const Eigen::Index n_omega = cost.omegas.size();
  MatrixXcd evolved(d, n_omega);
  for (Eigen::Index j = 0; j < n_omega; ++j) {
    evolved.col(j) =
        evolution_phases(state.atoms(), cost.omegas(j) * cost.duration)
            .cwiseProduct(state.amplitudes());
  }
  std::vector<MatrixXcd> ops;
  ops.reserve(cost.labels.size());
  for (Eigen::Index a = 0; a < cost.labels.size(); ++a) {
    const VectorXd w = cost.priors.cwiseProduct(cost.costs.col(a));
    ops.push_back(hermitize(evolved * w.asDiagonal() * evolved.adjoint()));
  }
  return ops;
}

MatrixXcd state_cost_operator(const CostTable& cost, const Povm& povm) {
  const Eigen::Index d = povm.dim();
  const int atoms = atoms_for_dim(d);
  MatrixXcd s = MatrixXcd::Zero(d, d);
  MatrixXcd q(d, d);
  for (Eigen::Index j = 0; j < cost.omegas.size(); ++j) {
    q.setZero();
    for (int a = 0; a < povm.outcomes(); ++a) {
      q += cost.costs(j, a) * povm.elements[a];
    }
    const VectorXcd u = evolution_phases(atoms, cost.omegas(j) * cost.duration);
    s += cost.priors(j) * (u.conjugate().asDiagonal() * q * u.asDiagonal());
  }
  return hermitize(s);
}

double expected_cost(const InterrogationAlgorithm& alg, const CostTable& cost) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < cost.omegas.size(); ++j) {
    const VectorXd probs =
        outcome_probs(alg.state, alg.povm, cost.omegas(j), cost.duration);
    total += cost.priors(j) * cost.costs.row(j).dot(probs.transpose());
  }
  return total;
}

Povm optimal_povm(const std::vector<MatrixXcd>& cost_operators,
                  PovmCertificate* certificate, const PovmSolverOptions& options) {
  const int n = static_cast<int>(cost_operators.size());
  if (n == 0) throw std::invalid_argument("optimal_povm: no cost operators");
  const Eigen::Index d = cost_operators.front().rows();

  std::vector<MatrixXcd> r(n);
  double scale = 1e-12;
  for (int a = 0; a < n; ++a) {
    r[a] = hermitize(cost_operators[a]);
    scale = std::max(scale, r[a].cwiseAbs().maxCoeff());
  }

  Povm povm;
  if (n == 1) {
    povm.elements = {MatrixXcd::Identity(d, d)};
    if (certificate) {
      certificate->hermiticity_residual = 0.0;
      certificate->min_slack = 0.0;
      certificate->duality_gap = 0.0;
      certificate->converged = true;
    }
    return povm;
  }

  const HermBasis basis(static_cast<int>(d));

  // Strictly feasible dual start Y = (min_a lambda_min(R_a) - margin) * I.
  double lo = std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) lo = std::min(lo, min_eigenvalue(r[a]));
  MatrixXcd y = (lo - 0.1 * scale - 1e-12) * MatrixXcd::Identity(d, d);

  double primal0 = 0.0;
  for (int a = 0; a < n; ++a) primal0 += r[a].trace().real() / n;
  double mu = std::max((primal0 - y.trace().real()) / (n * d), 1e-6 * scale);

  std::vector<MatrixXcd> slack_inv(n, MatrixXcd(d, d));
  Eigen::MatrixXd hess(basis.size(), basis.size());
  const MatrixXcd eye = MatrixXcd::Identity(d, d);

  auto barrier_value = [&](const MatrixXcd& yy, double* out) {
    double total = yy.trace().real();
    for (int a = 0; a < n; ++a) {
      double ld;
      if (!logdet_pd(r[a] - yy, &ld)) return false;
      total += mu * ld;
    }
    *out = total;
    return true;
  };

  bool converged = false;
  for (int outer = 0; outer < options.max_outer; ++outer) {
    for (int it = 0; it < options.max_newton; ++it) {
      MatrixXcd grad_mat = eye;
      for (int a = 0; a < n; ++a) {
        Eigen::LLT<MatrixXcd> llt(r[a] - y);
        if (llt.info() != Eigen::Success) {
          throw std::runtime_error("optimal_povm: interior point left the cone");
        }
        slack_inv[a] = llt.solve(eye);
        grad_mat -= mu * slack_inv[a];
      }
      const VectorXd grad = basis.to_vec(hermitize(grad_mat));

      // Hessian H[p][q] = mu * sum_a tr(B_p S_a B_q S_a) assembled from
      // outer products of columns of the (Hermitian) S_a.
      hess.setZero();
      const double s2 = std::numbers::sqrt2;
      for (int a = 0; a < n; ++a) {
        const MatrixXcd& s = slack_inv[a];
        for (int q = 0; q < basis.size(); ++q) {
          const int i = basis.rows[q];
          const int j = basis.cols[q];
          MatrixXcd m;
          switch (basis.kinds[q]) {
            case 0: m = s.col(i) * s.row(i); break;
            case 1:
              m = (s.col(i) * s.row(j) + s.col(j) * s.row(i)) / s2;
              break;
            default:
              m = std::complex<double>(0.0, 1.0) *
                  (s.col(i) * s.row(j) - s.col(j) * s.row(i)) / s2;
              break;
          }
          for (int p = 0; p < basis.size(); ++p) {
            const int k = basis.rows[p];
            const int l = basis.cols[p];
            double v;
            switch (basis.kinds[p]) {
              case 0: v = m(k, k).real(); break;
              case 1: v = s2 * m(k, l).real(); break;
              default: v = s2 * m(k, l).imag(); break;
            }
            hess(p, q) += mu * v;
          }
        }
      }
      hess = 0.5 * (hess + hess.transpose()).eval();
      Eigen::LDLT<Eigen::MatrixXd> hltd(hess);
      VectorXd step = hltd.solve(grad);
      if (!step.allFinite()) {
        hess.diagonal().array() += 1e-12 * hess.trace() + 1e-300;
        step = Eigen::LDLT<Eigen::MatrixXd>(hess).solve(grad);
      }
      const double dec2 = grad.dot(step);
      if (dec2 <= 2e-13 * (1.0 + std::abs(y.trace().real()))) break;

      const MatrixXcd dir = basis.to_mat(step);
      double f0;
      if (!barrier_value(y, &f0)) {
        throw std::runtime_error("optimal_povm: infeasible iterate");
      }
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        double f1;
        if (barrier_value(y + t * dir, &f1) && f1 >= f0 + 0.25 * t * dec2) {
          y += t * dir;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
    if (mu * n * d <= options.gap_tol * scale) {
      converged = true;
      break;
    }
    mu *= options.mu_shrink;
  }

  // Primal recovery from the central point: P_a = mu * (R_a - Y)^-1, then an
  // exact completeness correction P_a -> M^-1/2 P_a M^-1/2 with M = sum P_a.
  std::vector<MatrixXcd> p(n);
  MatrixXcd total = MatrixXcd::Zero(d, d);
  for (int a = 0; a < n; ++a) {
    Eigen::LLT<MatrixXcd> llt(r[a] - y);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("optimal_povm: final iterate infeasible");
    }
    p[a] = mu * hermitize(llt.solve(eye));
    total += p[a];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(total);
  const VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const MatrixXcd corr =
      es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
  for (int a = 0; a < n; ++a) p[a] = hermitize(corr * p[a] * corr);

  povm.elements = std::move(p);

  if (certificate) {
    MatrixXcd yc = MatrixXcd::Zero(d, d);
    double primal = 0.0;
    for (int a = 0; a < n; ++a) {
      yc += povm.elements[a] * r[a];
      primal += (povm.elements[a] * r[a]).trace().real();
    }
    certificate->hermiticity_residual = (yc - yc.adjoint()).cwiseAbs().maxCoeff();
    const MatrixXcd yh = hermitize(yc);
    double slack = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) slack = std::min(slack, min_eigenvalue(r[a] - yh));
    certificate->min_slack = slack;
    certificate->duality_gap = primal - y.trace().real();
    certificate->converged = converged;
  }
  return povm;
}

Povm optimal_povm_for_state(const PureState& state, const CostTable& cost,
                            int n_outcomes, PovmCertificate* certificate,
                            const PovmSolverOptions& options) {
  if (n_outcomes < 2) throw std::invalid_argument("optimal_povm_for_state: n_outcomes >= 2");
  if (n_outcomes != cost.labels.size()) {
    throw std::invalid_argument("optimal_povm_for_state: n_outcomes != labels");
  }
  return optimal_povm(povm_cost_operators(cost, state), certificate, options);
}

std::pair<PureState, double> optimal_state_for_povm(const Povm& povm,
                                                    const CostTable& cost) {
  const MatrixXcd op = state_cost_operator(cost, povm);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(op);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("optimal_state_for_povm: eigensolver failed");
  }
  return {canonical_phase(es.eigenvectors().col(0)), es.eigenvalues()(0)};
}

namespace {

struct SeesawRun {
  InterrogationAlgorithm algorithm;
  double objective;
  PovmCertificate certificate;
  std::vector<double> trace;
};

SeesawRun seesaw_from_state(PureState state, const CostTable& cost,
                            const SeesawOptions& options) {
  const double scale = std::max(cost.costs.cwiseAbs().maxCoeff(), 1e-12);
  const double slack = 1e-7 * scale + 1e-12;
  const int n_out = static_cast<int>(cost.labels.size());

  SeesawRun run{InterrogationAlgorithm{state, Povm{}, cost.labels},
                std::numeric_limits<double>::infinity(),
                PovmCertificate{},
                {}};
  double prev = std::numeric_limits<double>::infinity();
  Povm povm;
  for (int it = 0; it < options.max_iters; ++it) {
    PovmCertificate cert;
    povm = optimal_povm(povm_cost_operators(cost, state), &cert, options.povm);
    auto [next_state, obj] = optimal_state_for_povm(povm, cost);
    if (obj > prev + slack) {
      std::ostringstream os;
      os << "seesaw: objective increased from " << prev << " to " << obj;
      throw std::logic_error(os.str());
    }
    state = next_state;
    run.trace.push_back(obj);
    if (prev - obj < options.tol * (1.0 + scale)) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  // Final POVM refresh against the final state so the certificate matches the
  // returned algorithm.
  PovmCertificate cert;
  const auto ops = povm_cost_operators(cost, state);
  povm = optimal_povm(ops, &cert, options.povm);
  double final_obj = 0.0;
  for (int a = 0; a < n_out; ++a) {
    final_obj += (povm.elements[a] * ops[a]).trace().real();
  }
  if (final_obj > prev + slack) {
    throw std::logic_error("seesaw: final POVM step increased the objective");
  }
  run.algorithm = InterrogationAlgorithm{state, std::move(povm), cost.labels};
  run.objective = final_obj;
  run.certificate = cert;
  run.trace.push_back(final_obj);
  return run;
}

}  // namespace

SdpSolution seesaw(const CostTable& cost, const SeesawOptions& options,
                   const InterrogationAlgorithm* warm_start) {
  if (cost.labels.size() < 2) {
    throw std::invalid_argument("seesaw: need at least two outcomes");
  }
  std::vector<PureState> starts;
  if (warm_start) starts.push_back(warm_start->state);
  std::mt19937_64 rng(options.seed);
  const int dim = warm_start ? static_cast<int>(warm_start->state.dim())
                             : (1 << options.atoms);
  for (int s = 0; s < options.starts; ++s) starts.push_back(random_state(dim, rng));
  if (starts.empty()) throw std::invalid_argument("seesaw: no starting states");

  SdpSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    SeesawRun run = seesaw_from_state(start, cost, options);
    if (run.objective < best.objective) {
      best.algorithm = run.algorithm;
      best.objective = run.objective;
      best.certificate = run.certificate;
      best.trace = run.trace;
    }
  }
  return best;
}

Eigen::VectorXd refined_labels(const InterrogationAlgorithm& alg,
                               const CostTable& cost) {
  const Eigen::Index n_out = alg.labels.size();
  VectorXd mass = VectorXd::Zero(n_out);
  VectorXd weighted = VectorXd::Zero(n_out);
  for (Eigen::Index j = 0; j < cost.omegas.size(); ++j) {
    const VectorXd probs =
        outcome_probs(alg.state, alg.povm, cost.omegas(j), cost.duration);
    const double target = cost.omegas(j) * cost.duration + cost.phase_offsets(j);
    mass += cost.priors(j) * probs;
    weighted += cost.priors(j) * target * probs;
  }
  VectorXd labels = alg.labels;
  for (Eigen::Index a = 0; a < n_out; ++a) {
    if (mass(a) > 1e-12) labels(a) = weighted(a) / mass(a);
  }
  return labels;
}

SdpSolution refine_g(const SdpSolution& solution, const CostTable& cost,
                     const SeesawOptions& options) {
  const VectorXd labels = refined_labels(solution.algorithm, cost);
  const CostTable refined = build_cost(cost.omegas, cost.priors,
                                       cost.phase_offsets, cost.duration, labels);
  SeesawOptions warm_only = options;
  warm_only.starts = 0;
  SdpSolution out = seesaw(refined, warm_only, &solution.algorithm);
  const double scale = std::max(cost.costs.cwiseAbs().maxCoeff(), 1e-12);
  if (out.objective > solution.objective + 1e-7 * scale + 1e-9) {
    throw std::logic_error("refine_g: refinement increased the objective");
  }
  return out;
}

SdpSolution optimize_interrogation(const VectorXd& omegas, const VectorXd& priors,
                                   const VectorXd& phase_offsets, double duration,
                                   const SeesawOptions& options,
                                   const InterrogationAlgorithm* warm_start) {
  const Eigen::Index p = omegas.size();
  const int n_out = options.n_outcomes > 0 ? options.n_outcomes
                                           : static_cast<int>(p);
  VectorXd labels(n_out);
  if (n_out == static_cast<int>(p)) {
    labels = omegas * duration;
  } else {
    const double lo = omegas.minCoeff() * duration;
    const double hi = omegas.maxCoeff() * duration;
    for (int a = 0; a < n_out; ++a) {
      labels(a) = n_out == 1 ? 0.5 * (lo + hi)
                             : lo + (hi - lo) * a / double(n_out - 1);
    }
  }
  const CostTable base =
      build_cost(omegas, priors, phase_offsets, duration, labels);

  struct Branch {
    SdpSolution solution;
    CostTable table;
  };
  std::vector<Branch> branches;

  const int atoms = warm_start ? warm_start->state.atoms() : options.atoms;

  if (warm_start) {
    SeesawOptions warm_only = options;
    warm_only.starts = 0;
    branches.push_back({seesaw(base, warm_only, warm_start), base});
  }

  if (options.ramsey_anchor && n_out >= atoms + 1 && n_out >= 2) {
    // Best-phase Ramsey with its own posterior-mean labels; starting the
    // seesaw from its state guarantees the final objective does not exceed
    // the best Ramsey variance increase.
    const double pi = std::numbers::pi;
    const double center = priors.dot(omegas) * duration;
    double best_value = std::numeric_limits<double>::infinity();
    VectorXd best_labels;
    PureState ramsey_state = ramsey_algorithm(atoms, 0.0).state;
    for (int k = 0; k < 64; ++k) {
      const double phase = center - pi + 2.0 * pi * k / 64.0;
      InterrogationAlgorithm alg = ramsey_algorithm(atoms, phase);
      alg.labels = VectorXd::Zero(atoms + 1);
      const CostTable probe =
          build_cost(omegas, priors, phase_offsets, duration, alg.labels);
      alg.labels = refined_labels(alg, probe);
      const CostTable tuned =
          build_cost(omegas, priors, phase_offsets, duration, alg.labels);
      const double value = expected_cost(alg, tuned);
      if (value < best_value) {
        best_value = value;
        best_labels = alg.labels;
      }
    }
    VectorXd padded = labels;
    padded.head(best_labels.size()) = best_labels;
    const CostTable anchored =
        build_cost(omegas, priors, phase_offsets, duration, padded);
    SeesawOptions anchor_opts = options;
    anchor_opts.starts = 0;
    InterrogationAlgorithm seed{ramsey_state, Povm{}, padded};
    branches.push_back({seesaw(anchored, anchor_opts, &seed), anchored});
  }

  if (options.starts > 0) {
    branches.push_back({seesaw(base, options, nullptr), base});
  }
  if (branches.empty()) {
    throw std::invalid_argument("optimize_interrogation: no branches configured");
  }

  std::size_t winner = 0;
  for (std::size_t b = 1; b < branches.size(); ++b) {
    if (branches[b].solution.objective < branches[winner].solution.objective) {
      winner = b;
    }
  }

  // Refine the winner's labels to a fixed point; at the fixed point the
  // objective equals the expected posterior variance increase.
  SdpSolution current = branches[winner].solution;
  CostTable table = branches[winner].table;
  const double scale = std::max(base.costs.cwiseAbs().maxCoeff(), 1e-12);
  for (int round = 0; round < options.refine_rounds; ++round) {
    SdpSolution next = refine_g(current, table, options);
    table = build_cost(omegas, priors, phase_offsets, duration,
                       next.algorithm.labels);
    const double gain = current.objective - next.objective;
    current = std::move(next);
    if (gain < std::max(options.tol, 1e-12 * scale)) break;
  }
  return current;
}

}  // namespace qclock
