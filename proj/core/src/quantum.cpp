#include "qclock/quantum.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace qclock {

using namespace std::complex_literals;

namespace {

int atoms_from_dim(Eigen::Index dim) {
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw std::invalid_argument("PureState: dimension must be 2^N, N >= 1");
  }
  return std::countr_zero(static_cast<unsigned long long>(dim));
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

PureState::PureState(Eigen::VectorXcd amplitudes) : amps_(std::move(amplitudes)) {
  atoms_ = atoms_from_dim(amps_.size());
  const double norm = amps_.norm();
  if (std::abs(norm - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "PureState: norm " << norm << " violates unit-norm invariant";
    throw std::invalid_argument(os.str());
  }
  amps_ /= norm;
}

PureState PureState::ground(int atoms) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(Eigen::Index(1) << atoms);
  v(0) = 1.0;
  return PureState(std::move(v));
}

void Povm::validate(double tol) const {
  if (elements.empty()) throw std::invalid_argument("Povm: no elements");
  const Eigen::Index d = elements.front().rows();
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& p : elements) {
    if (p.rows() != d || p.cols() != d) {
      throw std::invalid_argument("Povm: element dimension mismatch");
    }
    if ((p - p.adjoint()).cwiseAbs().maxCoeff() > tol) {
      throw std::invalid_argument("Povm: element not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(p, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) {
      std::ostringstream os;
      os << "Povm: element has eigenvalue " << es.eigenvalues().minCoeff();
      throw std::invalid_argument(os.str());
    }
    sum += p;
  }
  const double resid =
      (sum - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff();
  if (resid > tol) {
    std::ostringstream os;
    os << "Povm: completeness residual " << resid;
    throw std::invalid_argument(os.str());
  }
}

Eigen::VectorXcd evolution_phases(int atoms, double phi) {
  const Eigen::Index dim = Eigen::Index(1) << atoms;
  Eigen::VectorXcd phases(dim);
  const double half_n = 0.5 * atoms;
  for (Eigen::Index b = 0; b < dim; ++b) {
    const int w = std::popcount(static_cast<unsigned long long>(b));
    phases(b) = std::exp(1i * (phi * (w - half_n)));
  }
  return phases;
}

PureState free_evolution(const PureState& psi, double omega, double duration) {
  const Eigen::VectorXcd phases = evolution_phases(psi.atoms(), omega * duration);
  return PureState(phases.cwiseProduct(psi.amplitudes()));
}

Eigen::VectorXd outcome_probs_at_phase(const PureState& state, const Povm& povm,
                                       double rotation_phase) {
  const Eigen::VectorXcd evolved =
      evolution_phases(state.atoms(), rotation_phase).cwiseProduct(state.amplitudes());
  Eigen::VectorXd probs(povm.outcomes());
  for (int a = 0; a < povm.outcomes(); ++a) {
    const double p = std::real(evolved.dot(povm.elements[a] * evolved));
    probs(a) = p < 0.0 ? 0.0 : p;
  }
  const double sum = probs.sum();
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "outcome_probs: total probability " << sum;
    throw std::runtime_error(os.str());
  }
  return probs;
}

Eigen::VectorXd outcome_probs(const PureState& state, const Povm& povm,
                              double omega, double duration) {
  return outcome_probs_at_phase(state, povm, omega * duration);
}

Eigen::VectorXd outcome_probs(const InterrogationAlgorithm& alg, double omega,
                              double duration) {
  return outcome_probs_at_phase(alg.state, alg.povm, omega * duration);
}

Povm rotate_povm(const Povm& povm, double phase) {
  const int atoms = atoms_from_dim(povm.dim());
  const Eigen::VectorXcd u = evolution_phases(atoms, phase);
  Povm out;
  out.elements.reserve(povm.elements.size());
  for (const auto& p : povm.elements) {
    out.elements.push_back(u.asDiagonal() * p * u.conjugate().asDiagonal());
  }
  return out;
}

InterrogationAlgorithm ramsey_algorithm(int atoms, double phase) {
  if (atoms < 1) throw std::invalid_argument("ramsey_algorithm: atoms >= 1");
  const Eigen::Index dim = Eigen::Index(1) << atoms;

  Eigen::VectorXcd amps(dim);
  const double scale = std::pow(2.0, -0.5 * atoms);
  for (Eigen::Index b = 0; b < dim; ++b) {
    const int w = std::popcount(static_cast<unsigned long long>(b));
    amps(b) = scale * std::pow(-1i, w);
  }

  // Per-atom projectors onto (|0> + e^{i phase}|1>)/sqrt(2) and its complement.
  Eigen::Vector2cd plus, minus;
  plus << 1.0 / std::sqrt(2.0), std::exp(1i * phase) / std::sqrt(2.0);
  minus << 1.0 / std::sqrt(2.0), -std::exp(1i * phase) / std::sqrt(2.0);

  Povm povm;
  povm.elements.assign(atoms + 1, Eigen::MatrixXcd::Zero(dim, dim));
  for (Eigen::Index pattern = 0; pattern < dim; ++pattern) {
    Eigen::VectorXcd v(1);
    v << 1.0;
    int plus_count = 0;
    for (int atom = 0; atom < atoms; ++atom) {
      const bool is_plus = (pattern >> atom) & 1;
      const Eigen::Vector2cd& single = is_plus ? plus : minus;
      if (is_plus) ++plus_count;
      Eigen::VectorXcd next(v.size() * 2);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        next(i) = v(i) * single(0);
        next(i + v.size()) = v(i) * single(1);
      }
      v = std::move(next);
    }
    povm.elements[plus_count] += v * v.adjoint();
  }

  return InterrogationAlgorithm{PureState(std::move(amps)), std::move(povm),
                                Eigen::VectorXd::Zero(atoms + 1)};
}

InterrogationAlgorithm buzek_algorithm(int atoms, int outcomes) {
  if (atoms < 1) throw std::invalid_argument("buzek_algorithm: atoms >= 1");
  if (outcomes < atoms + 1) {
    throw std::invalid_argument("buzek_algorithm: outcomes must be >= atoms + 1");
  }
  const Eigen::Index dim = Eigen::Index(1) << atoms;
  const double pi = std::numbers::pi;

  // Symmetric-subspace basis vectors |sym_w>.
  std::vector<Eigen::VectorXcd> sym(atoms + 1,
                                    Eigen::VectorXcd::Zero(dim));
  for (Eigen::Index b = 0; b < dim; ++b) {
    const int w = std::popcount(static_cast<unsigned long long>(b));
    sym[w](b) = 1.0;
  }
  for (int w = 0; w <= atoms; ++w) sym[w] /= std::sqrt(binomial(atoms, w));

  // Sine state: optimal for a flat phase prior.
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(dim);
  for (int w = 0; w <= atoms; ++w) {
    const double c =
        std::sqrt(2.0 / (atoms + 2.0)) * std::sin((w + 1) * pi / (atoms + 2.0));
    amps += c * sym[w];
  }

  // Discretized covariant phase measurement; the symmetric-subspace
  // complement is spread uniformly so the POVM is complete on the full space.
  Eigen::MatrixXcd sym_proj = Eigen::MatrixXcd::Zero(dim, dim);
  for (int w = 0; w <= atoms; ++w) sym_proj += sym[w] * sym[w].adjoint();
  const Eigen::MatrixXcd rest =
      (Eigen::MatrixXcd::Identity(dim, dim) - sym_proj) / double(outcomes);

  Povm povm;
  Eigen::VectorXd labels(outcomes);
  for (int a = 0; a < outcomes; ++a) {
    const double theta = -pi + 2.0 * pi * (a + 0.5) / outcomes;
    labels(a) = theta;
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim);
    for (int w = 0; w <= atoms; ++w) e += std::exp(1i * (theta * w)) * sym[w];
    povm.elements.push_back(e * e.adjoint() / double(outcomes) + rest);
  }

  return InterrogationAlgorithm{PureState(std::move(amps)), std::move(povm),
                                std::move(labels)};
}

}  // namespace qclock
