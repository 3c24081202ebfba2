#include "qclock/timing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qclock {

double compensating_phase(const CompensationState& comp, double duration,
                          double standard_frequency) {
  const double total = comp.omega_star + standard_frequency;
  if (!(total > 0.0)) {
    throw std::invalid_argument("compensating_phase: omega* + Omega must be > 0");
  }
  return comp.oscillator_phase * comp.omega_star / total -
         comp.omega_star * duration;
}

PhaseError phase_error(double omega, double omega_star, double true_time,
                       double duration, double standard_frequency) {
  const double pi = std::numbers::pi;
  const double total = omega_star + standard_frequency;
  if (!(total > 0.0)) {
    throw std::invalid_argument("phase_error: omega* + Omega must be > 0");
  }
  PhaseError out;
  out.error = (omega_star - omega) *
              ((duration - true_time) + omega_star / total * true_time);
  out.bound = pi * std::abs(duration - true_time) / duration +
              pi * (true_time / duration) * (omega_star / total);
  out.bound_applies = std::abs(omega_star - omega) * duration < pi;
  return out;
}

double reparameterize(double omega, double omega_star, double standard_frequency) {
  const double denom = omega + standard_frequency;
  if (!(denom > 0.0)) {
    throw std::invalid_argument("reparameterize: omega + Omega must be > 0");
  }
  return omega * (omega_star + standard_frequency) / denom;
}

double reparameterize_inverse(double omega_prime, double omega_star,
                              double standard_frequency) {
  const double denom = (omega_star + standard_frequency) - omega_prime;
  if (!(denom > 0.0)) {
    throw std::invalid_argument("reparameterize_inverse: out of range");
  }
  return omega_prime * standard_frequency / denom;
}

PhaseError residual_error(double omega, double omega_star, double phi,
                          double phi_T, double standard_frequency) {
  const double pi = std::numbers::pi;
  const double osc = omega + standard_frequency;
  const double star = omega_star + standard_frequency;
  if (!(osc > 0.0) || !(star > 0.0)) {
    throw std::invalid_argument("residual_error: frequencies out of range");
  }
  PhaseError out;
  out.error = (omega - omega_star) * (phi - phi_T) / osc *
              (standard_frequency / star);
  const double duration = phi_T / star;
  const double ds = (phi - phi_T) / osc;  // s - T for the implemented end point
  out.bound = pi * std::abs(ds) / duration * (standard_frequency / star);
  out.bound_applies = std::abs(omega - omega_star) * duration < pi;
  return out;
}

double sample_true_duration(const TimingConfig& config, double duration,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config.jitter_std_frac);
  double frac = 0.0;
  for (int tries = 0; tries < 64; ++tries) {
    frac = normal(rng);
    if (std::abs(frac) <= 3.0 * config.jitter_std_frac) break;
  }
  frac = std::clamp(frac, -3.0 * config.jitter_std_frac, 3.0 * config.jitter_std_frac);
  return duration * (1.0 + frac);
}

}  // namespace qclock
