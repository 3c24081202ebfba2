#pragma once

#include <cstdint>

namespace qclock {

/// Timing-error model: the true interrogation duration s fluctuates around
/// the intended duration T, and preparation/measurement take a finite window.
struct TimingConfig {
  double standard_frequency = 0.0;  // Omega (rad/s), > 0
  double jitter_std_frac = 1e-3;    // std of (s - T)/T, truncated at +-3 sigma
  double prep_measure_window = 0.0; // Delta T (s)
};

/// omega_star is the current best estimate of the frequency deviation and
/// oscillator_phase the external oscillator phase accumulated since the
/// interrogation started, phi = (omega + Omega) * s.
struct CompensationState {
  double omega_star = 0.0;
  double oscillator_phase = 0.0;
};

/// Measurement-phase correction phi*w*/(w*+Omega) - w*T that simulates an
/// oscillator locked at offset -w* while the real one free-runs.
double compensating_phase(const CompensationState& comp, double duration,
                          double standard_frequency);

struct PhaseError {
  double error = 0.0;   // exact epsilon (rad)
  double bound = 0.0;
  bool bound_applies = false;  // requires |w* - w| T < pi
};

/// Phase error of the compensated measurement at true time s, with the bound
/// E1 = pi |T-s|/T + pi (s/T) w*/(w*+Omega).
PhaseError phase_error(double omega, double omega_star, double true_time,
                       double duration, double standard_frequency);

/// Frequency reparameterization rho(w) = w (w*+Omega)/(w+Omega) used when the
/// interrogation end is declared at oscillator phase phi_T = T (w*+Omega).
double reparameterize(double omega, double omega_star, double standard_frequency);
double reparameterize_inverse(double omega_prime, double omega_star,
                              double standard_frequency);

/// Residual phase error of the reparameterized protocol when measurement
/// happens at oscillator phase phi instead of phi_T, with its bound
/// pi(|T-s|/T) Omega/(w*+Omega).
PhaseError residual_error(double omega, double omega_star, double phi,
                          double phi_T, double standard_frequency);

/// Truncated-Gaussian draw of the true duration around T.
double sample_true_duration(const TimingConfig& config, double duration,
                            std::uint64_t seed);

}  // namespace qclock
