#pragma once

#include "qclock/noise.hpp"
#include "qclock/optimizer.hpp"
#include "qclock/quantum.hpp"
#include "qclock/tracker.hpp"
#include "qclock/timing.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qclock {

enum class Protocol { adaptive, ramsey, buzek };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

struct SimConfig {
  int atoms = 2;
  Protocol protocol = Protocol::adaptive;
  NoiseModel noise{-2.0, 0.03};
  double duration = 1.0;      // T (s)
  int interrogations = 100;   // M
  int runs = 1;
  std::uint64_t seed = 1;
  TrackerConfig tracker;
  SeesawOptions optimizer;    // adaptive protocol only
  int optimizer_warm_starts = 1;  // random starts after the first interrogation
  int buzek_outcomes = 12;
  std::optional<TimingConfig> timing;  // opt-in timing-error simulation
};

struct RunRecord {
  Eigen::VectorXd true_omegas;      // sampled interval averages (rad/s)
  Eigen::VectorXd estimates;        // posterior means per step (rad/s)
  std::vector<int> outcomes;
  Eigen::VectorXd phase_truth;      // cumulative true phase (rad)
  Eigen::VectorXd phase_estimates;  // E(theta_n | a_n) (rad)
  Eigen::VectorXd phase_variances;  // V(theta_n | a_n) (rad^2)
  Eigen::VectorXd variance_increases;  // tracker Delta V per step (rad^2)
  Eigen::VectorXd expected_costs;   // optimizer objective per step (rad^2)
  std::vector<std::uint8_t> phase_slips;
};

/// One full clock: sample a trajectory, run the per-interrogation procedure,
/// record estimates. Deterministic given (config.seed, run_index).
RunRecord run_clock(const SimConfig& config, int run_index);

/// Overlapping Allan variance at averaging factor m (Eq. form:
/// mean-square difference of adjacent m-step averages / 2).
double allan_variance(const Eigen::VectorXd& estimates, int m, double duration);

/// Allan variance for every m = 1 .. floor(M/2).
Eigen::VectorXd allan_spectrum(const Eigen::VectorXd& estimates, double duration);

/// Squared difference of the cumulative time-averaged estimate and truth,
/// per step.
Eigen::VectorXd square_freq_error(const RunRecord& record);

struct ImprovementRow {
  std::string metric;    // "square_error" or "allan_variance"
  std::string baseline;  // "ramsey" or "buzek"
  double percent = 0.0;
  double std_error = 0.0;
};

struct ProtocolAggregate {
  std::vector<RunRecord> records;
  Eigen::VectorXd mean_sq_error;   // per step, averaged over runs
  Eigen::VectorXd mean_allan;      // per m, averaged over runs
};

struct ComparisonResult {
  std::map<Protocol, ProtocolAggregate> protocols;
  std::vector<ImprovementRow> improvements;  // adaptive vs each baseline
};

/// Paired-seed comparison: every protocol sees the same noise trajectories.
/// Improvements follow the averaging policy: square-error gains averaged over
/// the last twenty steps, Allan-variance gains across all averaging times.
/// Standard errors by run-level bootstrap.
ComparisonResult compare_protocols(const SimConfig& base,
                                   const std::vector<Protocol>& protocols,
                                   int threads = 1, int bootstrap = 200);

/// Recomputes aggregates and improvement rows from stored records, using the
/// same code path as compare_protocols.
ComparisonResult aggregate_records(std::map<Protocol, std::vector<RunRecord>> records,
                                   double duration, std::uint64_t seed,
                                   int bootstrap = 200);

/// Deterministic seed derivation shared by the simulator and tests.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index);

}  // namespace qclock
