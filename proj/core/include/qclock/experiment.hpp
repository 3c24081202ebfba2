#pragma once

#include "qclock/clocksim.hpp"
#include "qclock/optimizer.hpp"

#include <map>
#include <string>
#include <vector>

namespace qclock {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kArchiveFormat = "qclock-archive-1";

/// Declarative experiment description. Parsing is strict: unknown keys and
/// type mismatches are rejected with the offending path named.
struct ExperimentSpec {
  SimConfig base;  // base.protocol is ignored; protocols below are run
  std::vector<Protocol> protocols;
  std::string output;
  int bootstrap = 200;
};

ExperimentSpec parse_experiment_spec(const std::string& json_text);
ExperimentSpec load_experiment_spec(const std::string& path);

/// Canonical (key-sorted) JSON for hashing and archiving.
std::string canonical_spec_json(const ExperimentSpec& spec);
std::string spec_hash_hex(const std::string& canonical_json);

/// Archive layout: manifest.json + spec.json at the root, one directory per
/// protocol with records.jsonl, plus improvements.tsv.
void write_archive(const std::string& dir, const ExperimentSpec& spec,
                   const ComparisonResult& result);

struct LoadedArchive {
  ExperimentSpec spec;
  std::map<Protocol, std::vector<RunRecord>> records;
};
LoadedArchive load_archive(const std::string& dir);

/// Emits error_vs_time.tsv, allan_deviation.tsv and improvements.tsv.
void write_analysis(const std::string& dir, const ExperimentSpec& spec,
                    const ComparisonResult& result);

/// Standalone optimizer invocation: a 1-D Gaussian prior description.
struct OptimizeRequest {
  int atoms = 1;
  double duration = 1.0;
  double prior_mean = 0.0;
  double prior_std = 0.1;
  int grid_points = 41;
  double span = 4.0;
  Eigen::VectorXd phase_offsets;  // optional; zero when empty
  SeesawOptions options;
};

OptimizeRequest parse_optimize_request(const std::string& json_text);

struct OptimizeOutcome {
  SdpSolution solution;
  Eigen::VectorXd omegas;
  Eigen::VectorXd priors;
};
OptimizeOutcome run_optimize(const OptimizeRequest& request);

/// Plain-text dump of an optimized algorithm (documented in the README) and
/// its re-parser; the parsed POVM re-validates its invariants.
std::string format_algorithm_dump(const OptimizeRequest& request,
                                  const SdpSolution& solution);
struct ParsedDump {
  int atoms = 0;
  double duration = 0.0;
  double objective = 0.0;
  bool converged = false;
  PovmCertificate certificate;
  InterrogationAlgorithm algorithm;
};
ParsedDump parse_algorithm_dump(const std::string& text);

}  // namespace qclock
