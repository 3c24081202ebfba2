#include "qclock/clocksim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

namespace qclock {

namespace {

constexpr std::uint64_t kTrajectoryStream = 0x01;
constexpr std::uint64_t kOutcomeStream = 0x10;  // + protocol id
constexpr std::uint64_t kOptimizerStream = 0x40;
constexpr std::uint64_t kTimingStream = 0x60;
constexpr std::uint64_t kBootstrapStream = 0x80;

int protocol_id(Protocol p) { return static_cast<int>(p); }

}  // namespace

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::adaptive: return "adaptive";
    case Protocol::ramsey: return "ramsey";
    case Protocol::buzek: return "buzek";
  }
  throw std::logic_error("protocol_name: unknown protocol");
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "adaptive") return Protocol::adaptive;
  if (name == "ramsey") return Protocol::ramsey;
  if (name == "buzek") return Protocol::buzek;
  throw std::invalid_argument("unknown protocol '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
  // splitmix64 over the concatenated identifiers
  std::uint64_t x = master ^ (stream * 0x9e3779b97f4a7c15ull) ^
                    (index * 0xbf58476d1ce4e5b9ull);
  for (int i = 0; i < 3; ++i) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    x = x ^ (x >> 31);
  }
  return x;
}

RunRecord run_clock(const SimConfig& config, int run_index) {
  const int m_steps = config.interrogations;
  if (m_steps < 2) throw std::invalid_argument("run_clock: interrogations >= 2");
  const double t = config.duration;
  const double pi = std::numbers::pi;

  const IntervalGrid grid = IntervalGrid::uniform(t, m_steps);
  const DiffCovariance cov = diff_cov_matrix(config.noise, grid);
  const Eigen::VectorXd truth =
      TrajectorySampler(cov).sample(derive_seed(config.seed, kTrajectoryStream, run_index));

  TrackerConfig tracker_cfg = config.tracker;
  tracker_cfg.duration = t;
  ClockBelief belief(tracker_cfg, cov.matrix);

  std::mt19937_64 outcome_rng(derive_seed(
      config.seed, kOutcomeStream + protocol_id(config.protocol), run_index));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  InterrogationAlgorithm buzek_fixed =
      config.protocol == Protocol::buzek
          ? buzek_algorithm(config.atoms, config.buzek_outcomes)
          : InterrogationAlgorithm{PureState::ground(1), Povm{}, {}};

  RunRecord rec;
  rec.true_omegas = truth;
  rec.estimates.resize(m_steps);
  rec.outcomes.resize(m_steps);
  rec.phase_truth.resize(m_steps);
  rec.phase_estimates.resize(m_steps);
  rec.phase_variances.resize(m_steps);
  rec.variance_increases.resize(m_steps);
  rec.expected_costs = Eigen::VectorXd::Zero(m_steps);
  rec.phase_slips.assign(m_steps, 0);

  double theta_true = 0.0;
  InterrogationAlgorithm previous{PureState::ground(1), Povm{}, {}};
  bool have_previous = false;

  for (int n = 0; n < m_steps; ++n) {
    belief.extend_prior();
    const PhaseStatistics stats = belief.phase_statistics();
    const double prior_mean = belief.prior_mean();

    InterrogationAlgorithm alg{PureState::ground(1), Povm{}, {}};
    switch (config.protocol) {
      case Protocol::adaptive: {
        SeesawOptions opts = config.optimizer;
        opts.atoms = config.atoms;
        if (have_previous) opts.starts = config.optimizer_warm_starts;
        opts.seed = derive_seed(config.seed, kOptimizerStream,
                                static_cast<std::uint64_t>(run_index) * 100000u + n);
        const SdpSolution sol = optimize_interrogation(
            belief.new_axis_nodes(), belief.new_axis_marginal(),
            stats.conditional_offsets, t, opts,
            have_previous ? &previous : nullptr);
        alg = sol.algorithm;
        rec.expected_costs(n) = sol.objective;
        break;
      }
      case Protocol::ramsey:
        alg = ramsey_algorithm(config.atoms, prior_mean * t);
        break;
      case Protocol::buzek:
        alg = buzek_fixed;
        break;
    }

    rec.variance_increases(n) = belief.expected_variance_increase(alg);

    const double omega_true = truth(n);
    if (std::abs((prior_mean - omega_true) * t) >= pi) rec.phase_slips[n] = 1;

    double rotation = omega_true * t;
    double elapsed = t;
    if (config.timing) {
      const double s = sample_true_duration(
          *config.timing, t,
          derive_seed(config.seed, kTimingStream,
                      static_cast<std::uint64_t>(run_index) * 100000u + n));
      const double omega_standard = config.timing->standard_frequency;
      const double phi = (omega_true + omega_standard) * s;
      const double comp =
          compensating_phase({prior_mean, phi}, t, omega_standard);
      rotation = omega_true * s - comp;
      elapsed = s;
    }

    const Eigen::VectorXd probs =
        outcome_probs_at_phase(alg.state, alg.povm, rotation);
    const double u = uniform(outcome_rng);
    int outcome = 0;
    double cdf = 0.0;
    for (int a = 0; a < probs.size(); ++a) {
      cdf += probs(a);
      outcome = a;
      if (u <= cdf) break;
    }

    belief.advance(alg, outcome);

    theta_true += omega_true * elapsed;
    const PhaseStatistics post = belief.phase_statistics();
    rec.outcomes[n] = outcome;
    rec.estimates(n) = belief.frequency_estimate();
    rec.phase_truth(n) = theta_true;
    rec.phase_estimates(n) = post.estimate;
    rec.phase_variances(n) = post.variance;

    previous = alg;
    have_previous = true;
  }
  return rec;
}

double allan_variance(const Eigen::VectorXd& estimates, int m, double) {
  const int total = static_cast<int>(estimates.size());
  if (m < 1 || total < 2 * m) {
    throw std::invalid_argument("allan_variance: need M >= 2m, m >= 1");
  }
  Eigen::VectorXd prefix(total + 1);
  prefix(0) = 0.0;
  for (int i = 0; i < total; ++i) prefix(i + 1) = prefix(i) + estimates(i);
  auto window_avg = [&](int start) {  // 0-based start, m samples
    return (prefix(start + m) - prefix(start)) / m;
  };
  const int terms = total - 2 * m + 1;
  double acc = 0.0;
  for (int j = 0; j < terms; ++j) {
    const double d = window_avg(j + m) - window_avg(j);
    acc += d * d;
  }
  return acc / (2.0 * terms);
}

Eigen::VectorXd allan_spectrum(const Eigen::VectorXd& estimates, double duration) {
  const int total = static_cast<int>(estimates.size());
  const int max_m = total / 2;
  Eigen::VectorXd out(max_m);
  for (int m = 1; m <= max_m; ++m) out(m - 1) = allan_variance(estimates, m, duration);
  return out;
}

Eigen::VectorXd square_freq_error(const RunRecord& record) {
  const int total = static_cast<int>(record.estimates.size());
  Eigen::VectorXd out(total);
  double est_sum = 0.0;
  double true_sum = 0.0;
  for (int n = 0; n < total; ++n) {
    est_sum += record.estimates(n);
    true_sum += record.true_omegas(n);
    const double d = (est_sum - true_sum) / (n + 1);
    out(n) = d * d;
  }
  return out;
}

namespace {

struct Tables {
  // per protocol: runs x steps (square error) and runs x m (allan)
  std::map<Protocol, Eigen::MatrixXd> sq;
  std::map<Protocol, Eigen::MatrixXd> allan;
  int runs = 0;
  int steps = 0;
};

std::vector<ImprovementRow> improvements_from_means(
    const std::map<Protocol, Eigen::VectorXd>& mean_sq,
    const std::map<Protocol, Eigen::VectorXd>& mean_allan) {
  std::vector<ImprovementRow> rows;
  if (!mean_sq.count(Protocol::adaptive)) return rows;
  const Eigen::VectorXd& sq_a = mean_sq.at(Protocol::adaptive);
  const Eigen::VectorXd& al_a = mean_allan.at(Protocol::adaptive);
  const int steps = static_cast<int>(sq_a.size());
  const int window = std::min(20, steps);
  for (const auto& [proto, sq_b] : mean_sq) {
    if (proto == Protocol::adaptive) continue;
    double gain_sq = 0.0;
    int count_sq = 0;
    for (int n = steps - window; n < steps; ++n) {
      if (sq_b(n) > 0.0) {
        gain_sq += 100.0 * (1.0 - sq_a(n) / sq_b(n));
        ++count_sq;
      }
    }
    const Eigen::VectorXd& al_b = mean_allan.at(proto);
    double gain_al = 0.0;
    int count_al = 0;
    for (int m = 0; m < al_b.size(); ++m) {
      if (al_b(m) > 0.0) {
        gain_al += 100.0 * (1.0 - al_a(m) / al_b(m));
        ++count_al;
      }
    }
    rows.push_back({"square_error", protocol_name(proto),
                    count_sq ? gain_sq / count_sq : 0.0, 0.0});
    rows.push_back({"allan_variance", protocol_name(proto),
                    count_al ? gain_al / count_al : 0.0, 0.0});
  }
  return rows;
}

std::map<Protocol, Eigen::VectorXd> column_means(
    const std::map<Protocol, Eigen::MatrixXd>& tables,
    const std::vector<int>& run_indices) {
  std::map<Protocol, Eigen::VectorXd> means;
  for (const auto& [proto, table] : tables) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(table.cols());
    for (int r : run_indices) mean += table.row(r);
    means[proto] = mean / double(run_indices.size());
  }
  return means;
}

}  // namespace

ComparisonResult aggregate_records(
    std::map<Protocol, std::vector<RunRecord>> records, double duration,
    std::uint64_t seed, int bootstrap) {
  if (records.empty()) throw std::invalid_argument("aggregate_records: no records");
  Tables tables;
  tables.runs = static_cast<int>(records.begin()->second.size());
  tables.steps = static_cast<int>(records.begin()->second.front().estimates.size());
  for (const auto& [proto, recs] : records) {
    if (static_cast<int>(recs.size()) != tables.runs) {
      throw std::invalid_argument("aggregate_records: run counts differ");
    }
    Eigen::MatrixXd sq(tables.runs, tables.steps);
    Eigen::MatrixXd al(tables.runs, tables.steps / 2);
    for (int r = 0; r < tables.runs; ++r) {
      sq.row(r) = square_freq_error(recs[r]).transpose();
      al.row(r) = allan_spectrum(recs[r].estimates, duration).transpose();
    }
    tables.sq[proto] = std::move(sq);
    tables.allan[proto] = std::move(al);
  }

  std::vector<int> all_runs(tables.runs);
  for (int r = 0; r < tables.runs; ++r) all_runs[r] = r;
  const auto mean_sq = column_means(tables.sq, all_runs);
  const auto mean_allan = column_means(tables.allan, all_runs);
  std::vector<ImprovementRow> rows = improvements_from_means(mean_sq, mean_allan);

  if (bootstrap > 0 && !rows.empty()) {
    std::mt19937_64 rng(derive_seed(seed, kBootstrapStream, 0));
    std::uniform_int_distribution<int> pick(0, tables.runs - 1);
    Eigen::MatrixXd samples(bootstrap, rows.size());
    std::vector<int> resample(tables.runs);
    for (int b = 0; b < bootstrap; ++b) {
      for (int r = 0; r < tables.runs; ++r) resample[r] = pick(rng);
      const auto rows_b = improvements_from_means(
          column_means(tables.sq, resample), column_means(tables.allan, resample));
      for (std::size_t k = 0; k < rows.size(); ++k) samples(b, k) = rows_b[k].percent;
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double mean = samples.col(k).mean();
      const double var =
          (samples.col(k).array() - mean).square().sum() / (bootstrap - 1);
      rows[k].std_error = std::sqrt(var);
    }
  }

  ComparisonResult result;
  for (auto& [proto, recs] : records) {
    ProtocolAggregate agg;
    agg.records = std::move(recs);
    agg.mean_sq_error = mean_sq.at(proto);
    agg.mean_allan = mean_allan.at(proto);
    result.protocols[proto] = std::move(agg);
  }
  result.improvements = std::move(rows);
  return result;
}

ComparisonResult compare_protocols(const SimConfig& base,
                                   const std::vector<Protocol>& protocols,
                                   int threads, int bootstrap) {
  if (protocols.empty()) throw std::invalid_argument("compare_protocols: no protocols");
  if (base.runs < 1) throw std::invalid_argument("compare_protocols: runs >= 1");

  struct Task {
    Protocol protocol;
    int run;
  };
  std::vector<Task> tasks;
  for (Protocol p : protocols) {
    for (int r = 0; r < base.runs; ++r) tasks.push_back({p, r});
  }

  std::map<Protocol, std::vector<RunRecord>> records;
  for (Protocol p : protocols) records[p].resize(base.runs);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      try {
        SimConfig cfg = base;
        cfg.protocol = tasks[i].protocol;
        records[tasks[i].protocol][tasks[i].run] = run_clock(cfg, tasks[i].run);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int n_threads = std::max(1, threads);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  return aggregate_records(std::move(records), base.duration, base.seed, bootstrap);
}

}  // namespace qclock
