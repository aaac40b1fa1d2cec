#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ciwnls/audit.hpp"
#include "ciwnls/centralized.hpp"
#include "ciwnls/common.hpp"
#include "ciwnls/estimator.hpp"
#include "ciwnls/graph.hpp"
#include "ciwnls/sensing.hpp"

namespace ciwnls {

/// Fixed topology; edges are 0-based.
struct ExplicitGraph {
  int n_agents = 0;
  std::vector<Edge> edges;
};

/// Random geometric law, drawn once per ensemble.
struct RandomGeometricLaw {
  int n_agents = 0;
  double radius = 0.0;
};

using GraphSpec = std::variant<ExplicitGraph, RandomGeometricLaw>;

/// Gain constants; an absent `a` comes from the audit, an absent `b` is
/// 1/λ_N(L) of the drawn graph.
struct ScheduleSpec {
  std::optional<double> a;
  std::optional<double> b;
  double delta1 = 0.1;
  double epsilon1 = 1e6;
};

struct ExperimentConfig {
  GraphSpec graph;
  SensingModel model;
  FeasibleSet feasible_set;
  Vector theta_true;
  ScheduleSpec schedule{};
  /// Common x_n(0); zeros when absent.
  std::optional<Vector> initial{};
  long horizon = 5000;
  int trials = 250;
  std::uint64_t master_seed = 1;
  RecordStride record_stride{};
  bool run_centralized = true;
  /// Centralized WNLS runs on trials [0, centralized_trials); all when absent.
  std::optional<int> centralized_trials{};
  int centralized_checkpoints = 20;
  int centralized_starts = 8;
  bool run_audit = true;
  AuditOptions audit{};
  std::string output_dir{};
  int jobs = 1;
};

/// Throws ValidationError naming the offending field.
void validate(const ExperimentConfig& config);

/// Per-trial seed: derive_seed(master_seed, trial_index).
std::uint64_t trial_seed(std::uint64_t master_seed, int trial_index);

/// Epochs kept in traces: the record stride plus every centralized checkpoint.
std::vector<long> recorded_epochs(const ExperimentConfig& config);

/// Up to `count` distinct, logarithmically spaced epochs in [1, horizon],
/// always ending at horizon.
std::vector<long> checkpoint_epochs(long horizon, int count);

/// One realization.
struct TrialTrace {
  int trial_index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<long> epochs;
  /// errors(k, n) = ‖x_n(epochs[k]) − θ*‖.
  Matrix errors;
  std::vector<long> centralized_epochs;
  /// ‖θ̂ − θ*‖ at each checkpoint, θ̂ fitted to the observations y(0..t−1).
  std::vector<double> centralized_errors;
  std::vector<bool> centralized_converged;
};

/// Per-epoch aggregate over the successful trials.
struct MetricsRecord {
  long epoch = 0;
  /// Mean over trials of ‖x_n(t) − θ*‖ / M, per agent.
  Vector mean_norm_error;
  /// Mean over trials of (t+1) ‖x_n(t) − θ*‖², per agent.
  Vector mean_scaled_sq_error;
  /// Mean over trials of t ‖θ̂ − θ*‖² (the estimate uses t observations).
  std::optional<double> centralized_scaled_sq_error;
  std::optional<double> centralized_norm_error;
  int trials = 0;
  int centralized_trials = 0;
};

struct EnsembleResult {
  std::vector<MetricsRecord> records;
  std::vector<TrialTrace> traces;
  int failures = 0;
  double wall_seconds = 0.0;
};

using ProgressCallback = std::function<void(int completed, int total)>;

/// A config with its graph drawn and its gains resolved. Immutable and
/// shared read-only by concurrent trials.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const NetworkGraph& graph() const { return graph_; }
  const GainSchedule& schedule() const { return schedule_; }
  const std::optional<AuditReport>& audit() const { return audit_; }
  /// Γ, Σ_c, Σ_d at θ*; absent when Γ is singular there or a is infeasible.
  const std::optional<CovarianceReport>& covariance() const { return covariance_; }
  const std::vector<long>& epochs() const { return epochs_; }

  /// Numerical failures are recorded in the trace instead of thrown.
  TrialTrace run_trial(int trial_index) const;

  /// All trials on up to `jobs` worker threads, aggregated in trial order.
  /// Throws EnsembleError when every trial failed.
  EnsembleResult run_monte_carlo(int jobs = 1, const ProgressCallback& progress = {}) const;

 private:
  ExperimentConfig config_;
  NetworkGraph graph_;
  GainSchedule schedule_;
  std::optional<AuditReport> audit_;
  std::optional<CovarianceReport> covariance_;
  std::vector<long> epochs_;
};

class EnsembleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

TrialTrace run_trial(const ExperimentConfig& config, int trial_index);
EnsembleResult run_monte_carlo(const ExperimentConfig& config,
                               const ProgressCallback& progress = {});

/// Aggregates traces in index order; failed traces are skipped.
std::vector<MetricsRecord> aggregate(const std::vector<TrialTrace>& traces, int param_dim);

/// The simulation study: 10 agents on a radius-0.4 random geometric graph,
/// pairwise-sine sensing with variance 2, Θ = [−π/4, π/4]⁵, 250 trials.
ExperimentConfig reproduce_paper_experiment();

/// The ten (i, j) component pairs (1-based) of the preset sensors.
std::vector<std::pair<int, int>> paper_sensing_pairs();
Vector paper_theta_true();
/// tr Σ_d target used to recover the preset's innovation gain.
inline constexpr double kPaperTraceSigmaD = 5.4517;

/// Writes epoch,agent,mean_norm_error,mean_scaled_sq_error and, when any
/// record has it, centralized_scaled_sq_error (empty where not computed).
void export_csv(const std::vector<MetricsRecord>& records, std::ostream& out);
void export_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);

/// Parses export_csv output back.
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

/// Writes metrics.csv, graph.json, covariance.json, audit.json and
/// manifest.json into `dir`.
void write_outputs(const Experiment& experiment, const EnsembleResult& result,
                   const std::filesystem::path& dir);

}  // namespace ciwnls
