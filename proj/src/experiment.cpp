#include "ciwnls/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "ciwnls/json_io.hpp"

namespace ciwnls {

namespace {

constexpr std::uint64_t kGraphStreamTag = 0x6772617068ULL;    // "graph"
constexpr std::uint64_t kStartsStreamTag = 0x7374617274ULL;   // "start"

NetworkGraph draw_graph(const ExperimentConfig& config) {
  return std::visit(
      [&](const auto& spec) -> NetworkGraph {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, ExplicitGraph>) {
          return build_graph(spec.n_agents, spec.edges);
        } else {
          Rng rng(derive_seed(config.master_seed ^ kGraphStreamTag, 0));
          return generate_random_geometric(spec.n_agents, spec.radius, rng);
        }
      },
      config.graph);
}

int graph_agents(const GraphSpec& spec) {
  return std::visit([](const auto& s) { return s.n_agents; }, spec);
}

}  // namespace

void validate(const ExperimentConfig& config) {
  const int m = config.model.param_dim();
  if (graph_agents(config.graph) != config.model.n_agents()) {
    throw ValidationError("graph.n_agents = " + std::to_string(graph_agents(config.graph)) +
                          " but the model has " + std::to_string(config.model.n_agents()) +
                          " agents");
  }
  if (config.feasible_set.dim() != m) {
    throw ValidationError("feasible_set has dimension " +
                          std::to_string(config.feasible_set.dim()) + ", model param_dim is " +
                          std::to_string(m));
  }
  if (config.theta_true.size() != m) {
    throw ValidationError("theta_true has " + std::to_string(config.theta_true.size()) +
                          " entries, expected " + std::to_string(m));
  }
  if (!config.feasible_set.interior(config.theta_true)) {
    throw ValidationError("theta_true must lie in the interior of feasible_set");
  }
  if (config.initial) {
    if (config.initial->size() != m) throw ValidationError("initial has the wrong dimension");
    if (!config.feasible_set.contains(*config.initial)) {
      throw ValidationError("initial must lie in feasible_set");
    }
  }
  if (config.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (config.trials < 1) throw ValidationError("trials must be >= 1");
  if (config.centralized_trials && *config.centralized_trials < 0) {
    throw ValidationError("centralized_trials must be >= 0");
  }
  if (config.centralized_checkpoints < 1) {
    throw ValidationError("centralized_checkpoints must be >= 1");
  }
  if (config.centralized_starts < 1) throw ValidationError("centralized_starts must be >= 1");
  if (config.record_stride.dense_until < 0 || config.record_stride.every < 1) {
    throw ValidationError("record_stride needs dense_until >= 0 and every >= 1");
  }
  if (config.run_centralized && !config.feasible_set.bounded()) {
    throw ValidationError("run_centralized needs a bounded feasible_set for its starts");
  }
}

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(trial_index));
}

std::vector<long> checkpoint_epochs(long horizon, int count) {
  if (count <= 1 || horizon <= 1) return {horizon};
  const long n = std::min<long>(count, horizon);
  const double top = std::log(static_cast<double>(horizon));
  std::vector<long> out;
  for (long k = 0; k < n; ++k) {
    long e = std::lround(std::exp(top * static_cast<double>(k) / static_cast<double>(n - 1)));
    // Crowded low epochs are pushed up so the count stays exact.
    if (!out.empty()) e = std::max(e, out.back() + 1);
    out.push_back(std::min(e, horizon - (n - 1 - k)));
  }
  return out;
}

std::vector<long> recorded_epochs(const ExperimentConfig& config) {
  std::set<long> out;
  for (long t = 0; t <= config.horizon; ++t) {
    if (config.record_stride.keep(t, config.horizon)) out.insert(t);
  }
  if (config.run_centralized) {
    for (long t : checkpoint_epochs(config.horizon, config.centralized_checkpoints)) out.insert(t);
  }
  return {out.begin(), out.end()};
}

Experiment::Experiment(ExperimentConfig config)
    : config_((validate(config), std::move(config))),
      graph_(draw_graph(config_)),
      schedule_(1.0, 1.0, 0.1, 1e6) {
  if (config_.run_audit && config_.feasible_set.bounded()) {
    AuditOptions opts = config_.audit;
    opts.epsilon1 = config_.schedule.epsilon1;
    audit_ = ciwnls::audit(config_.model, config_.feasible_set, opts, &graph_);
  }
  double a = 0.0;
  if (config_.schedule.a) {
    a = *config_.schedule.a;
  } else if (audit_) {
    a = default_innovation_gain(*audit_);
  } else {
    throw ValidationError("schedule.a is required when the audit is disabled");
  }
  const double lmax = graph_.spectral_radius();
  const double b = config_.schedule.b ? *config_.schedule.b : (lmax > 0.0 ? 1.0 / lmax : 1.0);
  schedule_ = GainSchedule(a, b, config_.schedule.delta1, config_.schedule.epsilon1);

  try {
    covariance_ = covariance_report(config_.model, config_.theta_true, config_.model.n_agents(),
                                    a, audit_ ? std::optional(audit_->k_star_max) : std::nullopt);
  } catch (const SingularMatrixError&) {
    covariance_.reset();
  } catch (const InfeasibleGainError&) {
    covariance_ = covariance_report(config_.model, config_.theta_true, config_.model.n_agents());
  }
  epochs_ = recorded_epochs(config_);
}

TrialTrace Experiment::run_trial(int trial_index) const {
  if (trial_index < 0 || trial_index >= config_.trials) {
    throw IndexError("trial index " + std::to_string(trial_index) + " outside [0, " +
                     std::to_string(config_.trials) + ")");
  }
  const SensingModel& model = config_.model;
  const int m = model.param_dim();
  const int n_agents = model.n_agents();

  TrialTrace trace;
  trace.trial_index = trial_index;
  trace.seed = trial_seed(config_.master_seed, trial_index);
  trace.epochs = epochs_;
  trace.errors = Matrix::Zero(static_cast<Eigen::Index>(epochs_.size()), n_agents);

  const bool centralized =
      config_.run_centralized &&
      trial_index < config_.centralized_trials.value_or(config_.trials);
  std::vector<long> checkpoints;
  if (centralized) checkpoints = checkpoint_epochs(config_.horizon, config_.centralized_checkpoints);
  std::optional<ObservationHistory> history;
  if (centralized) history.emplace(model);

  Rng rng(trace.seed);
  Rng start_rng(derive_seed(trace.seed ^ kStartsStreamTag, 0));
  EstimatorState state =
      replicate_state(config_.initial.value_or(Vector::Zero(m)), n_agents);

  std::size_t next_epoch = 0;
  std::size_t next_checkpoint = 0;
  auto record = [&](const EstimatorState& s) {
    while (next_epoch < epochs_.size() && epochs_[next_epoch] < s.t) ++next_epoch;
    if (next_epoch < epochs_.size() && epochs_[next_epoch] == s.t) {
      for (int n = 0; n < n_agents; ++n) {
        trace.errors(static_cast<Eigen::Index>(next_epoch), n) =
            (s.block(n, m) - config_.theta_true).norm();
      }
    }
  };

  try {
    record(state);
    for (long k = 0; k < config_.horizon; ++k) {
      const auto ys = sample_network_observations(model, config_.theta_true, rng);
      state = step(state, graph_, model, schedule_, config_.feasible_set, ys);
      record(state);
      if (history) {
        history->append(ys);
        if (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == state.t) {
          const auto starts =
              uniform_starts(config_.feasible_set, config_.centralized_starts, start_rng);
          const WnlsResult fit = wnls_estimate(model, *history, config_.feasible_set, starts);
          trace.centralized_epochs.push_back(state.t);
          trace.centralized_errors.push_back((fit.theta - config_.theta_true).norm());
          trace.centralized_converged.push_back(fit.converged);
          ++next_checkpoint;
        }
      }
    }
  } catch (const NumericalError& e) {
    trace.failed = true;
    trace.failure = e.what();
  }
  return trace;
}

std::vector<MetricsRecord> aggregate(const std::vector<TrialTrace>& traces, int param_dim) {
  const TrialTrace* first = nullptr;
  for (const auto& t : traces) {
    if (!t.failed) {
      first = &t;
      break;
    }
  }
  if (first == nullptr) {
    throw EnsembleError("all " + std::to_string(traces.size()) + " trials failed");
  }
  const auto n_epochs = static_cast<Eigen::Index>(first->epochs.size());
  const Eigen::Index n_agents = first->errors.cols();

  std::vector<MetricsRecord> records(static_cast<std::size_t>(n_epochs));
  Matrix norm_sum = Matrix::Zero(n_epochs, n_agents);
  Matrix scaled_sum = Matrix::Zero(n_epochs, n_agents);
  std::vector<double> c_norm(static_cast<std::size_t>(n_epochs), 0.0);
  std::vector<double> c_scaled(static_cast<std::size_t>(n_epochs), 0.0);
  std::vector<int> c_count(static_cast<std::size_t>(n_epochs), 0);
  int count = 0;
  for (const auto& t : traces) {
    if (t.failed) continue;
    ++count;
    for (Eigen::Index k = 0; k < n_epochs; ++k) {
      const double scale = static_cast<double>(first->epochs[k] + 1);
      for (Eigen::Index n = 0; n < n_agents; ++n) {
        const double e = t.errors(k, n);
        norm_sum(k, n) += e / param_dim;
        scaled_sum(k, n) += scale * e * e;
      }
    }
    for (std::size_t c = 0; c < t.centralized_epochs.size(); ++c) {
      const auto it = std::lower_bound(first->epochs.begin(), first->epochs.end(),
                                       t.centralized_epochs[c]);
      const auto k = static_cast<std::size_t>(it - first->epochs.begin());
      const double e = t.centralized_errors[c];
      c_norm[k] += e / param_dim;
      c_scaled[k] += static_cast<double>(t.centralized_epochs[c]) * e * e;
      ++c_count[k];
    }
  }
  for (Eigen::Index k = 0; k < n_epochs; ++k) {
    auto& r = records[static_cast<std::size_t>(k)];
    r.epoch = first->epochs[k];
    r.trials = count;
    r.mean_norm_error = norm_sum.row(k).transpose() / count;
    r.mean_scaled_sq_error = scaled_sum.row(k).transpose() / count;
    const auto kk = static_cast<std::size_t>(k);
    if (c_count[kk] > 0) {
      r.centralized_trials = c_count[kk];
      r.centralized_norm_error = c_norm[kk] / c_count[kk];
      r.centralized_scaled_sq_error = c_scaled[kk] / c_count[kk];
    }
  }
  return records;
}

EnsembleResult Experiment::run_monte_carlo(int jobs, const ProgressCallback& progress) const {
  const auto start = std::chrono::steady_clock::now();
  const int total = config_.trials;
  std::vector<TrialTrace> traces(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex error_mutex;
  std::mutex progress_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    for (int i = next++; i < total; i = next++) {
      try {
        traces[static_cast<std::size_t>(i)] = run_trial(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = total;
        return;
      }
      const int d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d, total);
      }
    }
  };
  const int workers = std::clamp(jobs, 1, total);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  EnsembleResult result;
  result.failures = static_cast<int>(
      std::count_if(traces.begin(), traces.end(), [](const auto& t) { return t.failed; }));
  if (result.failures == total) {
    throw EnsembleError("all " + std::to_string(total) + " trials failed; first failure: " +
                        traces.front().failure);
  }
  result.records = aggregate(traces, config_.model.param_dim());
  result.traces = std::move(traces);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrialTrace run_trial(const ExperimentConfig& config, int trial_index) {
  return Experiment(config).run_trial(trial_index);
}

EnsembleResult run_monte_carlo(const ExperimentConfig& config, const ProgressCallback& progress) {
  const Experiment experiment(config);
  EnsembleResult result = experiment.run_monte_carlo(config.jobs, progress);
  if (!config.output_dir.empty()) write_outputs(experiment, result, config.output_dir);
  return result;
}

std::vector<std::pair<int, int>> paper_sensing_pairs() {
  // Agents 5 and 10 both observe sin(θ₁ + θ₅).
  return {{1, 2}, {3, 2}, {3, 4}, {4, 5}, {1, 5}, {1, 3}, {4, 2}, {3, 5}, {1, 4}, {1, 5}};
}

Vector paper_theta_true() {
  constexpr double pi = std::numbers::pi;
  Vector theta(5);
  theta << pi / 6, -pi / 7, pi / 12, -pi / 5, pi / 16;
  return theta;
}

ExperimentConfig reproduce_paper_experiment() {
  constexpr double pi = std::numbers::pi;
  SensingModel model = pairwise_sine_model(paper_sensing_pairs(), 2.0, 5);
  const Vector theta = paper_theta_true();
  const Matrix gamma = gamma_matrix(model, theta);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma, Eigen::EigenvaluesOnly);
  const GainRecovery gain =
      recover_innovation_gain(eig.eigenvalues(), model.n_agents(), kPaperTraceSigmaD);

  ExperimentConfig config{
      .graph = RandomGeometricLaw{10, 0.4},
      .model = std::move(model),
      .feasible_set = FeasibleSet::box(5, -pi / 4, pi / 4),
      .theta_true = theta,
  };
  config.schedule.a = gain.a;
  config.schedule.delta1 = 0.1;
  config.schedule.epsilon1 = 1e6;
  config.initial = Vector::Zero(5);
  config.horizon = 5000;
  config.trials = 250;
  config.master_seed = 1;
  config.run_centralized = true;
  return config;
}

void export_csv(const std::vector<MetricsRecord>& records, std::ostream& out) {
  if (records.empty()) throw ValidationError("export_csv: no metrics records");
  const bool centralized = std::any_of(records.begin(), records.end(), [](const auto& r) {
    return r.centralized_scaled_sq_error.has_value();
  });
  out << "epoch,agent,mean_norm_error,mean_scaled_sq_error";
  if (centralized) out << ",centralized_scaled_sq_error";
  out << '\n';
  for (const auto& r : records) {
    for (Eigen::Index n = 0; n < r.mean_norm_error.size(); ++n) {
      out << r.epoch << ',' << n + 1 << ',' << format_double(r.mean_norm_error(n)) << ','
          << format_double(r.mean_scaled_sq_error(n));
      if (centralized) {
        out << ',';
        if (r.centralized_scaled_sq_error) out << format_double(*r.centralized_scaled_sq_error);
      }
      out << '\n';
    }
  }
}

void export_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw ValidationError("export_csv: no metrics records");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  export_csv(records, out);
  out.flush();
  if (!out) throw IoError("write to " + path.string() + " failed");
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("metrics CSV: bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("metrics CSV: missing header");
  const bool centralized = line.find("centralized_scaled_sq_error") != std::string::npos;
  std::vector<MetricsRecord> records;
  std::vector<double> norms;
  std::vector<double> scaled;
  auto flush = [&] {
    if (records.empty()) return;
    auto& r = records.back();
    r.mean_norm_error = Eigen::Map<Vector>(norms.data(), static_cast<Eigen::Index>(norms.size()));
    r.mean_scaled_sq_error =
        Eigen::Map<Vector>(scaled.data(), static_cast<Eigen::Index>(scaled.size()));
    norms.clear();
    scaled.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (centralized && line.back() == ',') cols.emplace_back();
    if (cols.size() != (centralized ? 5U : 4U)) {
      throw ValidationError("metrics CSV: malformed row '" + line + "'");
    }
    const long epoch = std::stol(cols[0]);
    if (records.empty() || records.back().epoch != epoch) {
      flush();
      records.emplace_back();
      records.back().epoch = epoch;
    }
    norms.push_back(parse_double(cols[2]));
    scaled.push_back(parse_double(cols[3]));
    if (centralized && !cols[4].empty()) {
      records.back().centralized_scaled_sq_error = parse_double(cols[4]);
    }
  }
  flush();
  return records;
}

void write_outputs(const Experiment& experiment, const EnsembleResult& result,
                   const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  export_csv(result.records, dir / "metrics.csv");
  json_io::write_json_file(json_io::graph_to_json(experiment.graph()), dir / "graph.json");
  if (experiment.covariance()) {
    json_io::write_json_file(json_io::covariance_to_json(*experiment.covariance()),
                             dir / "covariance.json");
  }
  if (experiment.audit()) {
    json_io::write_json_file(json_io::audit_to_json(*experiment.audit()), dir / "audit.json");
  }
  const auto& cfg = experiment.config();
  json_io::json manifest = {
      {"config_hash", json_io::config_hash(cfg)},
      {"master_seed", cfg.master_seed},
      {"trials", cfg.trials},
      {"horizon", cfg.horizon},
      {"failures", result.failures},
      {"schedule",
       {{"a", experiment.schedule().a()},
        {"b", experiment.schedule().b()},
        {"delta1", experiment.schedule().delta1()},
        {"epsilon1", experiment.schedule().epsilon1()}}},
      {"fiedler", experiment.graph().fiedler()},
      {"wall_seconds", result.wall_seconds},
  };
  json_io::write_json_file(manifest, dir / "manifest.json");
}

}  // namespace ciwnls
