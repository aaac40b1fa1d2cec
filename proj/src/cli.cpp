#include "ciwnls/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "ciwnls/audit.hpp"
#include "ciwnls/centralized.hpp"
#include "ciwnls/experiment.hpp"
#include "ciwnls/json_io.hpp"

namespace ciwnls {

namespace {

constexpr const char* kOutDirEnv = "CIWNLS_OUT_DIR";
constexpr const char* kDefaultOutDir = "ciwnls-out";
constexpr const char* kPreset = "paper";
constexpr int kCovarianceLipschitzSamples = 2000;

// Re-tags a failure with the flag or file it came from.
template <class F>
auto with_origin(const std::string& origin, F&& f) {
  try {
    return f();
  } catch (const IoError& e) {
    throw IoError(origin + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

json_io::json load(const std::string& flag, const std::string& path) {
  return with_origin(flag + " " + path, [&] { return json_io::read_json_file(path); });
}

SensingModel load_model(const std::string& arg) {
  if (arg == kPreset) return reproduce_paper_experiment().model;
  const auto j = load("--model", arg);
  return with_origin("--model " + arg, [&] { return json_io::model_from_json(j); });
}

FeasibleSet load_set(const std::string& arg) {
  if (arg == kPreset) return FeasibleSet::box(5, -std::numbers::pi / 4, std::numbers::pi / 4);
  const auto j = load("--set", arg);
  return with_origin("--set " + arg, [&] { return json_io::set_from_json(j); });
}

// Comma-separated numbers, a JSON file holding an array, or the preset θ*.
Vector parse_theta(const std::string& arg) {
  if (arg == kPreset) return paper_theta_true();
  if (std::filesystem::is_regular_file(arg)) {
    const auto j = load("--theta", arg);
    return with_origin("--theta " + arg, [&] { return json_io::vector_from_json(j, "theta"); });
  }
  std::vector<double> values;
  std::stringstream ss(arg);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw ValidationError("--theta: '" + cell + "' is not a number");
    }
  }
  if (values.empty()) throw ValidationError("--theta: no values");
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::filesystem::path resolve_out_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return kDefaultOutDir;
}

void write_text(const std::string& flag, const std::string& path, const std::string& text,
                std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError(flag + " " + path + ": cannot open for writing");
  file << text;
  if (!file) throw IoError(flag + " " + path + ": write failed");
}

// At most one line per second, plus the final one.
class Progress {
 public:
  Progress(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}

  ProgressCallback callback() {
    if (quiet_) return {};
    return [this](int done, int total) {
      std::lock_guard lock(mutex_);
      const auto now = std::chrono::steady_clock::now();
      if (done < total && now - last_ < std::chrono::seconds(1)) return;
      last_ = now;
      err_ << "trials " << done << '/' << total << '\n' << std::flush;
    };
  }

 private:
  std::ostream& err_;
  bool quiet_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point last_{};
};

void summarize(const Experiment& experiment, const EnsembleResult& result,
               const std::filesystem::path& dir, std::ostream& out) {
  const auto& last = result.records.back();
  out << "output_dir " << dir.string() << '\n';
  out << "a " << format_double(experiment.schedule().a()) << '\n';
  out << "b " << format_double(experiment.schedule().b()) << '\n';
  out << "failures " << result.failures << '\n';
  out << "terminal_epoch " << last.epoch << '\n';
  out << "terminal_mean_scaled_sq_error " << format_double(last.mean_scaled_sq_error.mean())
      << '\n';
  if (last.centralized_scaled_sq_error) {
    out << "terminal_centralized_scaled_sq_error "
        << format_double(*last.centralized_scaled_sq_error) << '\n';
  }
  if (const auto& cov = experiment.covariance()) {
    out << "trace_sigma_c " << format_double(cov->trace_sigma_c()) << '\n';
    if (auto td = cov->trace_sigma_d()) out << "trace_sigma_d " << format_double(*td) << '\n';
  }
}

struct SimulateFlags {
  std::string config;
  std::optional<int> trials;
  std::optional<long> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<int> centralized_trials;
  int jobs = 1;
  bool quiet = false;
  std::string out_dir;
};

void add_run_flags(CLI::App* cmd, SimulateFlags& f) {
  cmd->add_option("--trials", f.trials, "Override the number of Monte Carlo trials");
  cmd->add_option("--horizon", f.horizon, "Override the number of epochs T");
  cmd->add_option("--seed", f.seed, "Override the master seed");
  cmd->add_option("--centralized-trials", f.centralized_trials,
                  "Run batch WNLS on the first K trials only");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_flag("--quiet", f.quiet, "Suppress progress on standard error");
  cmd->add_option("--out-dir", f.out_dir,
                  std::string("Output directory (default: $") + kOutDirEnv + " or " +
                      kDefaultOutDir + ")");
}

int run_ensemble(ExperimentConfig config, const SimulateFlags& f, std::ostream& out,
                 std::ostream& err) {
  if (f.trials) config.trials = *f.trials;
  if (f.horizon) config.horizon = *f.horizon;
  if (f.seed) config.master_seed = *f.seed;
  if (f.centralized_trials) config.centralized_trials = *f.centralized_trials;
  config.jobs = f.jobs;
  const auto dir = resolve_out_dir(f.out_dir, config.output_dir);
  config.output_dir = dir.string();

  const Experiment experiment(std::move(config));
  Progress progress(err, f.quiet);
  const EnsembleResult result = experiment.run_monte_carlo(f.jobs, progress.callback());
  write_outputs(experiment, result, dir);
  summarize(experiment, result, dir, out);
  return kExitOk;
}

std::string audit_table(const AuditReport& r, const std::optional<GainFeasibility>& gains) {
  std::ostringstream s;
  auto row = [&](const char* id, const char* what, std::optional<bool> ok,
                 const std::string& detail) {
    s << std::left << std::setw(4) << id << std::setw(30) << what << std::setw(6)
      << (ok ? (*ok ? "pass" : "FAIL") : "n/a") << detail << '\n';
  };
  std::ostringstream lip;
  for (std::size_t n = 0; n < r.lipschitz.size(); ++n) {
    lip << (n ? " " : "") << format_double(r.lipschitz[n]);
  }
  row("M1", "theta* interior", true, "checked per config");
  row("M2", "global observability", r.m2_ok(),
      "margin " + format_double(r.observability_margin));
  row("M3", "Gamma min eigenvalue", r.m3_ok(), "min " + format_double(r.gamma_min_eig));
  row("M4", "noise moment eps1", r.m4_ok(), "eps1 " + format_double(r.epsilon1));
  row("M5", "graph connectivity", r.m5_ok(),
      r.fiedler ? "fiedler " + format_double(*r.fiedler) : "no graph given");
  row("M6", "Lipschitz gradients", r.m6_ok(), "k_n " + lip.str());
  row("M7", "aggregate monotonicity c1", r.m7_ok(), "c1 " + format_double(r.monotonicity));
  s << "a_min " << format_double(r.a_min) << '\n';
  s << "delta1_max " << format_double(r.delta1_max) << '\n';
  s << "k_star_max " << format_double(r.k_star_max) << '\n';
  if (gains) {
    row("G1", "a*c1 >= 1", gains->consistency_ok,
        "margin " + format_double(gains->consistency_margin));
    row("G2", "a > a_min", gains->normality_ok,
        "margin " + format_double(gains->normality_margin));
    row("G3", "delta1 < 1/2 - 1/(2+eps1)", gains->delta1_ok,
        "margin " + format_double(gains->delta1_margin));
  }
  return s.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Consensus + innovations distributed WNLS estimation toolkit", "ciwnls"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);

  // graph-gen
  int gg_n = 0;
  double gg_radius = 0.0;
  std::uint64_t gg_seed = 0;
  std::string gg_out;
  auto* graph_gen = app.add_subcommand("graph-gen", "Draw a connected random geometric graph");
  graph_gen->add_option("--n", gg_n, "Number of agents")->required()->check(CLI::PositiveNumber);
  graph_gen->add_option("--radius", gg_radius, "Link radius in the unit square")->required();
  graph_gen->add_option("--seed", gg_seed, "RNG seed")->capture_default_str();
  graph_gen->add_option("--out", gg_out, "Output JSON file (default: standard output)");

  // audit
  std::string au_model;
  std::string au_set;
  std::string au_graph;
  std::string au_out;
  int au_samples = AuditOptions{}.pair_samples;
  std::uint64_t au_seed = 0;
  double au_eps = 1e6;
  std::optional<double> au_a;
  double au_delta1 = 0.1;
  auto* audit_cmd = app.add_subcommand("audit", "Check the modeling assumptions on a model");
  audit_cmd->add_option("--model", au_model, "Model JSON file, or 'paper'")->required();
  audit_cmd->add_option("--set", au_set, "Feasible set JSON file, or 'paper'")->required();
  audit_cmd->add_option("--samples", au_samples, "Samples per check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  audit_cmd->add_option("--seed", au_seed, "Sampling seed")->capture_default_str();
  audit_cmd->add_option("--graph", au_graph, "Graph JSON file for the connectivity check");
  audit_cmd->add_option("--epsilon1", au_eps, "Noise moment exponent eps1")
      ->capture_default_str();
  audit_cmd->add_option("--a", au_a, "Innovation gain to test for feasibility");
  audit_cmd->add_option("--delta1", au_delta1, "Consensus decay exponent for the feasibility test")
      ->capture_default_str();
  audit_cmd->add_option("--out", au_out, "Also write the full report as JSON");

  // covariance
  std::string cv_model;
  std::string cv_set;
  std::string cv_theta;
  std::string cv_a;
  std::optional<int> cv_n;
  auto* cov = app.add_subcommand("covariance", "Asymptotic covariances at a parameter");
  cov->add_option("--model", cv_model, "Model JSON file, or 'paper'")->required();
  cov->add_option("--set", cv_set, "Feasible set JSON file, or 'paper'")->required();
  cov->add_option("--theta", cv_theta, "Comma-separated parameter, JSON file, or 'paper'")
      ->required();
  cov->add_option("--a", cv_a,
                  "Innovation gain for Sigma_d; 'paper' recovers it from the preset trace");
  cov->add_option("--n-agents", cv_n, "Network size N (must match the model's sensor count)");

  // simulate
  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo ensemble from a config file");
  simulate->add_option("--config", sim.config, "ExperimentConfig JSON file")->required();
  add_run_flags(simulate, sim);

  // reproduce-paper
  SimulateFlags rep;
  auto* reproduce = app.add_subcommand("reproduce-paper", "Run the built-in 10-agent preset");
  add_run_flags(reproduce, rep);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*graph_gen) {
      Rng rng(gg_seed);
      const NetworkGraph g = generate_random_geometric(gg_n, gg_radius, rng);
      write_text("--out", gg_out, json_io::graph_to_json(g).dump(2) + "\n", out);
    } else if (*audit_cmd) {
      const SensingModel model = load_model(au_model);
      const FeasibleSet set = load_set(au_set);
      if (!set.bounded()) throw ValidationError("--set: the audit needs a bounded box");
      std::optional<NetworkGraph> graph;
      if (!au_graph.empty()) {
        const auto j = load("--graph", au_graph);
        graph = with_origin("--graph " + au_graph, [&] { return json_io::graph_from_json(j); });
      }
      AuditOptions opts;
      opts.pair_samples = au_samples;
      opts.lipschitz_samples = au_samples;
      opts.gamma_random_samples = au_samples;
      opts.seed = au_seed;
      opts.epsilon1 = au_eps;
      const AuditReport report = audit(model, set, opts, graph ? &*graph : nullptr);
      std::optional<GainFeasibility> gains;
      if (au_a) gains = check_gain_feasible(GainSchedule(*au_a, 1.0, au_delta1, au_eps), report);
      out << audit_table(report, gains);
      if (!au_out.empty()) {
        write_text("--out", au_out, json_io::audit_to_json(report).dump(2) + "\n", out);
      }
    } else if (*cov) {
      const SensingModel model = load_model(cv_model);
      const FeasibleSet set = load_set(cv_set);
      const Vector theta = parse_theta(cv_theta);
      if (theta.size() != model.param_dim()) {
        throw ValidationError("--theta: expected " + std::to_string(model.param_dim()) +
                              " values, got " + std::to_string(theta.size()));
      }
      if (set.dim() != model.param_dim() || !set.contains(theta)) {
        throw ValidationError("--theta: not inside the feasible set given by --set");
      }
      const int n = cv_n.value_or(model.n_agents());
      if (n != model.n_agents()) {
        throw ValidationError("--n-agents " + std::to_string(n) + ": the model has " +
                              std::to_string(model.n_agents()) + " sensors");
      }
      std::optional<double> a;
      std::optional<GainRecovery> recovered;
      if (cv_a == kPreset) {
        const CovarianceReport base = covariance_report(model, theta, n);
        recovered = recover_innovation_gain(base.gamma_eigenvalues, n, kPaperTraceSigmaD);
        a = recovered->a;
      } else if (!cv_a.empty()) {
        try {
          std::size_t used = 0;
          a = std::stod(cv_a, &used);
          if (used != cv_a.size()) throw std::invalid_argument(cv_a);
        } catch (const std::logic_error&) {
          throw ValidationError("--a: '" + cv_a + "' is neither a number nor 'paper'");
        }
      }
      // A sampled k*_max over Θ feeds the gap bound; unbounded sets get none.
      std::optional<double> k_star;
      if (a && set.bounded()) {
        Rng rng(0);
        double k = 0.0;
        for (int i = 0; i < n; ++i) {
          const double lip = estimate_lipschitz(model, i, set, kCovarianceLipschitzSamples, rng);
          k = std::max(k, lip * lip * symmetric_norm(model.noise_cov_inv(i)));
        }
        k_star = k;
      }
      json_io::json j =
          json_io::covariance_to_json(covariance_report(model, theta, n, a, k_star));
      if (recovered) {
        j["gain_recovery"] = {{"target_trace", kPaperTraceSigmaD},
                              {"exact_root", recovered->exact_root},
                              {"minimizing_a", recovered->minimizing_a},
                              {"minimum_trace", recovered->minimum_trace}};
      }
      out << j.dump(2) << '\n';
    } else if (*simulate) {
      const std::filesystem::path path = sim.config;
      const auto j = load("--config", sim.config);
      ExperimentConfig config = with_origin(
          "--config " + sim.config, [&] { return json_io::config_from_json(j, path.parent_path()); });
      return run_ensemble(std::move(config), sim, out, err);
    } else if (*reproduce) {
      return run_ensemble(reproduce_paper_experiment(), rep, out, err);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const GenerationError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ciwnls
