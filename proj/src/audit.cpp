#include "ciwnls/audit.hpp"

#include "ciwnls/centralized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ciwnls {

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

void require_box(const FeasibleSet& set) {
  if (!set.bounded()) {
    throw ValidationError("the audit samples Θ and needs a bounded box");
  }
}

void require_dims(const SensingModel& model, const FeasibleSet& set) {
  if (model.param_dim() != set.dim()) {
    throw ValidationError("model has param_dim " + std::to_string(model.param_dim()) +
                          ", feasible set has dimension " + std::to_string(set.dim()));
  }
}

// θ′ = P_Θ(θ + r u), u a random unit direction, r in (0, radius].
Vector near_partner(const FeasibleSet& set, const Vector& theta, double radius, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Vector u(theta.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
    const double r = radius * (1.0 - unit(rng));
    Vector partner = project(set, Vector(theta + r * u.normalized()));
    if ((partner - theta).norm() > 0.0) return partner;
  }
  return theta;
}

PairSample evaluate_pair(const SensingModel& model, Vector theta, Vector theta_prime) {
  PairSample s;
  const Vector diff = theta - theta_prime;
  const double d2 = diff.squaredNorm();
  double mono = 0.0;
  double obs = 0.0;
  for (int n = 0; n < model.n_agents(); ++n) {
    const Vector df = model.eval(n, theta) - model.eval(n, theta_prime);
    mono += diff.dot(model.grad(n, theta) * (model.noise_cov_inv(n) * df));
    obs += df.squaredNorm();
  }
  s.monotonicity = mono / d2;
  s.observability = obs / d2;
  s.theta = std::move(theta);
  s.theta_prime = std::move(theta_prime);
  return s;
}

}  // namespace

std::vector<Vector> box_grid(const FeasibleSet& set, int points_per_axis, long cap,
                             int* used_points_per_axis) {
  require_box(set);
  const int m = set.dim();
  int g = points_per_axis;
  auto total = [m](int p) {
    double t = std::pow(static_cast<double>(p), m);
    return t;
  };
  while (g >= 2 && total(g) > static_cast<double>(cap)) --g;
  if (used_points_per_axis) *used_points_per_axis = g >= 2 ? g : 0;
  std::vector<Vector> pts;
  if (g < 2) return pts;
  const long count = static_cast<long>(total(g));
  pts.reserve(count);
  std::vector<int> idx(m, 0);
  for (long k = 0; k < count; ++k) {
    Vector p(m);
    for (int i = 0; i < m; ++i) {
      const double lo = set.lower()(i);
      const double hi = set.upper()(i);
      p(i) = idx[i] == g - 1 ? hi : lo + (hi - lo) * idx[i] / (g - 1);
    }
    pts.push_back(std::move(p));
    for (int i = m - 1; i >= 0; --i) {
      if (++idx[i] < g) break;
      idx[i] = 0;
    }
  }
  return pts;
}

double estimate_lipschitz(const SensingModel& model, int n, const FeasibleSet& set,
                          int samples, Rng& rng, int grid_points, long grid_cap) {
  require_box(set);
  require_dims(model, set);
  if (samples < 2) throw ValidationError("--samples: need at least 2, got " + std::to_string(samples));
  double k = 0.0;
  for (int s = 0; s < samples; ++s) k = std::max(k, spectral_norm(model.grad(n, set.sample(rng))));
  for (const auto& p : box_grid(set, grid_points, grid_cap)) {
    k = std::max(k, spectral_norm(model.grad(n, p)));
  }
  return k;
}

std::vector<PairSample> sample_pairs(const SensingModel& model, const FeasibleSet& set,
                                     int pair_samples, Rng& rng, int grid_points,
                                     long grid_cap, double near_radius) {
  require_box(set);
  require_dims(model, set);
  if (pair_samples < 1) throw ValidationError("--samples: need at least 1 pair");
  std::vector<PairSample> out;
  for (int k = 0; k < pair_samples; ++k) {
    Vector theta = set.sample(rng);
    Vector partner = (k % 4 == 3) ? near_partner(set, theta, near_radius, rng) : set.sample(rng);
    if ((partner - theta).norm() == 0.0) continue;
    out.push_back(evaluate_pair(model, std::move(theta), std::move(partner)));
  }
  for (const auto& p : box_grid(set, grid_points, grid_cap)) {
    Vector far = set.sample(rng);
    if ((far - p).norm() > 0.0) out.push_back(evaluate_pair(model, p, std::move(far)));
    Vector near = near_partner(set, p, near_radius, rng);
    if ((near - p).norm() > 0.0) out.push_back(evaluate_pair(model, p, std::move(near)));
  }
  return out;
}

namespace {

template <typename Key>
const PairSample& argmin_pair(const std::vector<PairSample>& pairs, Key key) {
  if (pairs.empty()) throw ValidationError("no distinct parameter pairs were sampled");
  const PairSample* best = &pairs.front();
  for (const auto& p : pairs) {
    if (key(p) < key(*best)) best = &p;
  }
  return *best;
}

}  // namespace

double estimate_monotonicity_constant(const SensingModel& model, const FeasibleSet& set,
                                      int pair_samples, Rng& rng, int grid_points,
                                      long grid_cap) {
  const auto pairs = sample_pairs(model, set, pair_samples, rng, grid_points, grid_cap);
  return argmin_pair(pairs, [](const PairSample& p) { return p.monotonicity; }).monotonicity;
}

ObservabilityCheck check_global_observability(const SensingModel& model,
                                              const FeasibleSet& set, int pair_samples,
                                              double tolerance, Rng& rng, int grid_points,
                                              long grid_cap) {
  const auto pairs = sample_pairs(model, set, pair_samples, rng, grid_points, grid_cap);
  const auto& w = argmin_pair(pairs, [](const PairSample& p) { return p.observability; });
  return ObservabilityCheck{w.observability > tolerance, w.observability, w.theta,
                            w.theta_prime};
}

GammaMinimum estimate_gamma_min_eigenvalue(const SensingModel& model,
                                           const FeasibleSet& set, int grid_points,
                                           long grid_cap, int random_samples, Rng& rng) {
  require_box(set);
  require_dims(model, set);
  GammaMinimum out;
  out.value = std::numeric_limits<double>::infinity();
  auto visit = [&](const Vector& theta) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma_matrix(model, theta),
                                              Eigen::EigenvaluesOnly);
    const double l = eig.eigenvalues()(0);
    ++out.samples;
    if (l < out.value) {
      out.value = l;
      out.witness = theta;
    }
  };
  for (const auto& p : box_grid(set, grid_points, grid_cap, &out.grid_points_per_axis)) visit(p);
  for (int s = 0; s < random_samples; ++s) visit(set.sample(rng));
  out.value = std::max(out.value, 0.0);
  return out;
}

double innovation_gain_lower_bound(double monotonicity, double gamma_min_eig) {
  const double inf = std::numeric_limits<double>::infinity();
  const double from_c1 = monotonicity > 0.0 ? 1.0 / monotonicity : inf;
  const double from_gamma = gamma_min_eig > 0.0 ? 1.0 / (2.0 * gamma_min_eig) : inf;
  return std::max(from_c1, from_gamma);
}

bool AuditReport::m6_ok() const {
  return !lipschitz.empty() &&
         std::all_of(lipschitz.begin(), lipschitz.end(),
                     [](double k) { return std::isfinite(k) && k >= 0.0; });
}

AuditReport audit(const SensingModel& model, const FeasibleSet& set,
                  const AuditOptions& options, const NetworkGraph* graph) {
  require_box(set);
  require_dims(model, set);
  AuditReport r;
  r.seed = options.seed;
  r.epsilon1 = options.epsilon1;
  r.delta1_max = delta1_upper_bound(options.epsilon1);
  r.positivity_tolerance = options.positivity_tolerance;
  r.noise_is_gaussian = !model.has_custom_noise();

  // Independent sub-streams keep each check reproducible on its own.
  Rng lip_rng(derive_seed(options.seed, 1));
  for (int n = 0; n < model.n_agents(); ++n) {
    Rng agent_rng(derive_seed(derive_seed(options.seed, 1), static_cast<std::uint64_t>(n)));
    r.lipschitz.push_back(estimate_lipschitz(model, n, set, options.lipschitz_samples,
                                             agent_rng, options.pair_grid_points,
                                             options.pair_grid_cap));
    r.k_star_max = std::max(r.k_star_max, r.lipschitz.back() * r.lipschitz.back() *
                                              symmetric_norm(model.noise_cov_inv(n)));
  }
  r.lipschitz_samples = options.lipschitz_samples;

  Rng pair_rng(derive_seed(options.seed, 2));
  const auto pairs = sample_pairs(model, set, options.pair_samples, pair_rng,
                                  options.pair_grid_points, options.pair_grid_cap,
                                  options.near_diagonal_radius);
  r.pair_samples = static_cast<long>(pairs.size());
  box_grid(set, options.pair_grid_points, options.pair_grid_cap, &r.pair_grid_points);
  const auto& mono = argmin_pair(pairs, [](const PairSample& p) { return p.monotonicity; });
  r.monotonicity = mono.monotonicity;
  r.monotonicity_witness_theta = mono.theta;
  r.monotonicity_witness_theta_prime = mono.theta_prime;
  const auto& obs = argmin_pair(pairs, [](const PairSample& p) { return p.observability; });
  r.observability_margin = obs.observability;
  r.observability_ok = obs.observability > options.observability_tolerance;
  r.observability_witness_theta = obs.theta;
  r.observability_witness_theta_prime = obs.theta_prime;

  Rng gamma_rng(derive_seed(options.seed, 3));
  const auto gmin = estimate_gamma_min_eigenvalue(model, set, options.gamma_grid_points,
                                                  options.gamma_grid_cap,
                                                  options.gamma_random_samples, gamma_rng);
  r.gamma_min_eig = gmin.value;
  r.gamma_min_witness = gmin.witness;
  r.gamma_samples = gmin.samples;
  r.gamma_grid_points = gmin.grid_points_per_axis;

  r.a_min = innovation_gain_lower_bound(std::max(r.monotonicity, 0.0), r.gamma_min_eig);
  if (graph) r.fiedler = graph->fiedler();
  return r;
}

GainFeasibility check_gain_feasible(const GainSchedule& schedule, const AuditReport& report) {
  GainFeasibility f;
  const double a = schedule.a();
  f.consistency_margin = a * report.monotonicity - 1.0;
  f.consistency_ok = report.monotonicity > 0.0 && a * report.monotonicity >= 1.0;
  const double bound = innovation_gain_lower_bound(report.monotonicity, report.gamma_min_eig);
  f.normality_margin = a - bound;
  f.normality_ok = std::isfinite(bound) && a > bound;
  const double d1max = delta1_upper_bound(report.epsilon1);
  f.delta1_margin = d1max - schedule.delta1();
  f.delta1_ok = schedule.delta1() < d1max;
  return f;
}

double default_innovation_gain(const AuditReport& report) {
  const double bound = innovation_gain_lower_bound(report.monotonicity, report.gamma_min_eig);
  if (!std::isfinite(bound) || bound > 1e12) {
    throw InfeasibleGainError("no finite default innovation gain: audited c1 = " +
                              format_double(report.monotonicity) + ", min eigenvalue of gamma = " +
                              format_double(report.gamma_min_eig) + "; set schedule.a explicitly");
  }
  return std::ceil(bound) * 1.1;
}

}  // namespace ciwnls
