#include "ciwnls/centralized.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <string>

namespace ciwnls {

ObservationHistory::ObservationHistory(const SensingModel& model) : model_(&model) {
  for (int n = 0; n < model.n_agents(); ++n) {
    means_.push_back(Vector::Zero(model.obs_dim(n)));
    scatters_.push_back(0.0);
  }
}

ObservationHistory::ObservationHistory(const SensingModel& model, const ObservationLog& log)
    : ObservationHistory(model) {
  for (const auto& ys : log) append(ys);
}

void ObservationHistory::append(const std::vector<Vector>& ys) {
  if (static_cast<int>(ys.size()) != n_agents()) {
    throw ValidationError("epoch has " + std::to_string(ys.size()) + " observations for " +
                          std::to_string(n_agents()) + " agents");
  }
  ++count_;
  const double c = static_cast<double>(count_);
  for (int n = 0; n < n_agents(); ++n) {
    if (ys[n].size() != means_[n].size()) {
      throw ValidationError("agent " + std::to_string(n + 1) + ": observation has size " +
                            std::to_string(ys[n].size()));
    }
    // Welford update of the mean and the R⁻¹-weighted scatter.
    const Vector delta = ys[n] - means_[n];
    means_[n] += delta / c;
    const Vector delta_after = ys[n] - means_[n];
    scatters_[n] += delta.dot(model_->noise_cov_inv(n) * delta_after);
  }
}

double wnls_cost(const SensingModel& model, const ObservationLog& history, const Vector& z) {
  if (history.empty()) throw ValidationError("observation history is empty");
  std::vector<Vector> fz;
  for (int n = 0; n < model.n_agents(); ++n) fz.push_back(model.eval(n, z));
  double cost = 0.0;
  for (const auto& ys : history) {
    if (static_cast<int>(ys.size()) != model.n_agents()) {
      throw ValidationError("epoch has " + std::to_string(ys.size()) +
                            " observations for " + std::to_string(model.n_agents()) +
                            " agents");
    }
    for (int n = 0; n < model.n_agents(); ++n) {
      const Vector r = ys[n] - fz[n];
      cost += r.dot(model.noise_cov_inv(n) * r);
    }
  }
  return cost;
}

double wnls_cost(const SensingModel& model, const ObservationHistory& history,
                 const Vector& z) {
  if (history.count() == 0) throw ValidationError("observation history is empty");
  const double c = static_cast<double>(history.count());
  double cost = 0.0;
  for (int n = 0; n < model.n_agents(); ++n) {
    const Vector r = model.eval(n, z) - history.mean(n);
    cost += c * r.dot(model.noise_cov_inv(n) * r) + history.scatter(n);
  }
  return cost;
}

namespace {

// q(z) = Q_t(z)/count without the constant scatter term, and its gradient.
double normalized_cost(const SensingModel& model, const ObservationHistory& history,
                       const Vector& z, Vector* gradient) {
  double q = 0.0;
  if (gradient) gradient->setZero(model.param_dim());
  for (int n = 0; n < model.n_agents(); ++n) {
    const Vector r = model.eval(n, z) - history.mean(n);
    const Vector w = model.noise_cov_inv(n) * r;
    q += r.dot(w);
    if (gradient) *gradient += 2.0 * (model.grad(n, z) * w);
  }
  return q;
}

}  // namespace

Vector wnls_gradient(const SensingModel& model, const ObservationHistory& history,
                     const Vector& z) {
  Vector g;
  normalized_cost(model, history, z, &g);
  return static_cast<double>(history.count()) * g;
}

WnlsResult minimize_wnls(const SensingModel& model, const ObservationHistory& history,
                         const FeasibleSet& set, const Vector& start,
                         const WnlsOptions& options) {
  if (history.count() == 0) throw ValidationError("observation history is empty");
  if (start.size() != model.param_dim()) {
    throw ValidationError("start has dimension " + std::to_string(start.size()));
  }
  Vector z = project(set, start);
  Vector g;
  double q = normalized_cost(model, history, z, &g);
  double step = 1.0;
  WnlsResult result;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double stationarity = (project(set, Vector(z - g)) - z).norm();
    if (stationarity <= options.stationarity_tolerance) {
      result.converged = true;
      break;
    }
    // Backtracking on the quadratic upper model of the projected step.
    Vector candidate;
    double q_candidate = 0.0;
    Vector g_candidate;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      candidate = project(set, Vector(z - step * g));
      const Vector d = candidate - z;
      q_candidate = normalized_cost(model, history, candidate, &g_candidate);
      // The slack absorbs round-off in q once the decrease drops below eps |q|.
      const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(q);
      if (q_candidate <= q + g.dot(d) + d.squaredNorm() / (2.0 * step) + slack) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || (candidate - z).norm() == 0.0) break;
    // Next trial step: Barzilai-Borwein ratio sᵀs / sᵀy when curvature is positive.
    const Vector s = candidate - z;
    const double sy = s.dot(g_candidate - g);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e6) : std::min(step * 2.0, 1e6);
    z = std::move(candidate);
    q = q_candidate;
    g = std::move(g_candidate);
  }
  result.theta = z;
  result.iterations = it;
  result.stationarity = (project(set, Vector(z - g)) - z).norm();
  result.converged = result.converged || result.stationarity <= options.stationarity_tolerance;
  result.cost = wnls_cost(model, history, z);
  return result;
}

WnlsResult wnls_estimate(const SensingModel& model, const ObservationHistory& history,
                         const FeasibleSet& set, const std::vector<Vector>& starts,
                         const WnlsOptions& options) {
  if (starts.empty()) throw ValidationError("wnls_estimate needs at least one start");
  WnlsResult best;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    WnlsResult r = minimize_wnls(model, history, set, starts[k], options);
    if (r.cost < best.cost) {
      r.best_start = static_cast<int>(k);
      best = std::move(r);
    }
  }
  return best;
}

std::vector<Vector> uniform_starts(const FeasibleSet& set, int count, Rng& rng) {
  std::vector<Vector> starts;
  for (int k = 0; k < count; ++k) starts.push_back(set.sample(rng));
  return starts;
}

Matrix gamma_matrix(const SensingModel& model, const Vector& theta) {
  const int m = model.param_dim();
  Matrix gamma = Matrix::Zero(m, m);
  for (int n = 0; n < model.n_agents(); ++n) {
    const Matrix g = model.grad(n, theta);
    gamma += g * model.noise_cov_inv(n) * g.transpose();
  }
  gamma /= static_cast<double>(model.n_agents());
  return (gamma + gamma.transpose()) / 2.0;
}

double trace_sigma_distributed(const Vector& gamma_eigenvalues, int n_agents, double a) {
  double tr = 0.0;
  for (Eigen::Index i = 0; i < gamma_eigenvalues.size(); ++i) {
    const double l = gamma_eigenvalues(i);
    tr += a * a * l / (n_agents * (2.0 * a * l - 1.0));
  }
  return tr;
}

GainRecovery recover_innovation_gain(const Vector& gamma_eigenvalues, int n_agents,
                                     double target_trace) {
  const double lmin = gamma_eigenvalues.minCoeff();
  if (!(lmin > kSingularityTolerance)) {
    throw SingularMatrixError("gamma is singular (min eigenvalue " + format_double(lmin) + ")",
                              lmin);
  }
  auto tr = [&](double a) { return trace_sigma_distributed(gamma_eigenvalues, n_agents, a); };
  auto slope = [&](double a) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < gamma_eigenvalues.size(); ++i) {
      const double l = gamma_eigenvalues(i);
      const double d = 2.0 * a * l - 1.0;
      s += 2.0 * a * l * (a * l - 1.0) / (n_agents * d * d);
    }
    return s;
  };
  auto bisect = [](auto&& f, double lo, double hi) {
    for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  };

  const double boundary = 1.0 / (2.0 * lmin);
  // The slope is increasing (convexity); it is negative just above the
  // boundary and positive once a exceeds 1/Λ_min.
  double hi = 2.0 / lmin;
  while (slope(hi) <= 0.0) hi *= 2.0;
  const double a_star = bisect(slope, boundary * (1.0 + 1e-12), hi);

  GainRecovery out;
  out.minimizing_a = a_star;
  out.minimum_trace = tr(a_star);
  if (target_trace < out.minimum_trace) {
    out.a = a_star;
    out.trace = out.minimum_trace;
    out.exact_root = false;
    return out;
  }
  double upper = 2.0 * a_star;
  while (tr(upper) < target_trace) upper *= 2.0;
  out.a = bisect([&](double a) { return tr(a) - target_trace; }, a_star, upper);
  out.trace = tr(out.a);
  out.exact_root = true;
  return out;
}

CovarianceReport covariance_report(const SensingModel& model, const Vector& theta,
                                   int n_agents, std::optional<double> a,
                                   std::optional<double> k_star_max) {
  CovarianceReport report;
  report.gamma = gamma_matrix(model, theta);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(report.gamma, Eigen::EigenvaluesOnly);
  report.gamma_eigenvalues = eig.eigenvalues();
  report.sigma_c = sigma_centralized(report.gamma, n_agents);
  if (a) {
    report.a = a;
    report.sigma_d = sigma_distributed(report.gamma, n_agents, *a);
    report.gap_norm = symmetric_norm(Matrix(*report.sigma_d - report.sigma_c));
    if (k_star_max) {
      // The sampled k*_max must still dominate ‖Γ‖ at this θ.
      double local = 0.0;
      for (int n = 0; n < model.n_agents(); ++n) {
        const double k = model.grad(n, theta).norm() > 0.0
                             ? Eigen::JacobiSVD<Matrix>(model.grad(n, theta))
                                   .singularValues()(0)
                             : 0.0;
        const double r = symmetric_norm(model.noise_cov_inv(n));
        local = std::max(local, k * k * r);
      }
      report.k_star_max = std::max(*k_star_max, local);
      report.gap_bound = covariance_gap_bound(report.gamma, *a, n_agents, *report.k_star_max);
    }
  }
  return report;
}

}  // namespace ciwnls
