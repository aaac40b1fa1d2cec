#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ciwnls/common.hpp"
#include "ciwnls/sensing.hpp"

namespace ciwnls {

/// Minimum eigenvalue below which Γ is treated as singular.
inline constexpr double kSingularityTolerance = 1e-12;

/// Full record of observations: history[s][n] = y_n(s).
using ObservationLog = std::vector<std::vector<Vector>>;

/// Running per-agent sufficient statistics of the observation stream.
///
/// Because f_n(z) does not depend on s,
///   Σ_s (y_n(s) − f)ᵀ W (y_n(s) − f) = c (f − ȳ)ᵀ W (f − ȳ) + Σ_s (y_n(s) − ȳ)ᵀ W (y_n(s) − ȳ),
/// so the WNLS cost needs only the count, the mean and the weighted scatter.
class ObservationHistory {
 public:
  explicit ObservationHistory(const SensingModel& model);
  ObservationHistory(const SensingModel& model, const ObservationLog& log);

  /// Adds one epoch (one observation per agent).
  void append(const std::vector<Vector>& ys);

  long count() const { return count_; }
  int n_agents() const { return static_cast<int>(means_.size()); }
  const Vector& mean(int n) const { return means_.at(n); }
  /// Σ_s (y_n(s) − ȳ_n)ᵀ R_n⁻¹ (y_n(s) − ȳ_n).
  double scatter(int n) const { return scatters_.at(n); }

 private:
  const SensingModel* model_;
  long count_ = 0;
  std::vector<Vector> means_;
  std::vector<double> scatters_;
};

/// Q_t(z) summed directly over the stored observations.
double wnls_cost(const SensingModel& model, const ObservationLog& history, const Vector& z);

/// Q_t(z) from the sufficient statistics.
double wnls_cost(const SensingModel& model, const ObservationHistory& history,
                 const Vector& z);

/// Gradient of Q_t at z.
Vector wnls_gradient(const SensingModel& model, const ObservationHistory& history,
                     const Vector& z);

struct WnlsOptions {
  int max_iterations = 10000;
  /// Stop once ‖P_Θ(z − ∇q(z)) − z‖ falls below this, q = Q_t / count.
  double stationarity_tolerance = 1e-10;
};

struct WnlsResult {
  Vector theta;
  double cost = std::numeric_limits<double>::infinity();
  /// ‖P_Θ(z − ∇q(z)) − z‖ at the returned point, q = Q_t / count.
  double stationarity = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  /// Index of the start that produced `theta`.
  int best_start = -1;
};

/// Projected gradient descent with backtracking from one start.
WnlsResult minimize_wnls(const SensingModel& model, const ObservationHistory& history,
                         const FeasibleSet& set, const Vector& start,
                         const WnlsOptions& options = {});

/// Multi-start WNLS: best local minimizer over `starts` (ties go to the lower
/// start index). Starts outside Θ are projected first.
WnlsResult wnls_estimate(const SensingModel& model, const ObservationHistory& history,
                         const FeasibleSet& set, const std::vector<Vector>& starts,
                         const WnlsOptions& options = {});

/// `count` points drawn uniformly from a box.
std::vector<Vector> uniform_starts(const FeasibleSet& set, int count, Rng& rng);

/// Γ_θ = (1/N) Σ ∇f_n(θ) R_n⁻¹ ∇f_nᵀ(θ).
Matrix gamma_matrix(const SensingModel& model, const Vector& theta);

/// Σ_c = (NΓ)⁻¹. Throws SingularMatrixError when Λ_min(Γ) <= 1e-12.
template <typename Derived>
MatrixX<typename Derived::Scalar> sigma_centralized(const Eigen::MatrixBase<Derived>& gamma,
                                                    int n_agents) {
  using Scalar = typename Derived::Scalar;
  using Mat = MatrixX<Scalar>;
  Eigen::SelfAdjointEigenSolver<Mat> eig(gamma);
  const Scalar lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > Scalar(kSingularityTolerance))) {
    throw SingularMatrixError("gamma is singular (min eigenvalue " +
                                  format_double(static_cast<double>(lmin)) + ")",
                              static_cast<double>(lmin));
  }
  const Mat& V = eig.eigenvectors();
  const auto inv_diag = (Scalar(n_agents) * eig.eigenvalues()).cwiseInverse();
  return V * inv_diag.asDiagonal() * V.transpose();
}

/// Σ_d = aI/(2N) + (NΓ − NI/(2a))⁻¹/4. Requires a > 1/(2Λ_min(Γ)); throws
/// InfeasibleGainError otherwise.
template <typename Derived>
MatrixX<typename Derived::Scalar> sigma_distributed(const Eigen::MatrixBase<Derived>& gamma,
                                                    int n_agents,
                                                    typename Derived::Scalar a) {
  using Scalar = typename Derived::Scalar;
  using Mat = MatrixX<Scalar>;
  const Eigen::Index m = gamma.rows();
  Eigen::SelfAdjointEigenSolver<Mat> eig(gamma, Eigen::EigenvaluesOnly);
  const Scalar lmin = eig.eigenvalues().minCoeff();
  if (!(a > Scalar(0)) || !(Scalar(2) * a * lmin > Scalar(1))) {
    throw InfeasibleGainError("a = " + format_double(static_cast<double>(a)) +
                              " must exceed 1/(2 Λ_min) = " +
                              format_double(static_cast<double>(1 / (2 * lmin))));
  }
  const Scalar n = Scalar(n_agents);
  const Mat shifted = n * gamma - (n / (Scalar(2) * a)) * Mat::Identity(m, m);
  const Mat inv = shifted.ldlt().solve(Mat::Identity(m, m));
  Mat sigma = (a / (Scalar(2) * n)) * Mat::Identity(m, m) + inv / Scalar(4);
  return (sigma + sigma.transpose()) / Scalar(2);
}

/// Per-eigenvalue covariance excess (aΛ − 1)² / (NΛ(2aΛ − 1)).
template <typename Scalar>
Scalar covariance_excess(Scalar a, Scalar lambda, int n_agents) {
  const Scalar d = a * lambda - Scalar(1);
  return d * d / (Scalar(n_agents) * lambda * (Scalar(2) * a * lambda - Scalar(1)));
}

/// Upper bound on ‖Σ_d − Σ_c‖: max of the excess at Λ_min(Γ) and at
/// k*_max = max_n k_n²‖R_n⁻¹‖.
template <typename Derived>
typename Derived::Scalar covariance_gap_bound(const Eigen::MatrixBase<Derived>& gamma,
                                              typename Derived::Scalar a, int n_agents,
                                              typename Derived::Scalar k_star_max) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(gamma, Eigen::EigenvaluesOnly);
  const Scalar lmin = eig.eigenvalues().minCoeff();
  if (!(a > Scalar(0)) || !(Scalar(2) * a * lmin > Scalar(1))) {
    throw InfeasibleGainError("a = " + format_double(static_cast<double>(a)) +
                              " must exceed 1/(2 Λ_min) = " +
                              format_double(static_cast<double>(1 / (2 * lmin))));
  }
  if (!(k_star_max >= eig.eigenvalues().maxCoeff() * (1 - 1e-12))) {
    throw ValidationError("k*_max = " + format_double(static_cast<double>(k_star_max)) +
                          " is below ‖Γ‖ = " +
                          format_double(static_cast<double>(eig.eigenvalues().maxCoeff())));
  }
  return std::max(covariance_excess(a, lmin, n_agents),
                  covariance_excess(a, k_star_max, n_agents));
}

/// Spectral norm of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar symmetric_norm(const Eigen::MatrixBase<Derived>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixX<typename Derived::Scalar>> eig(
      m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// tr Σ_d(a) from the eigenvalues of Γ.
double trace_sigma_distributed(const Vector& gamma_eigenvalues, int n_agents, double a);

/// Result of solving tr Σ_d(a) = target for a.
struct GainRecovery {
  double a = 0.0;
  double trace = 0.0;
  /// False when the target lies below min_a tr Σ_d(a); `a` is then the minimizer.
  bool exact_root = false;
  double minimizing_a = 0.0;
  double minimum_trace = 0.0;
};

/// tr Σ_d(a) is convex on a > 1/(2Λ_min); when the target is attainable the
/// larger of the two roots is returned.
GainRecovery recover_innovation_gain(const Vector& gamma_eigenvalues, int n_agents,
                                     double target_trace);

struct CovarianceReport {
  Matrix gamma;
  Vector gamma_eigenvalues;
  Matrix sigma_c;
  std::optional<double> a;
  std::optional<Matrix> sigma_d;
  std::optional<double> gap_norm;
  std::optional<double> k_star_max;
  std::optional<double> gap_bound;

  double trace_sigma_c() const { return sigma_c.trace(); }
  std::optional<double> trace_sigma_d() const {
    return sigma_d ? std::optional<double>(sigma_d->trace()) : std::nullopt;
  }
};

/// Γ, Σ_c and, when `a` is given, Σ_d with its gap to Σ_c; the Corollary-style
/// bound needs `k_star_max` too.
CovarianceReport covariance_report(const SensingModel& model, const Vector& theta,
                                   int n_agents, std::optional<double> a = std::nullopt,
                                   std::optional<double> k_star_max = std::nullopt);

}  // namespace ciwnls
