#pragma once

#include <optional>
#include <vector>

#include "ciwnls/common.hpp"
#include "ciwnls/estimator.hpp"
#include "ciwnls/graph.hpp"
#include "ciwnls/sensing.hpp"

namespace ciwnls {

/// Sampling budget and thresholds for the assumption audit.
struct AuditOptions {
  int pair_samples = 10000;
  /// Per-axis resolution of the grid added to pair and Lipschitz sampling.
  int pair_grid_points = 5;
  long pair_grid_cap = 10000;
  int lipschitz_samples = 10000;
  /// Per-axis resolution of the Λ_min(Γ_θ) grid.
  int gamma_grid_points = 9;
  long gamma_grid_cap = 100000;
  int gamma_random_samples = 10000;
  double near_diagonal_radius = 1e-3;
  double observability_tolerance = 1e-10;
  /// ĉ₁ and Λ̂_min must exceed this to count as positive.
  double positivity_tolerance = 1e-10;
  double epsilon1 = 1e6;
  std::uint64_t seed = 0;
};

/// Axis-aligned grid over a box. The per-axis resolution is reduced until
/// the total count fits `cap`; an empty result means not even 2 points per
/// axis fit.
std::vector<Vector> box_grid(const FeasibleSet& set, int points_per_axis, long cap,
                             int* used_points_per_axis = nullptr);

/// max ‖∇f_n(θ)‖₂ over `samples` uniform draws followed by the grid points.
/// A sampled lower estimate of k_n.
double estimate_lipschitz(const SensingModel& model, int n, const FeasibleSet& set,
                          int samples, Rng& rng, int grid_points = 5, long grid_cap = 10000);

/// One audited parameter pair (θ, θ′) with the two normalized quantities.
struct PairSample {
  Vector theta;
  Vector theta_prime;
  /// Σ_n (θ−θ′)ᵀ ∇f_n(θ) R_n⁻¹ (f_n(θ) − f_n(θ′)) / ‖θ−θ′‖².
  double monotonicity = 0.0;
  /// Σ_n ‖f_n(θ) − f_n(θ′)‖² / ‖θ−θ′‖².
  double observability = 0.0;
};

/// Audited pairs: uniform pairs (every fourth one replaced by a near-diagonal
/// pair), then every grid point paired with a uniform and a near-diagonal
/// partner.
std::vector<PairSample> sample_pairs(const SensingModel& model, const FeasibleSet& set,
                                     int pair_samples, Rng& rng, int grid_points = 5,
                                     long grid_cap = 10000,
                                     double near_radius = 1e-3);

/// ĉ₁: minimum sampled monotonicity ratio (an estimate of the infimum).
double estimate_monotonicity_constant(const SensingModel& model, const FeasibleSet& set,
                                      int pair_samples, Rng& rng, int grid_points = 5,
                                      long grid_cap = 10000);

struct ObservabilityCheck {
  bool ok = false;
  double margin = 0.0;
  Vector witness_theta;
  Vector witness_theta_prime;
};

/// Sampling certificate that Σ‖f(θ) − f(θ′)‖² > tolerance·‖θ − θ′‖².
ObservabilityCheck check_global_observability(const SensingModel& model,
                                              const FeasibleSet& set, int pair_samples,
                                              double tolerance, Rng& rng,
                                              int grid_points = 5, long grid_cap = 10000);

struct GammaMinimum {
  double value = 0.0;
  Vector witness;
  long samples = 0;
  int grid_points_per_axis = 0;
};

/// min λ_min(Γ_θ) over a grid plus uniform draws of Θ.
GammaMinimum estimate_gamma_min_eigenvalue(const SensingModel& model,
                                           const FeasibleSet& set, int grid_points,
                                           long grid_cap, int random_samples, Rng& rng);

struct AuditReport {
  std::vector<double> lipschitz;
  double monotonicity = 0.0;
  Vector monotonicity_witness_theta;
  Vector monotonicity_witness_theta_prime;
  bool observability_ok = false;
  double observability_margin = 0.0;
  Vector observability_witness_theta;
  Vector observability_witness_theta_prime;
  double gamma_min_eig = 0.0;
  Vector gamma_min_witness;
  double epsilon1 = 1e6;
  double delta1_max = 0.0;
  /// max{1/ĉ₁, 1/(2 Λ̂_min)}; +inf when either constant is not positive.
  double a_min = 0.0;
  /// max_n k_n² ‖R_n⁻¹‖.
  double k_star_max = 0.0;
  double positivity_tolerance = 1e-10;
  std::optional<double> fiedler;
  bool noise_is_gaussian = true;

  long pair_samples = 0;
  long lipschitz_samples = 0;
  long gamma_samples = 0;
  int pair_grid_points = 0;
  int gamma_grid_points = 0;
  std::uint64_t seed = 0;

  bool m1_ok() const { return true; }
  bool m2_ok() const { return observability_ok; }
  bool m3_ok() const { return gamma_min_eig > positivity_tolerance; }
  bool m4_ok() const { return epsilon1 > 0.0; }
  std::optional<bool> m5_ok() const {
    if (!fiedler) return std::nullopt;
    return *fiedler > kConnectivityTolerance;
  }
  bool m6_ok() const;
  bool m7_ok() const { return monotonicity > positivity_tolerance; }
  bool all_ok() const {
    return m1_ok() && m2_ok() && m3_ok() && m4_ok() && m5_ok().value_or(true) && m6_ok() &&
           m7_ok();
  }
};

/// max{1/ĉ₁, 1/(2 Λ̂_min)}.
double innovation_gain_lower_bound(double monotonicity, double gamma_min_eig);

/// Runs every check. Θ must be a box. `graph`, when given, is checked for
/// connectivity too.
AuditReport audit(const SensingModel& model, const FeasibleSet& set,
                  const AuditOptions& options = {}, const NetworkGraph* graph = nullptr);

struct GainFeasibility {
  /// a ĉ₁ >= 1.
  bool consistency_ok = false;
  double consistency_margin = 0.0;
  /// a > max{1/ĉ₁, 1/(2 Λ̂_min)}.
  bool normality_ok = false;
  double normality_margin = 0.0;
  /// δ₁ < 1/2 − 1/(2+ε₁).
  bool delta1_ok = false;
  double delta1_margin = 0.0;

  bool ok() const { return consistency_ok && normality_ok && delta1_ok; }
};

GainFeasibility check_gain_feasible(const GainSchedule& schedule, const AuditReport& report);

/// Default a: 1.1 × ⌈max{1/ĉ₁, 1/(2 Λ̂_min)}⌉. Throws InfeasibleGainError when
/// the bound is infinite.
double default_innovation_gain(const AuditReport& report);

}  // namespace ciwnls
