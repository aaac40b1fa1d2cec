#pragma once

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ciwnls/common.hpp"

namespace ciwnls {

/// Default central-difference step.
inline constexpr double kFiniteDifferenceStep = 1e-5;

/// f(θ) = sin(θ_i + θ_j), 0-based component indices.
struct SineSumSensor {
  int i = 0;
  int j = 0;
};

/// f(θ) = F θ with F of size M_n x M.
struct LinearSensor {
  Matrix F;
};

/// Arbitrary smooth sensor. `grad` must return the M x M_n layout.
struct CustomSensor {
  int obs_dim = 1;
  std::function<Vector(const Vector&)> eval;
  std::function<Matrix(const Vector&)> grad;
};

using Sensor = std::variant<SineSumSensor, LinearSensor, CustomSensor>;

/// Replaces the Gaussian draw of ζ_n. Receives the 0-based agent index.
using NoiseSampler = std::function<Vector(int, Rng&)>;

/// Per-agent observation model y_n(t) = f_n(θ) + ζ_n(t).
///
/// Gradients use the M x M_n layout: grad(n, θ)(i, j) = ∂[f_n(θ)]_j / ∂θ_i.
/// Noise covariances are validated SPD at construction; their inverses and
/// lower Cholesky factors are cached.
class SensingModel {
 public:
  SensingModel(int param_dim, std::vector<Sensor> sensors,
               std::vector<Matrix> noise_covs, NoiseSampler sampler = {});

  int n_agents() const { return static_cast<int>(sensors_.size()); }
  int param_dim() const { return param_dim_; }
  int obs_dim(int n) const;

  Vector eval(int n, const Vector& theta) const;
  Matrix grad(int n, const Vector& theta) const;

  const Sensor& sensor(int n) const { return sensors_.at(n); }
  const Matrix& noise_cov(int n) const { return noise_covs_.at(n); }
  const Matrix& noise_cov_inv(int n) const { return noise_cov_invs_.at(n); }
  /// Lower-triangular C_n with C_n C_nᵀ = R_n.
  const Matrix& noise_factor(int n) const { return noise_factors_.at(n); }
  bool has_custom_noise() const { return static_cast<bool>(sampler_); }

  /// Draws ζ_n: C_n z with z standard normal, or the user hook when set.
  Vector sample_noise(int n, Rng& rng) const;

 private:
  void check_agent(int n) const;

  int param_dim_;
  std::vector<Sensor> sensors_;
  std::vector<Matrix> noise_covs_;
  std::vector<Matrix> noise_cov_invs_;
  std::vector<Matrix> noise_factors_;
  NoiseSampler sampler_;
};

/// Agent n observes sin(θ_{i_n} + θ_{j_n}) with scalar noise variance.
/// `pairs` uses 1-based component indices.
SensingModel pairwise_sine_model(const std::vector<std::pair<int, int>>& pairs,
                                 double noise_variance, int param_dim);

/// f_n(θ) = F_n θ with covariance R_n.
SensingModel linear_model(const std::vector<Matrix>& matrices,
                          const std::vector<Matrix>& noise_covs);

/// y_n = f_n(θ) + ζ_n.
Vector sample_observation(const SensingModel& model, int n, const Vector& theta,
                          Rng& rng);

/// Central differences, same M x M_n layout as SensingModel::grad.
Matrix finite_difference_gradient(const SensingModel& model, int n,
                                  const Vector& theta,
                                  double h = kFiniteDifferenceStep);

/// Σ_n F_nᵀ R_n⁻¹ F_n for a model made only of linear sensors.
Matrix linear_information_matrix(const SensingModel& model);

/// Θ: either a box or all of R^M.
class FeasibleSet {
 public:
  enum class Kind { Box, WholeSpace };

  static FeasibleSet box(Vector lower, Vector upper);
  static FeasibleSet box(int dim, double lower, double upper);
  static FeasibleSet whole_space(int dim);

  Kind kind() const { return kind_; }
  bool bounded() const { return kind_ == Kind::Box; }
  int dim() const { return dim_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dim_) return false;
    if (kind_ == Kind::WholeSpace) return x.allFinite();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = static_cast<double>(x(i));
      if (!(v >= lower_(i) && v <= upper_(i))) return false;
    }
    return true;
  }

  template <typename Derived>
  bool interior(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dim_) return false;
    if (kind_ == Kind::WholeSpace) return x.allFinite();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = static_cast<double>(x(i));
      if (!(v > lower_(i) && v < upper_(i))) return false;
    }
    return true;
  }

  /// Uniform draw from a box.
  Vector sample(Rng& rng) const;

 private:
  FeasibleSet(Kind kind, int dim, Vector lower, Vector upper)
      : kind_(kind), dim_(dim), lower_(std::move(lower)), upper_(std::move(upper)) {}

  Kind kind_;
  int dim_;
  Vector lower_;
  Vector upper_;
};

/// Euclidean projection onto Θ: coordinatewise clamp for a box, identity
/// otherwise.
template <typename Derived>
VectorX<typename Derived::Scalar> project(const FeasibleSet& set,
                                          const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() != set.dim()) {
    throw ValidationError("projection input has dimension " +
                          std::to_string(x.size()) + ", set has " +
                          std::to_string(set.dim()));
  }
  if (set.kind() == FeasibleSet::Kind::WholeSpace) return x;
  return x.cwiseMax(set.lower().template cast<Scalar>())
      .cwiseMin(set.upper().template cast<Scalar>());
}

}  // namespace ciwnls
