#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <vector>

#include "ciwnls/common.hpp"
#include "ciwnls/graph.hpp"
#include "ciwnls/sensing.hpp"

namespace ciwnls {

/// Upper limit for δ₁ given the noise moment exponent ε₁: 1/2 − 1/(2+ε₁).
double delta1_upper_bound(double epsilon1);

/// Gain constants for β_t = b/(t+1)^δ₁ and α_t = a/(t+1).
class GainSchedule {
 public:
  /// Throws ValidationError unless a > 0, b > 0, ε₁ > 0 and
  /// 0 < δ₁ < 1/2 − 1/(2+ε₁).
  GainSchedule(double a, double b, double delta1, double epsilon1);

  double a() const { return a_; }
  double b() const { return b_; }
  double delta1() const { return delta1_; }
  double epsilon1() const { return epsilon1_; }

 private:
  double a_;
  double b_;
  double delta1_;
  double epsilon1_;
};

/// Innovation weight α_t.
inline double alpha(const GainSchedule& s, long t) {
  return s.a() / static_cast<double>(t + 1);
}

/// Consensus weight β_t.
inline double beta(const GainSchedule& s, long t) {
  return s.b() / std::pow(static_cast<double>(t + 1), s.delta1());
}

/// Network estimate x(t), stacked agent-major: block n is x[n*M, (n+1)*M).
struct EstimatorState {
  long t = 0;
  Vector x;

  int n_agents(int param_dim) const { return static_cast<int>(x.size() / param_dim); }
  auto block(int n, int param_dim) const { return x.segment(n * param_dim, param_dim); }
  auto block(int n, int param_dim) { return x.segment(n * param_dim, param_dim); }
};

/// Every agent starts at `initial`.
EstimatorState replicate_state(const Vector& initial, int n_agents);

/// Σ_{l∈Ω_n} (x_n − x_l), accumulated in ascending neighbor order.
Vector consensus_term(const NetworkGraph& graph, const Vector& x, int param_dim, int n);

/// ∇f_n(x_n) R_n⁻¹ (f_n(x_n) − y_n).
Vector innovation_term(const SensingModel& model, int n, const Vector& x_n,
                       const Vector& y_n);

/// Pre-projection iterate x̂(t+1), computed agent by agent.
Vector innovate(const EstimatorState& state, const NetworkGraph& graph,
                const SensingModel& model, const GainSchedule& schedule,
                const std::vector<Vector>& observations);

/// Same quantity as `innovate`, evaluated on whole stacked vectors: the
/// consensus part as (B ⊗ I)(Bᵀ ⊗ I) x with B the edge incidence matrix and the
/// innovation part as G(x) R⁻¹ (y − f(x)). Bitwise equal to `innovate`.
Vector innovate_stacked(const EstimatorState& state, const NetworkGraph& graph,
                        const SensingModel& model, const GainSchedule& schedule,
                        const std::vector<Vector>& observations);

/// One CIWNLS epoch: x(t+1) = P_Θ[x̂(t+1)] for every agent, t incremented.
/// Throws DivergenceError on non-finite intermediates.
EstimatorState step(const EstimatorState& state, const NetworkGraph& graph,
                    const SensingModel& model, const GainSchedule& schedule,
                    const FeasibleSet& set, const std::vector<Vector>& observations);

/// Stacked-evaluation counterpart of `step`.
EstimatorState step_stacked(const EstimatorState& state, const NetworkGraph& graph,
                            const SensingModel& model, const GainSchedule& schedule,
                            const FeasibleSet& set,
                            const std::vector<Vector>& observations);

/// Which epochs a trajectory keeps: all t <= dense_until, then every `every`-th,
/// plus the final epoch.
struct RecordStride {
  long dense_until = 1000;
  long every = 10;

  bool keep(long t, long horizon) const {
    return t <= dense_until || (every > 0 && t % every == 0) || t == horizon;
  }
};

/// One fresh observation per agent, drawn agent-major from `rng`.
std::vector<Vector> sample_network_observations(const SensingModel& model,
                                                const Vector& theta, Rng& rng);

/// Drives `step` for `horizon` epochs with observations sampled at
/// `theta_true`. The trajectory always starts with the initial state.
/// `on_step`, when set, sees every state (recorded or not).
std::vector<EstimatorState> run(
    const EstimatorState& initial, long horizon, const NetworkGraph& graph,
    const SensingModel& model, const GainSchedule& schedule, const FeasibleSet& set,
    const Vector& theta_true, Rng& rng, RecordStride stride = {},
    const std::function<void(const EstimatorState&)>& on_step = {});

/// CSV with columns epoch,agent,coordinate,value (1-based agent/coordinate).
void write_trajectory_csv(std::ostream& out, const std::vector<EstimatorState>& trajectory,
                          int param_dim);

/// CSV with columns epoch,agent,error_norm,scaled_sq_error.
void write_trajectory_summary_csv(std::ostream& out,
                                  const std::vector<EstimatorState>& trajectory,
                                  const Vector& theta_true);

}  // namespace ciwnls
