#include "ciwnls/estimator.hpp"

#include <ostream>
#include <string>

namespace ciwnls {

double delta1_upper_bound(double epsilon1) {
  if (!(epsilon1 > 0.0)) {
    throw ValidationError("epsilon1 must be positive, got " + std::to_string(epsilon1));
  }
  return 0.5 - 1.0 / (2.0 + epsilon1);
}

GainSchedule::GainSchedule(double a, double b, double delta1, double epsilon1)
    : a_(a), b_(b), delta1_(delta1), epsilon1_(epsilon1) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw ValidationError("a must be positive, got " + std::to_string(a));
  }
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw ValidationError("b must be positive, got " + std::to_string(b));
  }
  const double bound = delta1_upper_bound(epsilon1);
  if (!(delta1 > 0.0 && delta1 < bound)) {
    throw ValidationError("delta1 must lie in (0, " + format_double(bound) + "), got " +
                          format_double(delta1));
  }
}

EstimatorState replicate_state(const Vector& initial, int n_agents) {
  return EstimatorState{0, initial.replicate(n_agents, 1)};
}

Vector consensus_term(const NetworkGraph& graph, const Vector& x, int param_dim, int n) {
  const auto xn = x.segment(n * param_dim, param_dim);
  Vector acc = Vector::Zero(param_dim);
  for (int l : graph.neighbors(n)) acc += xn - x.segment(l * param_dim, param_dim);
  return acc;
}

Vector innovation_term(const SensingModel& model, int n, const Vector& x_n,
                       const Vector& y_n) {
  if (y_n.size() != model.obs_dim(n)) {
    throw ValidationError("agent " + std::to_string(n + 1) + ": observation has size " +
                          std::to_string(y_n.size()) + ", expected " +
                          std::to_string(model.obs_dim(n)));
  }
  return model.grad(n, x_n) * (model.noise_cov_inv(n) * (model.eval(n, x_n) - y_n));
}

namespace {

void check_inputs(const EstimatorState& state, const NetworkGraph& graph,
                  const SensingModel& model, const std::vector<Vector>& observations) {
  const int n = graph.n_agents();
  if (model.n_agents() != n) {
    throw ValidationError("graph has " + std::to_string(n) + " agents, model has " +
                          std::to_string(model.n_agents()));
  }
  if (state.x.size() != static_cast<Eigen::Index>(n) * model.param_dim()) {
    throw ValidationError("state has size " + std::to_string(state.x.size()) +
                          ", expected " + std::to_string(n * model.param_dim()));
  }
  if (static_cast<int>(observations.size()) != n) {
    throw ValidationError("got " + std::to_string(observations.size()) +
                          " observations for " + std::to_string(n) + " agents");
  }
}

EstimatorState finish(const EstimatorState& state, Vector x_hat, const FeasibleSet& set,
                      int param_dim) {
  const int n_agents = static_cast<int>(x_hat.size() / param_dim);
  for (int n = 0; n < n_agents; ++n) {
    auto blk = x_hat.segment(n * param_dim, param_dim);
    if (!blk.allFinite()) {
      throw DivergenceError("non-finite estimate at epoch " + std::to_string(state.t) +
                                ", agent " + std::to_string(n + 1),
                            state.t, n);
    }
    blk = project(set, blk);
  }
  return EstimatorState{state.t + 1, std::move(x_hat)};
}

}  // namespace

Vector innovate(const EstimatorState& state, const NetworkGraph& graph,
                const SensingModel& model, const GainSchedule& schedule,
                const std::vector<Vector>& observations) {
  check_inputs(state, graph, model, observations);
  const int m = model.param_dim();
  const double b_t = beta(schedule, state.t);
  const double a_t = alpha(schedule, state.t);
  Vector x_hat(state.x.size());
  for (int n = 0; n < graph.n_agents(); ++n) {
    const Vector xn = state.x.segment(n * m, m);
    const Vector c = consensus_term(graph, state.x, m, n);
    const Vector g = innovation_term(model, n, xn, observations[n]);
    x_hat.segment(n * m, m) = xn - b_t * c - a_t * g;
  }
  return x_hat;
}

Vector innovate_stacked(const EstimatorState& state, const NetworkGraph& graph,
                        const SensingModel& model, const GainSchedule& schedule,
                        const std::vector<Vector>& observations) {
  check_inputs(state, graph, model, observations);
  const int m = model.param_dim();
  const int n_agents = graph.n_agents();
  Eigen::Map<const Matrix> X(state.x.data(), m, n_agents);

  // Edge differences Bᵀx, then scatter back with B. Edges are sorted, so every
  // agent accumulates its neighbors in ascending order.
  Matrix C = Matrix::Zero(m, n_agents);
  for (const auto& [u, v] : graph.edges()) {
    const Vector d = X.col(u) - X.col(v);
    C.col(u) += d;
    C.col(v) += X.col(v) - X.col(u);
  }

  // Residual y − f(x), then G(x) R⁻¹ applied blockwise.
  Matrix GR(m, n_agents);
  for (int n = 0; n < n_agents; ++n) {
    const Vector xn = X.col(n);
    const Vector weighted = model.noise_cov_inv(n) * (model.eval(n, xn) - observations[n]);
    GR.col(n) = model.grad(n, xn) * weighted;
  }

  const double b_t = beta(schedule, state.t);
  const double a_t = alpha(schedule, state.t);
  Matrix Xhat = X - b_t * C - a_t * GR;
  return Eigen::Map<Vector>(Xhat.data(), Xhat.size());
}

EstimatorState step(const EstimatorState& state, const NetworkGraph& graph,
                    const SensingModel& model, const GainSchedule& schedule,
                    const FeasibleSet& set, const std::vector<Vector>& observations) {
  return finish(state, innovate(state, graph, model, schedule, observations), set,
                model.param_dim());
}

EstimatorState step_stacked(const EstimatorState& state, const NetworkGraph& graph,
                            const SensingModel& model, const GainSchedule& schedule,
                            const FeasibleSet& set,
                            const std::vector<Vector>& observations) {
  return finish(state, innovate_stacked(state, graph, model, schedule, observations),
                set, model.param_dim());
}

std::vector<Vector> sample_network_observations(const SensingModel& model,
                                                const Vector& theta, Rng& rng) {
  std::vector<Vector> ys;
  ys.reserve(model.n_agents());
  for (int n = 0; n < model.n_agents(); ++n) {
    ys.push_back(sample_observation(model, n, theta, rng));
  }
  return ys;
}

std::vector<EstimatorState> run(const EstimatorState& initial, long horizon,
                                const NetworkGraph& graph, const SensingModel& model,
                                const GainSchedule& schedule, const FeasibleSet& set,
                                const Vector& theta_true, Rng& rng, RecordStride stride,
                                const std::function<void(const EstimatorState&)>& on_step) {
  if (horizon < 0) throw ValidationError("horizon must be non-negative");
  std::vector<EstimatorState> trajectory{initial};
  EstimatorState state = initial;
  for (long k = 0; k < horizon; ++k) {
    const auto ys = sample_network_observations(model, theta_true, rng);
    state = step(state, graph, model, schedule, set, ys);
    if (on_step) on_step(state);
    if (stride.keep(state.t, initial.t + horizon)) trajectory.push_back(state);
  }
  return trajectory;
}

void write_trajectory_csv(std::ostream& out, const std::vector<EstimatorState>& trajectory,
                          int param_dim) {
  out << "epoch,agent,coordinate,value\n";
  for (const auto& s : trajectory) {
    const int n_agents = s.n_agents(param_dim);
    for (int n = 0; n < n_agents; ++n) {
      for (int i = 0; i < param_dim; ++i) {
        out << s.t << ',' << n + 1 << ',' << i + 1 << ','
            << format_double(s.x(n * param_dim + i)) << '\n';
      }
    }
  }
}

void write_trajectory_summary_csv(std::ostream& out,
                                  const std::vector<EstimatorState>& trajectory,
                                  const Vector& theta_true) {
  const auto m = static_cast<int>(theta_true.size());
  out << "epoch,agent,error_norm,scaled_sq_error\n";
  for (const auto& s : trajectory) {
    for (int n = 0; n < s.n_agents(m); ++n) {
      const double err = (s.block(n, m) - theta_true).norm();
      out << s.t << ',' << n + 1 << ',' << format_double(err) << ','
          << format_double(static_cast<double>(s.t + 1) * err * err) << '\n';
    }
  }
}

}  // namespace ciwnls
