#include "ciwnls/sensing.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ciwnls {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int sensor_obs_dim(const Sensor& s) {
  return std::visit(overloaded{
                        [](const SineSumSensor&) { return 1; },
                        [](const LinearSensor& l) { return static_cast<int>(l.F.rows()); },
                        [](const CustomSensor& c) { return c.obs_dim; },
                    },
                    s);
}

}  // namespace

SensingModel::SensingModel(int param_dim, std::vector<Sensor> sensors,
                           std::vector<Matrix> noise_covs, NoiseSampler sampler)
    : param_dim_(param_dim),
      sensors_(std::move(sensors)),
      noise_covs_(std::move(noise_covs)),
      sampler_(std::move(sampler)) {
  if (param_dim < 1) {
    throw ValidationError("param_dim must be positive, got " + std::to_string(param_dim));
  }
  if (sensors_.empty()) throw ValidationError("sensing model needs at least one agent");
  if (noise_covs_.size() != sensors_.size()) {
    throw ValidationError("got " + std::to_string(noise_covs_.size()) +
                          " noise covariances for " + std::to_string(sensors_.size()) +
                          " agents");
  }
  for (std::size_t n = 0; n < sensors_.size(); ++n) {
    const std::string who = "agent " + std::to_string(n + 1);
    if (const auto* s = std::get_if<SineSumSensor>(&sensors_[n])) {
      if (s->i < 0 || s->i >= param_dim || s->j < 0 || s->j >= param_dim) {
        throw ValidationError(who + ": component index outside [1.." +
                              std::to_string(param_dim) + "]");
      }
    } else if (const auto* l = std::get_if<LinearSensor>(&sensors_[n])) {
      if (l->F.cols() != param_dim || l->F.rows() < 1) {
        throw ValidationError(who + ": sensing matrix is " + std::to_string(l->F.rows()) +
                              "x" + std::to_string(l->F.cols()) + ", expected M_n x " +
                              std::to_string(param_dim));
      }
    } else if (const auto* c = std::get_if<CustomSensor>(&sensors_[n])) {
      if (!c->eval || !c->grad || c->obs_dim < 1) {
        throw ValidationError(who + ": custom sensor needs eval, grad and obs_dim >= 1");
      }
    }
    const Matrix& R = noise_covs_[n];
    const int m_n = sensor_obs_dim(sensors_[n]);
    if (R.rows() != m_n || R.cols() != m_n) {
      throw ValidationError(who + ": noise covariance is " + std::to_string(R.rows()) +
                            "x" + std::to_string(R.cols()) + ", expected " +
                            std::to_string(m_n) + "x" + std::to_string(m_n));
    }
    if (!R.allFinite() || !R.isApprox(R.transpose(), 1e-12)) {
      throw ValidationError(who + ": noise covariance is not symmetric");
    }
    Eigen::LLT<Matrix> llt(R);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(R, Eigen::EigenvaluesOnly);
    if (llt.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
      throw ValidationError(who + ": noise covariance is not positive definite");
    }
    noise_factors_.push_back(llt.matrixL());
    // LU keeps scalar inverses exact (1/2 rather than (1/√2)²).
    const Matrix inv = R.partialPivLu().inverse();
    noise_cov_invs_.push_back((inv + inv.transpose()) / 2.0);
  }
}

void SensingModel::check_agent(int n) const {
  if (n < 0 || n >= n_agents()) {
    throw IndexError("agent " + std::to_string(n + 1) + " outside [1.." +
                     std::to_string(n_agents()) + "]");
  }
}

int SensingModel::obs_dim(int n) const {
  check_agent(n);
  return sensor_obs_dim(sensors_[n]);
}

Vector SensingModel::eval(int n, const Vector& theta) const {
  check_agent(n);
  return std::visit(overloaded{
                        [&](const SineSumSensor& s) -> Vector {
                          return Vector::Constant(1, std::sin(theta(s.i) + theta(s.j)));
                        },
                        [&](const LinearSensor& l) -> Vector { return l.F * theta; },
                        [&](const CustomSensor& c) -> Vector { return c.eval(theta); },
                    },
                    sensors_[n]);
}

Matrix SensingModel::grad(int n, const Vector& theta) const {
  check_agent(n);
  return std::visit(overloaded{
                        [&](const SineSumSensor& s) -> Matrix {
                          Matrix g = Matrix::Zero(param_dim_, 1);
                          const double c = std::cos(theta(s.i) + theta(s.j));
                          g(s.i, 0) += c;
                          g(s.j, 0) += c;
                          return g;
                        },
                        [&](const LinearSensor& l) -> Matrix { return l.F.transpose(); },
                        [&](const CustomSensor& c) -> Matrix { return c.grad(theta); },
                    },
                    sensors_[n]);
}

Vector SensingModel::sample_noise(int n, Rng& rng) const {
  check_agent(n);
  if (sampler_) return sampler_(n, rng);
  std::normal_distribution<double> normal;
  Vector z(noise_factors_[n].rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
  return noise_factors_[n] * z;
}

SensingModel pairwise_sine_model(const std::vector<std::pair<int, int>>& pairs,
                                 double noise_variance, int param_dim) {
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw ValidationError("variance must be positive, got " + std::to_string(noise_variance));
  }
  std::vector<Sensor> sensors;
  std::vector<Matrix> covs;
  for (const auto& [i, j] : pairs) {
    if (i < 1 || i > param_dim || j < 1 || j > param_dim) {
      throw ValidationError("pair (" + std::to_string(i) + "," + std::to_string(j) +
                            ") has a component outside [1.." + std::to_string(param_dim) +
                            "]");
    }
    sensors.emplace_back(SineSumSensor{i - 1, j - 1});
    covs.push_back(Matrix::Constant(1, 1, noise_variance));
  }
  return SensingModel(param_dim, std::move(sensors), std::move(covs));
}

SensingModel linear_model(const std::vector<Matrix>& matrices,
                          const std::vector<Matrix>& noise_covs) {
  if (matrices.empty()) throw ValidationError("linear model needs at least one agent");
  const auto param_dim = static_cast<int>(matrices.front().cols());
  std::vector<Sensor> sensors;
  for (const auto& F : matrices) sensors.emplace_back(LinearSensor{F});
  return SensingModel(param_dim, std::move(sensors), noise_covs);
}

Vector sample_observation(const SensingModel& model, int n, const Vector& theta,
                          Rng& rng) {
  return model.eval(n, theta) + model.sample_noise(n, rng);
}

Matrix finite_difference_gradient(const SensingModel& model, int n,
                                  const Vector& theta, double h) {
  const int m = model.param_dim();
  Matrix g(m, model.obs_dim(n));
  Vector probe = theta;
  for (int i = 0; i < m; ++i) {
    probe(i) = theta(i) + h;
    const Vector up = model.eval(n, probe);
    probe(i) = theta(i) - h;
    const Vector down = model.eval(n, probe);
    probe(i) = theta(i);
    g.row(i) = ((up - down) / (2.0 * h)).transpose();
  }
  return g;
}

Matrix linear_information_matrix(const SensingModel& model) {
  const int m = model.param_dim();
  Matrix info = Matrix::Zero(m, m);
  for (int n = 0; n < model.n_agents(); ++n) {
    const auto* l = std::get_if<LinearSensor>(&model.sensor(n));
    if (l == nullptr) {
      throw ValidationError("agent " + std::to_string(n + 1) + " is not a linear sensor");
    }
    info += l->F.transpose() * model.noise_cov_inv(n) * l->F;
  }
  return info;
}

FeasibleSet FeasibleSet::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw ValidationError("box bounds have sizes " + std::to_string(lower.size()) +
                          " and " + std::to_string(upper.size()));
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) < upper(i))) {
      throw ValidationError("box coordinate " + std::to_string(i + 1) +
                            " needs finite lower < upper");
    }
  }
  const auto dim = static_cast<int>(lower.size());
  return FeasibleSet(Kind::Box, dim, std::move(lower), std::move(upper));
}

FeasibleSet FeasibleSet::box(int dim, double lower, double upper) {
  return box(Vector::Constant(dim, lower), Vector::Constant(dim, upper));
}

FeasibleSet FeasibleSet::whole_space(int dim) {
  if (dim < 1) throw ValidationError("whole-space dimension must be positive");
  const double inf = std::numeric_limits<double>::infinity();
  return FeasibleSet(Kind::WholeSpace, dim, Vector::Constant(dim, -inf),
                     Vector::Constant(dim, inf));
}

Vector FeasibleSet::sample(Rng& rng) const {
  if (!bounded()) throw ValidationError("cannot sample uniformly from an unbounded set");
  Vector x(dim_);
  for (int i = 0; i < dim_; ++i) {
    std::uniform_real_distribution<double> u(lower_(i), upper_(i));
    x(i) = u(rng);
  }
  return x;
}

}  // namespace ciwnls
