#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ciwnls/experiment.hpp"
#include "ciwnls/sensing.hpp"
#include "support.hpp"

using namespace ciwnls;
using std::numbers::pi;

namespace {

SensingModel preset_model() { return pairwise_sine_model(paper_sensing_pairs(), 2.0, 5); }

}  // namespace

TEST_CASE("preset sensing model layout") {
  const auto model = preset_model();
  CHECK(model.n_agents() == 10);
  CHECK(model.param_dim() == 5);
  const std::vector<std::pair<int, int>> printed{{1, 2}, {3, 2}, {3, 4}, {4, 5}, {1, 5},
                                                 {1, 3}, {4, 2}, {3, 5}, {1, 4}, {1, 5}};
  CHECK(paper_sensing_pairs() == printed);
  for (int n = 0; n < 10; ++n) {
    CHECK(model.obs_dim(n) == 1);
    CHECK(model.noise_cov(n)(0, 0) == 2.0);
    CHECK(model.noise_cov_inv(n)(0, 0) == 0.5);
  }
  // Agents 5 and 10 share a sensing function.
  const Vector theta = paper_theta_true();
  CHECK(model.eval(4, theta)(0) == model.eval(9, theta)(0));
}

TEST_CASE("sine sensor at the origin") {
  const auto model = preset_model();
  const Vector zero = Vector::Zero(5);
  CHECK(model.eval(0, zero)(0) == 0.0);
  const Matrix g = model.grad(0, zero);
  CHECK(g.rows() == 5);
  CHECK(g.cols() == 1);
  CHECK(g.col(0) == test::vec({1, 1, 0, 0, 0}));
  const Matrix fd = finite_difference_gradient(model, 0, zero, 1e-5);
  CHECK((fd - g).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("sine sensor at theta*") {
  const auto model = preset_model();
  const Vector theta = paper_theta_true();
  CHECK(theta(2) == pi / 12);
  CHECK(model.eval(0, theta)(0) == doctest::Approx(std::sin(pi / 6 - pi / 7)).epsilon(1e-15));
  for (int n = 0; n < 10; ++n) {
    const Matrix fd = finite_difference_gradient(model, n, theta);
    CHECK((fd - model.grad(n, theta)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("sine model rejects bad arguments") {
  CHECK_THROWS_AS(pairwise_sine_model({{1, 6}}, 1.0, 5), ValidationError);
  CHECK_THROWS_AS(pairwise_sine_model({{0, 2}}, 1.0, 5), ValidationError);
  CHECK_THROWS_AS(pairwise_sine_model({{1, 2}}, 0.0, 5), ValidationError);
  CHECK_THROWS_AS(pairwise_sine_model({{1, 2}}, -1.0, 5), ValidationError);
}

TEST_CASE("scalar identity linear model") {
  const auto model = linear_model({Matrix::Identity(1, 1)}, {Matrix::Identity(1, 1)});
  const Vector theta = test::vec({0.7});
  CHECK(model.eval(0, theta)(0) == 0.7);
  CHECK(model.grad(0, theta)(0, 0) == 1.0);
}

TEST_CASE("linear gradients use the M x M_n layout") {
  Matrix f(2, 3);
  f << 1, 2, 3, 4, 5, 6;
  const auto model = linear_model({f}, {Matrix::Identity(2, 2)});
  Rng rng(1);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 5; ++k) {
    Vector theta(3);
    for (auto& v : theta) v = normal(rng);
    CHECK(model.grad(0, theta) == f.transpose());
    CHECK((finite_difference_gradient(model, 0, theta) - f.transpose()).cwiseAbs().maxCoeff() <=
          1e-9);
  }
}

TEST_CASE("linear information matrix and observability") {
  Matrix f1(1, 2);
  f1 << 1, 0;
  Matrix f2(1, 2);
  f2 << 0, 1;
  const auto both = linear_model({f1, f2}, {Matrix::Identity(1, 1), Matrix::Identity(1, 1)});
  CHECK(linear_information_matrix(both) == Matrix::Identity(2, 2));
  const auto one = linear_model({f1}, {Matrix::Identity(1, 1)});
  Eigen::FullPivLU<Matrix> lu(linear_information_matrix(one));
  CHECK(lu.rank() == 1);
}

TEST_CASE("linear model validation") {
  Matrix f(1, 2);
  f << 1, 1;
  CHECK_THROWS_AS(linear_model({f}, {Matrix::Identity(2, 2)}), ValidationError);
  Matrix not_spd(1, 1);
  not_spd << -1;
  CHECK_THROWS_AS(linear_model({f}, {not_spd}), ValidationError);
  Matrix asym(2, 2);
  asym << 2, 1, 0, 2;
  CHECK_THROWS_AS(linear_model({Matrix::Identity(2, 2)}, {asym}), ValidationError);
  CHECK_THROWS_AS(linear_model({f, Matrix::Identity(2, 2)}, {Matrix::Identity(1, 1)}),
                  ValidationError);
}

TEST_CASE("observation noise moments") {
  Matrix r(2, 2);
  r << 2.0, 0.6, 0.6, 1.0;
  const auto model = linear_model({Matrix::Identity(2, 2)}, {r});
  const Vector theta = test::vec({0.3, -0.2});
  Rng rng(2024);
  constexpr int kDraws = 100000;
  Vector sum = Vector::Zero(2);
  Matrix scatter = Matrix::Zero(2, 2);
  for (int k = 0; k < kDraws; ++k) {
    const Vector z = sample_observation(model, 0, theta, rng) - theta;
    sum += z;
    scatter += z * z.transpose();
  }
  const Vector mean = sum / kDraws;
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mean(i)) <= 4.0 * std::sqrt(r(i, i) / kDraws));
  const Matrix cov = scatter / kDraws - mean * mean.transpose();
  CHECK((cov - r).norm() / r.norm() <= 0.05);
}

TEST_CASE("observation sampling replays under a fixed seed") {
  const auto model = preset_model();
  Rng a(9);
  Rng b(9);
  const Vector theta = paper_theta_true();
  for (int n = 0; n < 10; ++n) {
    CHECK(sample_observation(model, n, theta, a) == sample_observation(model, n, theta, b));
  }
}

TEST_CASE("custom noise hook replaces the Gaussian sampler") {
  SensingModel model(1, {LinearSensor{Matrix::Identity(1, 1)}}, {Matrix::Identity(1, 1)},
                     [](int, Rng&) { return Vector::Constant(1, 0.25); });
  Rng rng(1);
  CHECK(model.has_custom_noise());
  CHECK(sample_observation(model, 0, test::vec({1.0}), rng)(0) == 1.25);
}

TEST_CASE("box projection clamps coordinates") {
  const auto box = FeasibleSet::box(5, -pi / 4, pi / 4);
  const Vector x = test::vec({pi / 2, -1.0, 0.1, 0.0, -0.2});
  const Vector p = project(box, x);
  CHECK(p(0) == pi / 4);
  CHECK(p(1) == -pi / 4);
  CHECK(p.tail(3) == x.tail(3));
  const Vector inside = test::vec({0.1, 0.2, -0.3, 0.4, -0.5});
  CHECK(project(box, inside) == inside);
}

TEST_CASE("whole-space projection is the identity") {
  const auto all = FeasibleSet::whole_space(3);
  const Vector x = test::vec({1e9, -3.0, 0.5});
  CHECK(project(all, x) == x);
  CHECK(all.contains(x));
}

TEST_CASE("projection works in extended precision") {
  const auto box = FeasibleSet::box(2, -1.0, 1.0);
  VectorX<long double> x(2);
  x << 2.0L, -0.5L;
  const VectorX<long double> p = project(box, x);
  CHECK(p(0) == 1.0L);
  CHECK(p(1) == -0.5L);
}

TEST_CASE("projection is non-expansive and idempotent") {
  const auto box = FeasibleSet::box(5, -pi / 4, pi / 4);
  Rng rng(17);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int k = 0; k < 10000; ++k) {
    Vector x(5);
    Vector y(5);
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    const Vector px = project(box, x);
    CHECK((px - project(box, y)).norm() <= (x - y).norm());
    CHECK(project(box, px) == px);
    CHECK(box.contains(px));
  }
}

TEST_CASE("feasible set validation") {
  CHECK_THROWS_AS(FeasibleSet::box(test::vec({0, 1}), test::vec({1, 1})), ValidationError);
  CHECK_THROWS_AS(FeasibleSet::box(test::vec({0}), test::vec({1, 1})), ValidationError);
  CHECK_THROWS_AS(project(FeasibleSet::box(2, 0, 1), test::vec({0.5})), ValidationError);
}

TEST_CASE("interior excludes the boundary") {
  const auto box = FeasibleSet::box(2, -1.0, 1.0);
  CHECK(box.interior(test::vec({0.0, 0.5})));
  CHECK_FALSE(box.interior(test::vec({1.0, 0.5})));
  CHECK(box.contains(test::vec({1.0, 0.5})));
}
