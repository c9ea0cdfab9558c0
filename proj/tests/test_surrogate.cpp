#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "rfms/error.hpp"
#include "rfms/seeds.hpp"
#include "rfms/surrogate.hpp"

using namespace rfms;

namespace {

GpFitOptions fixed_kernel(std::size_t d, double lengthscale, double variance, bool standardize) {
  GpFitOptions o;
  o.fixed = KernelParams{Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), lengthscale), variance};
  o.standardize = standardize;
  return o;
}

Eigen::MatrixXd random_inputs(std::size_t m, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  return x;
}

std::vector<double> row(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) out[static_cast<std::size_t>(j)] = x(i, j);
  return out;
}

// Standard normal pdf and cdf written out independently of the library.
double pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double cdf(double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("matern 5/2 closed form") {
  KernelParams k{Eigen::Vector2d(0.5, 2.0), 1.7};
  const Eigen::Vector2d a(0.1, 0.3), b(0.4, 0.9);
  const double r = std::sqrt(std::pow(0.3 / 0.5, 2) + std::pow(0.6 / 2.0, 2));
  const double expected = 1.7 * (1 + std::sqrt(5.0) * r + 5.0 * r * r / 3.0) * std::exp(-std::sqrt(5.0) * r);
  CHECK(matern52(a, b, k) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(matern52(a, a, k) == 1.7);
}

TEST_CASE("one-point GP interpolates up to the nugget") {
  for (double y : {0.3, -2.0, 5.5}) {
    Eigen::MatrixXd x(1, 2);
    x << 0.4, 0.6;
    const auto model = gp_fit(x, Eigen::VectorXd::Constant(1, y), fixed_kernel(2, 0.3, 1.0, false));
    const auto p = gp_predict(model, row(x, 0));
    // Hand solution of the 1x1 system: k0 / (k0 + nugget).
    CHECK(p.mean == doctest::Approx(y * 1.0 / (1.0 + 1e-6)).epsilon(1e-12));
    CHECK(std::abs(p.mean - y) <= 1e-3 * std::max(1.0, std::abs(y)));
    CHECK(p.sd * p.sd <= 1e-4 * 1.0);
    CHECK(p.sd * p.sd == doctest::Approx(1e-6 / (1.0 + 1e-6)).epsilon(1e-6));
  }
}

TEST_CASE("fitted GP interpolates its training data") {
  const auto x = random_inputs(15, 3, 4);
  Eigen::VectorXd y(15);
  for (Eigen::Index i = 0; i < 15; ++i) y[i] = std::sin(4 * x(i, 0)) + x(i, 1) * x(i, 2);
  const auto model = gp_fit(x, y);
  for (Eigen::Index i = 0; i < 15; ++i) CHECK(std::abs(gp_predict(model, row(x, i)).mean - y[i]) <= 1e-3);
}

TEST_CASE("constant targets give a constant posterior mean") {
  Eigen::MatrixXd x(2, 2);
  x << 0.1, 0.2, 0.8, 0.7;
  const auto model = gp_fit(x, Eigen::Vector2d(0.42, 0.42));
  CHECK(model.degenerate_targets());
  const auto probe = random_inputs(50, 2, 9);
  for (Eigen::Index i = 0; i < probe.rows(); ++i)
    CHECK(gp_predict(model, row(probe, i)).mean == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("far from the data the posterior reverts to the prior") {
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 0.02, 0.05;
  const Eigen::Vector3d y(1.0, 2.0, 4.0);
  const auto model = gp_fit(x, y, fixed_kernel(1, 0.01, 2.0, true));
  const std::vector<double> far{1.0};
  const auto p = gp_predict(model, far);
  CHECK(std::abs(p.mean - y.mean()) <= 1e-6);
  CHECK(std::abs(p.sd - model.target_scale() * std::sqrt(2.0)) <= 1e-6);
}

TEST_CASE("symmetric data gives a symmetric posterior") {
  Eigen::MatrixXd x(3, 1);
  x << 0.2, 0.5, 0.8;
  const auto model = gp_fit(x, Eigen::Vector3d(1.0, 0.0, 1.0));
  for (double t : {0.0, 0.1, 0.25, 0.4}) {
    const std::vector<double> a{0.5 - t}, b{0.5 + t};
    CHECK(gp_predict(model, a).mean == doctest::Approx(gp_predict(model, b).mean).epsilon(1e-9));
  }
  // Two points with equal targets: the midpoint carries the same value.
  Eigen::MatrixXd two(2, 1);
  two << 0.3, 0.7;
  const std::vector<double> mid{0.5};
  CHECK(gp_predict(gp_fit(two, Eigen::Vector2d(0.6, 0.6)), mid).mean == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("selected hyperparameters beat every random start") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto x = random_inputs(20, 2, seed);
    Eigen::VectorXd y(20);
    for (Eigen::Index i = 0; i < 20; ++i) y[i] = std::cos(6 * x(i, 0)) + 0.1 * x(i, 1);
    GpFitOptions o;
    o.seed = seed;
    const auto model = gp_fit(x, y, o);
    REQUIRE(model.start_log_likelihoods().size() == 64);
    for (double l : model.start_log_likelihoods()) CHECK(model.log_marginal_likelihood() >= l);
  }
}

TEST_CASE("posterior mean is linear in the targets") {
  const auto x = random_inputs(10, 2, 5);
  Eigen::VectorXd y(10);
  for (Eigen::Index i = 0; i < 10; ++i) y[i] = x(i, 0) - 2 * x(i, 1);
  const auto opts = fixed_kernel(2, 0.4, 1.0, false);
  const auto m1 = gp_fit(x, y, opts);
  const auto m2 = gp_fit(x, 2 * y, opts);
  const auto probe = random_inputs(30, 2, 6);
  for (Eigen::Index i = 0; i < probe.rows(); ++i)
    CHECK(std::abs(gp_predict(m2, row(probe, i)).mean - 2 * gp_predict(m1, row(probe, i)).mean) <= 1e-8);
}

TEST_CASE("fit rejects bad input and escalates the nugget") {
  CHECK_THROWS_AS(gp_fit(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)), InvalidInput);
  CHECK_THROWS_AS(gp_fit(Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(2)), InvalidInput);
  Eigen::MatrixXd x(4, 1);
  x << 0.5, 0.5, 0.5, 0.5;  // duplicates with conflicting targets
  const auto model = gp_fit(x, Eigen::Vector4d(0.0, 1.0, 0.0, 1.0));
  CHECK(model.nugget() >= 1e-6);
  CHECK(model.nugget() <= 1e-2);
  const std::vector<double> p{0.5};
  CHECK(gp_predict(model, p).mean == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("expected improvement closed form") {
  CHECK(std::abs(expected_improvement(0.0, 1.0, 0.0) - 0.3989422804) <= 1e-9);
  CHECK(expected_improvement(1.0, 0.0, 0.5) == 0.0);
  CHECK(expected_improvement(0.2, 0.0, 0.5) == doctest::Approx(0.3));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.0, 2.0);
  for (int i = 0; i < 10000; ++i) {
    const double mu = u(rng), sd = s(rng), fmin = u(rng);
    const double ei = expected_improvement(mu, sd, fmin);
    CHECK(ei >= 0.0);
    if (sd > 1e-3) {
      const double z = (fmin - mu) / sd;
      CHECK(ei == doctest::Approx((fmin - mu) * cdf(z) + sd * pdf(z)).epsilon(1e-9));
    }
  }
}

TEST_CASE("expected improvement vanishes as the sd shrinks above the incumbent") {
  double previous = std::numeric_limits<double>::infinity();
  for (double sd : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    const double ei = expected_improvement(0.3, sd, 0.2);
    CHECK(ei <= previous);
    previous = ei;
  }
  CHECK(previous < 1e-12);
}

TEST_CASE("proposal on a constant model is the first candidate") {
  Eigen::MatrixXd x(2, 2);
  x << 0.1, 0.2, 0.8, 0.7;
  const auto model = gp_fit(x, Eigen::Vector2d(0.3, 0.3));
  Rng rng(77);
  const double u0 = uniform01(rng), u1 = uniform01(rng);
  const auto p = propose_encoded(model, 77);
  CHECK(p == std::vector<double>{u0, u1});
}

TEST_CASE("1-d proposal lands near the low point") {
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 0.5, 1.0;
  const Eigen::Vector3d y(1.0, 0.0, 1.0);
  const auto model = gp_fit(x, y);
  // Dense-grid oracle of the EI argmax.
  double best_x = 0.0, best_ei = -1.0;
  for (int i = 0; i <= 100000; ++i) {
    const std::vector<double> g{i / 100000.0};
    const double ei = expected_improvement(model, g, 0.0);
    if (ei > best_ei) {
      best_ei = ei;
      best_x = g[0];
    }
  }
  CHECK(std::abs(best_x - 0.5) <= 0.25);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = propose_encoded(model, seed);
    CHECK(std::abs(p[0] - 0.5) <= 0.25);
    const std::vector<double> at{p[0]};
    CHECK(expected_improvement(model, at, 0.0) >= best_ei * (1 - 1e-3));
  }
}

TEST_CASE("proposals stay in the box and are deterministic") {
  const auto& space = HyperParamSpace::for_learner(LearnerKind::random_forest);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto x = random_inputs(8, 3, t);
    Eigen::VectorXd y(8);
    for (Eigen::Index i = 0; i < 8; ++i) y[i] = x(i, 0) + x(i, 1) * x(i, 1) - x(i, 2);
    GpFitOptions o;
    o.starts = 8;
    ProposeOptions p;
    p.candidates = 200;
    const auto model = gp_fit(x, y, o);
    const auto c = propose(model, space, t, p);
    for (double u : c.encoded()) {
      CHECK(u >= 0.0);
      CHECK(u <= 1.0);
    }
    if (t < 5) CHECK(propose(model, space, t, p) == c);
  }
}
