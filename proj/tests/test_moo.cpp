#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "rfms/error.hpp"
#include "rfms/moo.hpp"

using namespace rfms;

namespace {

std::vector<ObjectiveVector> random_points(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ObjectiveVector> pts(n, ObjectiveVector(k));
  for (auto& p : pts)
    for (auto& v : p) v = u(rng);
  return pts;
}

bool brute_dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  bool strict = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] < b[j]) return false;
    if (a[j] > b[j]) strict = true;
  }
  return strict;
}

}  // namespace

TEST_CASE("pareto front of the four-point fixture") {
  const std::vector<ObjectiveVector> pts{{0.9, 0.1}, {0.5, 0.5}, {0.1, 0.9}, {0.4, 0.4}};
  const auto front = pareto_front(pts, Orientation::maximize);
  CHECK(front.points == std::vector<ObjectiveVector>{{0.9, 0.1}, {0.5, 0.5}, {0.1, 0.9}});
  CHECK(pareto_front(std::vector<ObjectiveVector>{{0.3, 0.3}}, Orientation::maximize).points.size() == 1);
  CHECK(pareto_front(std::vector<ObjectiveVector>{}, Orientation::maximize).points.empty());

  const std::vector<ObjectiveVector> dup{{0.5, 0.5}, {0.5, 0.5}, {0.2, 0.9}};
  CHECK(pareto_indices(dup, Orientation::maximize) == std::vector<std::size_t>{0, 2});
  CHECK(pareto_indices(dup, Orientation::minimize) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("pareto front matches a brute-force filter and is idempotent") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto pts = random_points(50, 3, rng);
    std::vector<ObjectiveVector> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size(); ++j) dominated |= brute_dominates(pts[j], pts[i]);
      if (!dominated) expected.push_back(pts[i]);
    }
    const auto front = pareto_front(pts, Orientation::maximize);
    CHECK(front.points == expected);
    CHECK(pareto_front(front.points, Orientation::maximize).points == front.points);
  }
}

TEST_CASE("hypervolume fixtures") {
  const std::vector<double> o3{0, 0, 0}, o2{0, 0};
  CHECK(hypervolume(std::vector<ObjectiveVector>{{1, 1, 1}}, o3) == 1.0);
  CHECK(hypervolume(std::vector<ObjectiveVector>{{0.8, 0.5, 0.5}}, o3) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(hypervolume(std::vector<ObjectiveVector>{{1, 0.5}, {0.5, 1}}, o2) == 0.75);
  CHECK(hypervolume(std::vector<ObjectiveVector>{{1, 0.5}, {0.5, 1}, {0.4, 0.4}}, o2) == 0.75);
  // Points not above the reference are dropped.
  CHECK(hypervolume(std::vector<ObjectiveVector>{{1, 0.0}, {0.5, 0.5}}, o2) == 0.25);
  CHECK(hypervolume(std::vector<ObjectiveVector>{}, o2) == 0.0);
  CHECK_THROWS_AS(hypervolume(std::vector<ObjectiveVector>{{1, 1}}, o3), InvalidInput);
  CHECK_THROWS_AS(hypervolume(std::vector<ObjectiveVector>{{1, 1, 1, 1}}, std::vector<double>{0, 0, 0, 0}),
                  InvalidInput);
  // Union of two 3-D boxes by inclusion-exclusion: 0.081 + 0.081 - 0.009.
  CHECK(hypervolume(std::vector<ObjectiveVector>{{0.9, 0.9, 0.1}, {0.1, 0.9, 0.9}}, o3) ==
        doctest::Approx(0.153).epsilon(1e-14));
}

TEST_CASE("hypervolume is monotone under adding points") {
  std::mt19937_64 rng(2);
  const std::vector<double> o3{0, 0, 0};
  for (int t = 0; t < 100; ++t) {
    auto pts = random_points(8, 3, rng);
    const double before = hypervolume(pts, o3);
    pts.push_back(random_points(1, 3, rng)[0]);
    CHECK(hypervolume(pts, o3) >= before - 1e-15);
  }
}

TEST_CASE("hypervolume in 2-D equals a staircase sum") {
  std::mt19937_64 rng(3);
  const std::vector<double> o2{0, 0};
  for (int t = 0; t < 100; ++t) {
    auto pts = random_points(12, 2, rng);
    auto front = pareto_front(pts, Orientation::maximize).points;
    std::sort(front.begin(), front.end(), [](const auto& a, const auto& b) { return a[0] > b[0]; });
    double area = 0.0, prev_y = 0.0;
    for (const auto& p : front) {
      area += p[0] * (p[1] - prev_y);
      prev_y = p[1];
    }
    CHECK(hypervolume(pts, o2) == doctest::Approx(area).epsilon(1e-12));
  }
}

TEST_CASE("parego scalarization fixtures") {
  const std::vector<double> f{0.3, 0.9};
  CHECK(std::abs(parego_scalarize(f, {{1.0, 0.0}, 0.05}) - 0.315) <= 1e-12);
  const std::vector<double> ones{1.0, 1.0};
  CHECK(parego_scalarize(ones, {{0.5, 0.5}, 0.05}) == doctest::Approx(0.55).epsilon(1e-15));
  const std::vector<double> zero{0.0, 0.0};
  for (const auto& w : weight_lattice(2)) CHECK(parego_scalarize(zero, w) == 0.0);
}

TEST_CASE("parego scalarization is monotone in every weighted objective") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const auto w = sample_weight(2, t);
    std::vector<double> f{u(rng), u(rng)};
    const double base = parego_scalarize(f, w);
    const std::size_t j = t % 2;
    f[j] = std::min(1.0, f[j] + u(rng) * 0.5);
    CHECK(parego_scalarize(f, w) >= base);
  }
}

TEST_CASE("objective normalization uses the buffer range") {
  const std::vector<ObjectiveVector> buf{{0.2, 0.5}, {0.4, 0.5}, {0.3, 0.5}};
  const auto n = normalize_objectives(buf);
  CHECK(n[0] == ObjectiveVector{0.0, 0.0});
  CHECK(n[1] == ObjectiveVector{1.0, 0.0});
  CHECK(n[2][0] == doctest::Approx(0.5));
}

TEST_CASE("weights come from the simplex lattice uniformly") {
  const auto lattice = weight_lattice(2);
  REQUIRE(lattice.size() == 11);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    CHECK(lattice[i].lambda[0] + lattice[i].lambda[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lattice[i].rho == kParegoRho);
  }
  std::map<long, int> counts;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const auto w = sample_weight(2, static_cast<std::uint64_t>(t));
    const double tenths = w.lambda[0] * 10.0;
    CHECK(std::abs(tenths - std::round(tenths)) < 1e-12);
    CHECK(std::abs(w.lambda[0] + w.lambda[1] - 1.0) <= 1e-12);
    counts[std::lround(tenths)]++;
  }
  REQUIRE(counts.size() == 11);
  const double p = 1.0 / 11.0;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (const auto& [k, c] : counts) CHECK(std::abs(c - draws * p) <= 3 * sd);
  CHECK(sample_weight(2, 5).lambda == sample_weight(2, 5).lambda);
  CHECK_THROWS_AS(sample_weight(1, 0), InvalidInput);
}
