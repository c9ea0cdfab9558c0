#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rfms/error.hpp"
#include "rfms/rfms.hpp"
#include "rfms/seeds.hpp"
#include "support.hpp"

using namespace rfms;

namespace {

EvalRecord record(double j_local, double j_remote, std::size_t i) {
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  return make_eval_record(sample_configuration(space, i), j_local, {j_remote}, {1.0}, i, Phase::initial_design);
}

/// Two bowls over the encoded elastic net box; no learning involved.
class Bowls final : public Objective {
 public:
  static double local(const std::vector<double>& u) { return std::pow(u[0] - 0.3, 2) + std::pow(u[1] - 0.7, 2); }
  static double remote(const std::vector<double>& u) { return std::pow(u[0] - 0.7, 2) + std::pow(u[1] - 0.5, 2); }
  Evaluation evaluate(const Configuration& c, std::size_t) override {
    ++calls;
    return {local(c.encoded()), {remote(c.encoded())}, {1.0}};
  }
  std::size_t calls = 0;
};

struct Federation {
  Dataset openbox;
  std::vector<Dataset> curator_sites;

  Federation() : openbox(testing::two_class_gaussians(40, 40, 5, 1.5, 1)) {
    for (std::uint64_t s = 2; s < 5; ++s) curator_sites.push_back(testing::two_class_gaussians(30, 30, 5, 1.5, s));
  }

  std::pair<std::unique_ptr<FederatedObjective>, std::vector<std::shared_ptr<Curator>>> objective() const {
    std::vector<std::shared_ptr<Curator>> curators;
    for (const auto& site : curator_sites)
      curators.push_back(std::make_shared<LocalCurator>(site, CuratorStrategy::honest()));
    return {std::make_unique<FederatedObjective>(openbox, curators, 11, 12, 5), curators};
  }
};

RunOptions quick() {
  RunOptions o;
  o.gp.starts = 8;
  o.propose.candidates = 200;
  return o;
}

bool same_history(const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i].config == b[i].config) || a[i].j_local != b[i].j_local || a[i].j_remote != b[i].j_remote) return false;
  return true;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(MethodSpec::parse("fso5").alpha == 0.5);
  CHECK(MethodSpec::parse("fso2").name == "fso2");
  CHECK(MethodSpec::parse("fso:0.25").alpha == 0.25);
  CHECK(MethodSpec::parse("fso:0.5").name == "fso5");
  CHECK(MethodSpec::parse("fmo_th").curator_mode == CuratorStrategy::Kind::thresholdout);
  CHECK(MethodSpec::parse("fmo_th").name == "fmo_th");
  CHECK(MethodSpec::parse("lso").is_scalar());
  CHECK_FALSE(MethodSpec::parse("rand_mo").is_scalar());
  CHECK_THROWS_AS(MethodSpec::parse("fso:1.5"), InvalidInput);
  CHECK_THROWS_AS(MethodSpec::parse("bogus"), InvalidInput);
  CHECK_THROWS_AS(MethodSpec::parse("fso:x"), InvalidInput);
}

TEST_CASE("scalar objective fixtures") {
  CHECK(scalar_objective(MethodSpec::fso(0.5), 0.2, 0.4) == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(scalar_objective(MethodSpec::lso(), 0.123456789, 0.9) == 0.123456789);
  CHECK(scalar_objective(MethodSpec::fso(0.0), 0.2, 0.7) == 0.7);
  CHECK_THROWS_AS(scalar_objective(MethodSpec::fmo(), 0.2, 0.4), ContractViolation);
  CHECK_THROWS_AS(scalar_objective(MethodSpec::rand_mo(), 0.2, 0.4), ContractViolation);
}

TEST_CASE("final selection") {
  const std::vector<EvalRecord> ties{record(0.3, 0.1, 0), record(0.2, 0.9, 1), record(0.2, 0.1, 2)};
  CHECK(select_final_indices(MethodSpec::lso(), ties) == std::vector<std::size_t>{1});
  CHECK(select_final_indices(MethodSpec::fso(0.5), ties) == std::vector<std::size_t>{2});

  const std::vector<EvalRecord> cloud{record(0.1, 0.5, 0), record(0.2, 0.2, 1), record(0.5, 0.1, 2),
                                      record(0.3, 0.3, 3)};
  CHECK(select_final_indices(MethodSpec::fmo(), cloud) == std::vector<std::size_t>{0, 1, 2});
  CHECK(select_final(MethodSpec::rand_mo(), cloud).size() == 3);
  CHECK_THROWS_AS(select_final_indices(MethodSpec::lso(), std::vector<EvalRecord>{}), InvalidInput);
}

TEST_CASE("a full run queries every curator once per evaluation") {
  const Federation fed;
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  const auto design = initial_design(space, 20, 3);
  for (auto method : {MethodSpec::fso(0.5), MethodSpec::fmo(), MethodSpec::rand_mo()}) {
    auto [objective, curators] = fed.objective();
    const auto run = run_rfms(method, *objective, space, Budget{}, design, 4, quick());
    REQUIRE(run.history.size() == 60);
    for (std::size_t i = 0; i < 60; ++i) {
      CHECK(run.history[i].iteration == i);
      CHECK(run.history[i].phase == (i < 20 ? Phase::initial_design : Phase::bo));
      CHECK(run.history[i].j_remote_per_curator.size() == 3);
      CHECK(run.history[i].curator_weights == std::vector<double>{60.0, 60.0, 60.0});
    }
    for (const auto& c : curators) CHECK(c->query_count() == 60);
    CHECK(run.models.size() == run.selected.size());
    CHECK_FALSE(run.selected.empty());
    if (method.is_scalar()) CHECK(run.selected.size() == 1);
  }
}

TEST_CASE("methods share the initial design and fso with alpha 1 is lso") {
  const Federation fed;
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  const auto design = initial_design(space, 20, 8);
  const Budget budget{20, 10};
  auto run = [&](const MethodSpec& m) {
    auto [objective, curators] = fed.objective();
    return run_rfms(m, *objective, space, budget, design, 9, quick());
  };
  const auto lso = run(MethodSpec::lso());
  const auto fso1 = run(MethodSpec::fso(1.0));
  const auto fmo = run(MethodSpec::fmo());
  CHECK(same_history(lso.history, fso1.history));
  CHECK(lso.selected_indices == fso1.selected_indices);
  const std::vector<EvalRecord> a(lso.history.begin(), lso.history.begin() + 20);
  const std::vector<EvalRecord> b(fmo.history.begin(), fmo.history.begin() + 20);
  CHECK(same_history(a, b));
  for (std::size_t i = 0; i < 20; ++i) CHECK(a[i].config == design[i]);
}

TEST_CASE("budget without a BO phase evaluates only the design") {
  Bowls f;
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  const auto design = initial_design(space, 20, 1);
  const auto run = run_rfms(MethodSpec::fso(0.5), f, space, Budget{20, 0}, design, 2);
  CHECK(run.history.size() == 20);
  CHECK(f.calls == 20);
  CHECK(run.models.empty());
  CHECK_THROWS_AS(run_rfms(MethodSpec::lso(), f, space, Budget{5, 0}, design, 2), InvalidInput);
  const auto& rf = HyperParamSpace::for_learner(LearnerKind::random_forest);
  CHECK_THROWS_AS(run_rfms(MethodSpec::lso(), f, rf, Budget{20, 0}, design, 2), InvalidInput);
}

TEST_CASE("fso on a smooth objective approaches the grid optimum") {
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  const auto method = MethodSpec::fso(0.5);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j) {
      const std::vector<double> u{i / 400.0, j / 400.0};
      const double v = scalar_objective(method, Bowls::local(u), Bowls::remote(u));
      if (v < best) {
        best = v;
        arg = u;
      }
    }
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Bowls f;
    const auto run = run_rfms(method, f, space, Budget{}, initial_design(space, 20, seed), seed);
    const auto& u = run.selected.front().encoded();
    CHECK(std::hypot(u[0] - arg[0], u[1] - arg[1]) <= 0.1);
    CHECK(scalar_objective(method, run.history[run.selected_indices[0]].j_local,
                           run.history[run.selected_indices[0]].j_remote) - best <= 0.01);
  }
}

TEST_CASE("runs are deterministic under a fixed seed") {
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  const auto design = initial_design(space, 20, 5);
  for (auto method : {MethodSpec::fso(0.2), MethodSpec::fmo()}) {
    Bowls f1, f2;
    const auto a = run_rfms(method, f1, space, Budget{20, 15}, design, 6);
    const auto b = run_rfms(method, f2, space, Budget{20, 15}, design, 6);
    CHECK(same_history(a.history, b.history));
    Bowls f3;
    const auto c = run_rfms(method, f3, space, Budget{20, 15}, design, 7);
    CHECK_FALSE(same_history(a.history, c.history));
  }
}

TEST_CASE("a surrogate fit failure falls back to random proposals") {
  const auto& space = HyperParamSpace::for_learner(LearnerKind::elastic_net);
  RunOptions o;
  o.gp.fixed = KernelParams{Eigen::Vector2d(0.3, 0.3), -1.0};  // never positive definite
  Bowls f;
  const auto run = run_rfms(MethodSpec::fmo(), f, space, Budget{20, 5}, initial_design(space, 20, 1), 2, o);
  CHECK(run.history.size() == 25);
  CHECK(run.events.size() == 5);
}
