#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfms/curator.hpp"
#include "rfms/datamodel.hpp"
#include "rfms/learners.hpp"
#include "rfms/surrogate.hpp"

namespace rfms {

enum class MethodKind { lso, fso, fmo, rand_mo };

/// One model-selection strategy. lso is fso with alpha = 1.
struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::lso;
  double alpha = 1.0;
  CuratorStrategy::Kind curator_mode = CuratorStrategy::Kind::honest;

  static MethodSpec lso();
  static MethodSpec fso(double alpha);
  static MethodSpec fmo();
  static MethodSpec rand_mo();
  /// Parses lso, fso2 / fso5 / fso8 (alpha = digit / 10), fso:<alpha>, fmo,
  /// rand_mo, each optionally suffixed with "_th" for a thresholdout curator.
  static MethodSpec parse(std::string_view name);

  bool is_scalar() const noexcept { return kind == MethodKind::lso || kind == MethodKind::fso; }
};

struct Budget {
  std::size_t n_initial = 20;
  std::size_t n_bo = 40;

  std::size_t total() const noexcept { return n_initial + n_bo; }
};

/// alpha * j_local + (1 - alpha) * j_remote; only defined for lso and fso.
double scalar_objective(const MethodSpec& method, double j_local, double j_remote);

/// Losses produced by evaluating one configuration.
struct Evaluation {
  double j_local = 0.0;
  std::vector<double> j_remote_per_curator;
  std::vector<double> curator_weights;
};

/// The expensive black box the optimization loop queries.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Evaluation evaluate(const Configuration& config, std::size_t iteration) = 0;
  /// Model behind the evaluation at `iteration`, when the objective trains one.
  virtual std::optional<TrainedModel> model_for(const Configuration&, std::size_t) { return std::nullopt; }
};

/// Cross-validation on the openbox inbag plus curator queries with the model
/// trained on the whole openbox inbag.
class FederatedObjective final : public Objective {
 public:
  FederatedObjective(Dataset openbox_inbag, std::vector<std::shared_ptr<Curator>> curators,
                     std::uint64_t cv_seed, std::uint64_t learner_seed, std::size_t folds = 10);

  Evaluation evaluate(const Configuration& config, std::size_t iteration) override;
  std::optional<TrainedModel> model_for(const Configuration& config, std::size_t iteration) override;

  const std::vector<std::shared_ptr<Curator>>& curators() const noexcept { return curators_; }

 private:
  TrainedModel fit(const Configuration& config, std::size_t iteration) const;

  Dataset openbox_;
  std::vector<std::shared_ptr<Curator>> curators_;
  std::uint64_t cv_seed_;
  std::uint64_t learner_seed_;
  std::size_t folds_;
};

struct RunOptions {
  GpFitOptions gp;
  ProposeOptions propose;
};

struct RunResult {
  std::vector<EvalRecord> history;
  std::vector<std::size_t> selected_indices;  // into history
  std::vector<Configuration> selected;
  std::vector<TrainedModel> models;           // one per selection when the objective trains models
  std::vector<std::string> events;            // e.g. surrogate fallbacks
};

/// Uniform random initial design shared by every method of an experiment.
std::vector<Configuration> initial_design(const HyperParamSpace& space, std::size_t n, std::uint64_t seed);

/// The sequential model-based selection loop: evaluate the initial design,
/// then propose, evaluate and refit until the budget is spent.
RunResult run_rfms(const MethodSpec& method, Objective& objective, const HyperParamSpace& space,
                   const Budget& budget, std::span<const Configuration> design, std::uint64_t seed,
                   const RunOptions& options = {});

/// Indices of the final selection: the earliest argmin of the scalar objective,
/// or the Pareto set of (j_local, j_remote) under minimization.
std::vector<std::size_t> select_final_indices(const MethodSpec& method, std::span<const EvalRecord> history);
std::vector<Configuration> select_final(const MethodSpec& method, std::span<const EvalRecord> history);

}  // namespace rfms
