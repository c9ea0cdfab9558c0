#include "rfms/rfms.hpp"

#include <charconv>
#include <cmath>

#include <spdlog/spdlog.h>

#include "rfms/error.hpp"
#include "rfms/moo.hpp"
#include "rfms/seeds.hpp"

namespace rfms {

MethodSpec MethodSpec::lso() { return {"lso", MethodKind::lso, 1.0}; }

MethodSpec MethodSpec::fso(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("fso: alpha must lie in [0,1]");
  const double tenths = alpha * 10.0;
  std::string name = std::abs(tenths - std::round(tenths)) < 1e-12 && tenths >= 0.5 && tenths < 9.5
                         ? "fso" + std::to_string(static_cast<int>(std::round(tenths)))
                         : "fso:" + format_double(alpha);
  return {std::move(name), MethodKind::fso, alpha};
}

MethodSpec MethodSpec::fmo() { return {"fmo", MethodKind::fmo, 1.0}; }
MethodSpec MethodSpec::rand_mo() { return {"rand_mo", MethodKind::rand_mo, 1.0}; }

MethodSpec MethodSpec::parse(std::string_view name) {
  const std::string original(name);
  bool thresholdout = false;
  if (name.size() > 3 && name.substr(name.size() - 3) == "_th") {
    thresholdout = true;
    name.remove_suffix(3);
  }
  MethodSpec spec;
  if (name == "lso") {
    spec = lso();
  } else if (name == "fmo") {
    spec = fmo();
  } else if (name == "rand_mo") {
    spec = rand_mo();
  } else if (name.starts_with("fso:")) {
    double alpha = 0.0;
    auto text = name.substr(4);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), alpha);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw InvalidInput("bad method '" + original + "'");
    spec = fso(alpha);
  } else if (name.size() == 4 && name.starts_with("fso") && name[3] >= '0' && name[3] <= '9') {
    spec = fso((name[3] - '0') / 10.0);
  } else {
    throw InvalidInput("unknown method '" + original + "'");
  }
  if (thresholdout) {
    spec.curator_mode = CuratorStrategy::Kind::thresholdout;
    spec.name += "_th";
  }
  return spec;
}

double scalar_objective(const MethodSpec& method, double j_local, double j_remote) {
  switch (method.kind) {
    case MethodKind::lso: return j_local;
    case MethodKind::fso: return method.alpha * j_local + (1.0 - method.alpha) * j_remote;
    default: throw ContractViolation("scalar_objective: " + method.name + " is multi-objective");
  }
}

// ---------------------------------------------------------------------------

FederatedObjective::FederatedObjective(Dataset openbox_inbag, std::vector<std::shared_ptr<Curator>> curators,
                                       std::uint64_t cv_seed, std::uint64_t learner_seed, std::size_t folds)
    : openbox_(std::move(openbox_inbag)),
      curators_(std::move(curators)),
      cv_seed_(cv_seed),
      learner_seed_(learner_seed),
      folds_(folds) {
  if (curators_.empty()) throw InvalidInput("federated objective: at least one curator required");
  openbox_.require_both_classes("openbox inbag");
}

TrainedModel FederatedObjective::fit(const Configuration& config, std::size_t iteration) const {
  return train(openbox_, config, derive_seed(learner_seed_, {iteration}));
}

Evaluation FederatedObjective::evaluate(const Configuration& config, std::size_t iteration) {
  Evaluation ev;
  ev.j_local = cross_validate(openbox_, config, folds_, cv_seed_);
  const TrainedModel model = fit(config, iteration);
  std::optional<double> openbox_loss;
  for (const auto& curator : curators_) {
    if (curator->needs_openbox_loss() && !openbox_loss) openbox_loss = rfms::evaluate(model, openbox_);
    ev.j_remote_per_curator.push_back(curator->evaluate(model, openbox_loss));
    ev.curator_weights.push_back(curator->weight());
  }
  return ev;
}

std::optional<TrainedModel> FederatedObjective::model_for(const Configuration& config, std::size_t iteration) {
  return fit(config, iteration);
}

// ---------------------------------------------------------------------------

std::vector<Configuration> initial_design(const HyperParamSpace& space, std::size_t n, std::uint64_t seed) {
  std::vector<Configuration> design;
  design.reserve(n);
  for (std::size_t i = 0; i < n; ++i) design.push_back(sample_configuration(space, derive_seed(seed, {i})));
  return design;
}

std::vector<std::size_t> select_final_indices(const MethodSpec& method, std::span<const EvalRecord> history) {
  if (history.empty()) throw InvalidInput("select_final: empty history");
  if (method.is_scalar()) {
    std::size_t best = 0;
    double best_value = scalar_objective(method, history[0].j_local, history[0].j_remote);
    for (std::size_t i = 1; i < history.size(); ++i) {
      const double v = scalar_objective(method, history[i].j_local, history[i].j_remote);
      if (v < best_value) {
        best_value = v;
        best = i;
      }
    }
    return {best};
  }
  std::vector<ObjectiveVector> points;
  points.reserve(history.size());
  for (const auto& rec : history) points.push_back({rec.j_local, rec.j_remote});
  return pareto_indices(points, Orientation::minimize);
}

std::vector<Configuration> select_final(const MethodSpec& method, std::span<const EvalRecord> history) {
  std::vector<Configuration> out;
  for (auto i : select_final_indices(method, history)) out.push_back(history[i].config);
  return out;
}

namespace {

Eigen::MatrixXd encoded_inputs(std::span<const EvalRecord> history) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(history.size()),
                    static_cast<Eigen::Index>(history.front().config.encoded().size()));
  for (std::size_t i = 0; i < history.size(); ++i)
    for (std::size_t j = 0; j < history[i].config.encoded().size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = history[i].config.encoded()[j];
  return x;
}

Eigen::VectorXd surrogate_targets(const MethodSpec& method, std::span<const EvalRecord> history,
                                  std::uint64_t weight_seed) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(history.size()));
  if (method.is_scalar()) {
    for (std::size_t i = 0; i < history.size(); ++i)
      y[static_cast<Eigen::Index>(i)] = scalar_objective(method, history[i].j_local, history[i].j_remote);
    return y;
  }
  std::vector<ObjectiveVector> buffer;
  for (const auto& rec : history) buffer.push_back({rec.j_local, rec.j_remote});
  const auto normalized = normalize_objectives(buffer);
  const auto weight = sample_weight(2, weight_seed);
  for (std::size_t i = 0; i < normalized.size(); ++i)
    y[static_cast<Eigen::Index>(i)] = parego_scalarize(normalized[i], weight);
  return y;
}

}  // namespace

RunResult run_rfms(const MethodSpec& method, Objective& objective, const HyperParamSpace& space,
                   const Budget& budget, std::span<const Configuration> design, std::uint64_t seed,
                   const RunOptions& options) {
  if (design.size() != budget.n_initial)
    throw InvalidInput("run_rfms: initial design has " + std::to_string(design.size()) + " points, budget expects " +
                       std::to_string(budget.n_initial));
  if (budget.n_initial == 0) throw InvalidInput("run_rfms: empty initial design");
  RunResult result;
  result.history.reserve(budget.total());

  auto record = [&](const Configuration& config, Phase phase) {
    const auto iteration = result.history.size();
    auto ev = objective.evaluate(config, iteration);
    result.history.push_back(make_eval_record(config, ev.j_local, std::move(ev.j_remote_per_curator),
                                              std::move(ev.curator_weights), iteration, phase));
  };

  for (const auto& config : design) {
    if (config.learner() != space.learner()) throw InvalidInput("run_rfms: design/space learner mismatch");
    record(config, Phase::initial_design);
  }

  while (result.history.size() < budget.total()) {
    const std::uint64_t iteration = result.history.size();
    const auto proposal_seed = derive_seed(seed, SeedStream::proposal, {iteration});
    std::optional<Configuration> next;
    if (method.kind == MethodKind::rand_mo) {
      next = sample_configuration(space, proposal_seed);
    } else {
      try {
        const auto y = surrogate_targets(method, result.history, derive_seed(seed, SeedStream::weights, {iteration}));
        GpFitOptions gp = options.gp;
        gp.seed = derive_seed(seed, SeedStream::gp, {iteration});
        const GpModel model = gp_fit(encoded_inputs(result.history), y, gp);
        next = propose(model, space, proposal_seed, options.propose);
      } catch (const FitError& e) {
        result.events.push_back("iteration " + std::to_string(iteration) + ": " + e.what() +
                                "; falling back to a random proposal");
        spdlog::warn("{}: {}", method.name, result.events.back());
        next = sample_configuration(space, derive_seed(proposal_seed, {1}));
      }
    }
    record(*next, Phase::bo);
  }

  result.selected_indices = select_final_indices(method, result.history);
  for (auto i : result.selected_indices) {
    const auto& rec = result.history[i];
    result.selected.push_back(rec.config);
    if (auto model = objective.model_for(rec.config, rec.iteration)) result.models.push_back(std::move(*model));
  }
  return result;
}

}  // namespace rfms
