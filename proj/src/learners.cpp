#include "rfms/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfms/error.hpp"

namespace rfms {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale = ((x.rowwise() - s.mean.transpose()).colwise().squaredNorm().transpose() /
             static_cast<double>(std::max<Eigen::Index>(x.rows(), 1)))
                .cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

TrainedModel::TrainedModel(Standardizer scaling, ModelParams params)
    : scaling_(std::move(scaling)), params_(std::move(params)) {
  if (scaling_.mean.size() != scaling_.scale.size())
    throw InvalidInput("trained model: inconsistent scaling");
}

LearnerKind TrainedModel::learner() const noexcept {
  switch (params_.index()) {
    case 0: return LearnerKind::elastic_net;
    case 1: return LearnerKind::random_forest;
    default: return LearnerKind::kernel_svm;
  }
}

TrainedModel train(const Dataset& data, const Configuration& config, std::uint64_t seed) {
  if (data.empty()) throw InvalidInput("train: empty dataset");
  Standardizer scaling = Standardizer::fit(data.features());
  const Eigen::MatrixXd x = scaling.apply(data.features());
  const auto y = data.labels();

  switch (config.learner()) {
    case LearnerKind::elastic_net: {
      auto fit = fit_elastic_net(x, y, config.value("alpha"), config.value("s"));
      return TrainedModel(std::move(scaling), std::move(fit.model));
    }
    case LearnerKind::kernel_svm: {
      if (!data.has_both_classes()) {
        KernelSvmModel constant;
        constant.sigma = config.value("sigma");
        constant.support = Eigen::MatrixXd::Zero(0, x.cols());
        constant.intercept = y[0] == Label::positive ? 1.0 : -1.0;
        return TrainedModel(std::move(scaling), std::move(constant));
      }
      return TrainedModel(std::move(scaling),
                          fit_kernel_svm(x, y, config.value("C"), config.value("sigma")));
    }
    case LearnerKind::random_forest: {
      const auto n_trees = static_cast<std::size_t>(config.value("num.trees"));
      TreeOptions options;
      options.min_node_size = static_cast<std::size_t>(config.value("min.node.size"));
      options.mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
      const auto n = data.rows();
      const auto draws = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(config.value("sample.fraction") * static_cast<double>(n))));
      RandomForestModel forest;
      forest.trees.reserve(n_trees);
      std::vector<std::size_t> sample(draws);
      for (std::size_t t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(seed, {t}));
        for (auto& s : sample) s = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
        forest.trees.push_back(grow_tree(x, y, sample, options, rng));
      }
      return TrainedModel(std::move(scaling), std::move(forest));
    }
  }
  throw InvalidInput("train: unknown learner");
}

namespace {

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

struct ProbabilityVisitor {
  const Eigen::MatrixXd& x;

  Eigen::VectorXd operator()(const ElasticNetModel& m) const {
    Eigen::VectorXd eta = (x * m.coef).array() + m.intercept;
    return eta.unaryExpr([](double e) { return sigmoid(e); });
  }

  Eigen::VectorXd operator()(const RandomForestModel& m) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double acc = 0.0;
      for (const auto& tree : m.trees) acc += tree.predict(x.row(i));
      out[i] = acc / static_cast<double>(m.trees.size());
    }
    return out;
  }

  Eigen::VectorXd operator()(const KernelSvmModel& m) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double f = m.intercept;
      for (Eigen::Index s = 0; s < m.support.rows(); ++s)
        f += m.dual[s] * rbf_kernel(m.support.row(s), x.row(i), m.sigma);
      out[i] = sigmoid(f);
    }
    return out;
  }
};

}  // namespace

Prediction predict(const TrainedModel& model, const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.cols()) != model.input_dim())
    throw InvalidInput("predict: feature dimension " + std::to_string(features.cols()) +
                       " does not match model dimension " + std::to_string(model.input_dim()));
  const Eigen::MatrixXd x = model.scaling().apply(features);
  Prediction out;
  out.prob_positive = std::visit(ProbabilityVisitor{x}, model.params());
  out.labels.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out.labels.push_back(out.prob_positive[i] >= 0.5 ? Label::positive : Label::negative);
  return out;
}

double evaluate(const TrainedModel& model, const Dataset& data) {
  if (data.empty()) throw InvalidInput("evaluate: empty dataset");
  const auto pred = predict(model, data.features());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) errors += pred.labels[i] != data.labels()[i];
  return static_cast<double>(errors) / static_cast<double>(data.rows());
}

std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds, std::uint64_t seed) {
  data.require_both_classes("cross validation");
  const auto minority = std::min(data.count(Label::negative), data.count(Label::positive));
  folds = std::max<std::size_t>(2, std::min(folds, minority));
  std::vector<std::size_t> fold_of(data.rows());
  Rng rng(seed);
  std::size_t next = 0;
  for (Label label : {Label::negative, Label::positive}) {
    auto rows = data.rows_with(label);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (auto r : rows) fold_of[r] = next++ % folds;
  }
  return fold_of;
}

double cross_validate(const Dataset& data, std::size_t folds, std::uint64_t seed,
                      const FoldEvaluator& evaluator) {
  const auto fold_of = stratified_folds(data, folds, seed);
  const std::size_t n_folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  double total = 0.0;
  for (std::size_t f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);
    total += evaluator(data.subset(train_rows), data.subset(test_rows), derive_seed(seed, {f}));
  }
  return total / static_cast<double>(n_folds);
}

double cross_validate(const Dataset& data, const Configuration& config, std::size_t folds,
                      std::uint64_t seed) {
  return cross_validate(data, folds, seed, [&](const Dataset& tr, const Dataset& te, std::uint64_t s) {
    return evaluate(train(tr, config, s), te);
  });
}

}  // namespace rfms
