#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rfms/datamodel.hpp"
#include "rfms/seeds.hpp"

namespace rfms {

/// Column-wise z-scoring fitted on training rows only and carried inside the
/// model. Constant columns keep scale 1 and are centred to zero.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct ElasticNetModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // rows with x[feature] <= threshold go left
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double prob_positive = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
};

/// RBF-kernel least-squares classifier: solves the bordered system
/// [0 1'; 1 K + I/C] [b; a] = [0; y] with y in {-1, +1}.
struct KernelSvmModel {
  Eigen::MatrixXd support;  // standardized training rows
  Eigen::VectorXd dual;
  double intercept = 0.0;
  double sigma = 1.0;
};

using ModelParams = std::variant<ElasticNetModel, RandomForestModel, KernelSvmModel>;

class TrainedModel {
 public:
  TrainedModel(Standardizer scaling, ModelParams params);

  LearnerKind learner() const noexcept;
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(scaling_.mean.size()); }
  const Standardizer& scaling() const noexcept { return scaling_; }
  const ModelParams& params() const noexcept { return params_; }

 private:
  Standardizer scaling_;
  ModelParams params_;
};

struct Prediction {
  std::vector<Label> labels;
  Eigen::VectorXd prob_positive;
};

/// Fits the learner named by `config`. Deterministic given `seed`. Training
/// data holding a single class yields a constant model.
TrainedModel train(const Dataset& data, const Configuration& config, std::uint64_t seed);

/// Labels use a 0.5 threshold on the positive-class probability; exactly 0.5
/// predicts positive.
Prediction predict(const TrainedModel& model, const Eigen::MatrixXd& features);

/// Mean misclassification error.
double evaluate(const TrainedModel& model, const Dataset& data);

/// Stratified fold id per row. Folds are reduced to the minority class count
/// (never below 2) when a class is smaller than `folds`.
std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds, std::uint64_t seed);

/// Loss of a model trained on `train` and scored on `test`.
using FoldEvaluator =
    std::function<double(const Dataset& train, const Dataset& test, std::uint64_t fold_seed)>;

/// Unweighted mean of per-fold losses.
double cross_validate(const Dataset& data, std::size_t folds, std::uint64_t seed,
                      const FoldEvaluator& evaluator);
double cross_validate(const Dataset& data, const Configuration& config, std::size_t folds,
                      std::uint64_t seed);

inline constexpr char kModelMagic[] = "RFMSM1";

std::vector<std::uint8_t> serialize_model(const TrainedModel& model);
/// Throws DecodeError on truncated, trailing, or otherwise malformed input.
TrainedModel deserialize_model(std::span<const std::uint8_t> bytes);

// Building blocks, exposed for testing.

double soft_threshold(double z, double gamma);

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b, double sigma);

struct ElasticNetOptions {
  std::size_t max_cycles = 2000;
  double tolerance = 1e-8;
  bool record_objective = false;
};

struct ElasticNetFit {
  ElasticNetModel model;
  std::vector<double> objective_trace;  // at the start and after each full cycle, when recorded
  std::size_t cycles = 0;
};

/// Penalized logistic objective mean log-loss + s * (alpha |b|_1 + (1 - alpha) |b|^2 / 2).
double elastic_net_objective(const Eigen::MatrixXd& x, std::span<const Label> y,
                             const ElasticNetModel& model, double alpha, double s);

/// Cyclic coordinate descent on already-standardized features.
ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& x, std::span<const Label> y, double alpha,
                              double s, const ElasticNetOptions& options = {});

KernelSvmModel fit_kernel_svm(const Eigen::MatrixXd& x, std::span<const Label> y, double cost,
                              double sigma);

struct TreeOptions {
  std::size_t min_node_size = 1;
  std::size_t mtry = 1;
};

/// Grows one CART tree (Gini) on the rows listed in `sample` (repeats allowed).
DecisionTree grow_tree(const Eigen::MatrixXd& x, std::span<const Label> y,
                       std::span<const std::size_t> sample, const TreeOptions& options, Rng& rng);

}  // namespace rfms
