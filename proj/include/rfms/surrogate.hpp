#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rfms/datamodel.hpp"

namespace rfms {

/// Matérn-5/2 ARD covariance parameters (on standardized targets).
struct KernelParams {
  Eigen::VectorXd lengthscales;
  double signal_variance = 1.0;
};

double matern52(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                const KernelParams& kernel);

struct GpFitOptions {
  std::size_t starts = 64;
  std::uint64_t seed = 0x5eed'0f'6b'5eedULL;
  double lengthscale_min = 1e-2;
  double lengthscale_max = 1e1;
  double variance_min = 0.1;
  double variance_max = 10.0;
  double nugget = 1e-6;
  double max_nugget = 1e-2;
  /// Coordinate passes (in log-parameter space) polishing the best start.
  std::size_t refine_passes = 2;
  /// When false, targets are used as-is (zero prior mean, unit scale).
  bool standardize = true;
  /// Skip the likelihood search and use these parameters.
  std::optional<KernelParams> fixed;
};

struct GpPrediction {
  double mean = 0.0;
  double sd = 0.0;
};

class GpModel {
 public:
  const Eigen::MatrixXd& inputs() const noexcept { return x_; }
  const Eigen::VectorXd& targets() const noexcept { return y_; }
  const KernelParams& kernel() const noexcept { return kernel_; }
  double nugget() const noexcept { return nugget_; }
  double log_marginal_likelihood() const noexcept { return lml_; }
  /// Log marginal likelihood of every random start, at the nugget that was used.
  const std::vector<double>& start_log_likelihoods() const noexcept { return start_lml_; }
  double target_mean() const noexcept { return y_mean_; }
  double target_scale() const noexcept { return y_scale_; }
  /// True when the targets had (numerically) zero variance.
  bool degenerate_targets() const noexcept { return degenerate_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()); }

 private:
  friend GpModel gp_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&, const GpFitOptions&);
  friend GpPrediction gp_predict(const GpModel&, std::span<const double>);

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  KernelParams kernel_;
  double nugget_ = 0.0;
  double lml_ = 0.0;
  std::vector<double> start_lml_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  bool degenerate_ = false;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd weights_;  // (K + nugget I)^-1 y_std
};

/// Fits the surrogate by maximizing the log marginal likelihood over a random
/// multi-start grid. Throws FitError when the covariance stays indefinite
/// after escalating the nugget up to `max_nugget`.
GpModel gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpFitOptions& options = {});

GpPrediction gp_predict(const GpModel& model, std::span<const double> x);

/// Expected improvement below `incumbent` (minimization).
double expected_improvement(double mean, double sd, double incumbent);
double expected_improvement(const GpModel& model, std::span<const double> x, double incumbent);

struct ProposeOptions {
  std::size_t candidates = 1000;
  std::size_t refine_steps = 20;
  double initial_step = 0.1;
};

/// EI maximizer: random candidates, then coordinate-wise refinement. Ties go
/// to the lowest candidate index; a model fitted on constant targets carries
/// no preference and returns the first candidate.
std::vector<double> propose_encoded(const GpModel& model, std::uint64_t seed, const ProposeOptions& options = {});

/// propose_encoded decoded into `space`.
Configuration propose(const GpModel& model, const HyperParamSpace& space, std::uint64_t seed,
                      const ProposeOptions& options = {});

}  // namespace rfms
