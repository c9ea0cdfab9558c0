#include "rfms/surrogate.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "rfms/error.hpp"
#include "rfms/seeds.hpp"

namespace rfms {

double matern52(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                const KernelParams& kernel) {
  const double r = ((a - b).array() / kernel.lengthscales.array()).matrix().norm();
  const double s5r = std::sqrt(5.0) * r;
  return kernel.signal_variance * (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
}

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const KernelParams& kernel) {
  const auto m = x.rows();
  const Eigen::MatrixXd scaled = x.array().rowwise() / kernel.lengthscales.transpose().array();
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    k(i, i) = kernel.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = (scaled.row(i) - scaled.row(j)).norm();
      const double s5r = std::sqrt(5.0) * r;
      k(i, j) = k(j, i) = kernel.signal_variance * (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
    }
  }
  return k;
}

struct Evaluation {
  double lml = -std::numeric_limits<double>::infinity();
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::VectorXd weights;
};

Evaluation evaluate_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const KernelParams& kernel, double nugget) {
  Evaluation out;
  Eigen::MatrixXd k = covariance(x, kernel);
  k.diagonal().array() += nugget;
  out.chol.compute(k);
  if (out.chol.info() != Eigen::Success) return out;
  const Eigen::MatrixXd l = out.chol.matrixL();
  if (!(l.diagonal().minCoeff() > 0.0)) return out;
  out.weights = out.chol.solve(y);
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const double m = static_cast<double>(y.size());
  out.lml = -0.5 * y.dot(out.weights) - 0.5 * log_det - 0.5 * m * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(out.lml)) out.lml = -std::numeric_limits<double>::infinity();
  return out;
}

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(std::log(lo) + uniform01(rng) * (std::log(hi) - std::log(lo)));
}

}  // namespace

GpModel gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpFitOptions& options) {
  if (x.rows() < 1) throw InvalidInput("gp_fit: need at least one observation");
  if (x.rows() != y.size()) throw InvalidInput("gp_fit: input/target size mismatch");
  if (!x.allFinite() || !y.allFinite()) throw InvalidInput("gp_fit: non-finite data");

  GpModel model;
  model.x_ = x;
  model.y_ = y;
  if (options.standardize) {
    model.y_mean_ = y.mean();
    const double var = (y.array() - model.y_mean_).square().sum() / static_cast<double>(y.size());
    model.degenerate_ = var < 1e-12;
    model.y_scale_ = model.degenerate_ ? 1.0 : std::sqrt(var);
  }
  const Eigen::VectorXd ys = (y.array() - model.y_mean_) / model.y_scale_;
  const auto d = static_cast<std::size_t>(x.cols());

  std::vector<KernelParams> starts;
  if (options.fixed) {
    if (static_cast<std::size_t>(options.fixed->lengthscales.size()) != d)
      throw InvalidInput("gp_fit: fixed lengthscale dimension mismatch");
    starts.push_back(*options.fixed);
  } else {
    Rng rng(options.seed);
    for (std::size_t s = 0; s < options.starts; ++s) {
      KernelParams kp;
      kp.lengthscales.resize(static_cast<Eigen::Index>(d));
      for (auto& l : kp.lengthscales) l = log_uniform(rng, options.lengthscale_min, options.lengthscale_max);
      kp.signal_variance = log_uniform(rng, options.variance_min, options.variance_max);
      starts.push_back(std::move(kp));
    }
  }

  for (double nugget = options.nugget; nugget <= options.max_nugget * (1.0 + 1e-9); nugget *= 10.0) {
    model.start_lml_.clear();
    std::size_t best = starts.size();
    Evaluation best_eval;
    for (std::size_t s = 0; s < starts.size(); ++s) {
      auto ev = evaluate_likelihood(x, ys, starts[s], nugget);
      model.start_lml_.push_back(ev.lml);
      if (ev.lml > best_eval.lml) {
        best = s;
        best_eval = std::move(ev);
      }
    }
    if (best == starts.size()) continue;

    KernelParams current = starts[best];
    if (!options.fixed) {
      // Multiplicative coordinate search; only strict improvements are kept.
      auto clamp_param = [&](std::size_t j, double v) {
        return j < d ? std::clamp(v, options.lengthscale_min, options.lengthscale_max)
                     : std::clamp(v, options.variance_min, options.variance_max);
      };
      for (std::size_t pass = 0; pass < options.refine_passes; ++pass) {
        const double factor = pass == 0 ? 2.0 : std::sqrt(2.0);
        for (std::size_t j = 0; j <= d; ++j) {
          for (double f : {factor, 1.0 / factor}) {
            KernelParams trial = current;
            double& v = j < d ? trial.lengthscales[static_cast<Eigen::Index>(j)] : trial.signal_variance;
            v = clamp_param(j, v * f);
            auto ev = evaluate_likelihood(x, ys, trial, nugget);
            if (ev.lml > best_eval.lml) {
              current = std::move(trial);
              best_eval = std::move(ev);
              break;
            }
          }
        }
      }
    }
    model.kernel_ = std::move(current);
    model.nugget_ = nugget;
    model.lml_ = best_eval.lml;
    model.chol_ = std::move(best_eval.chol);
    model.weights_ = std::move(best_eval.weights);
    return model;
  }
  throw FitError("gp_fit: covariance not positive definite up to nugget " +
                 format_double(options.max_nugget));
}

GpPrediction gp_predict(const GpModel& model, std::span<const double> point) {
  if (point.size() != model.dim()) throw InvalidInput("gp_predict: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> x(point.data(), static_cast<Eigen::Index>(point.size()));
  const auto m = model.x_.rows();
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < m; ++i) k[i] = matern52(model.x_.row(i).transpose(), x, model.kernel_);
  const double mean_std = k.dot(model.weights_);
  const Eigen::VectorXd v = model.chol_.matrixL().solve(k);
  const double var_std = std::max(0.0, model.kernel_.signal_variance - v.squaredNorm());
  return {model.y_mean_ + model.y_scale_ * mean_std, model.y_scale_ * std::sqrt(var_std)};
}

double expected_improvement(double mean, double sd, double incumbent) {
  const double gain = incumbent - mean;
  if (!(sd >= 1e-12)) return std::max(0.0, gain);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gain * cdf + sd * pdf);
}

double expected_improvement(const GpModel& model, std::span<const double> x, double incumbent) {
  const auto pred = gp_predict(model, x);
  return expected_improvement(pred.mean, pred.sd, incumbent);
}

std::vector<double> propose_encoded(const GpModel& model, std::uint64_t seed, const ProposeOptions& options) {
  const auto d = model.dim();
  const double incumbent = model.targets().minCoeff();
  Rng rng(seed);
  const std::size_t n_cand = std::max<std::size_t>(1, options.candidates);

  std::vector<double> best(d), cand(d);
  double best_ei = -1.0;
  for (std::size_t c = 0; c < n_cand; ++c) {
    for (auto& u : cand) u = uniform01(rng);
    if (model.degenerate_targets()) return cand;
    const double ei = expected_improvement(model, cand, incumbent);
    if (ei > best_ei) {
      best_ei = ei;
      best = cand;
    }
  }

  double step = options.initial_step;
  for (std::size_t t = 0; t < options.refine_steps; ++t) {
    bool improved = false;
    for (std::size_t j = 0; j < d; ++j) {
      for (double sign : {1.0, -1.0}) {
        cand = best;
        cand[j] = std::clamp(best[j] + sign * step, 0.0, 1.0);
        if (cand[j] == best[j]) continue;
        const double ei = expected_improvement(model, cand, incumbent);
        if (ei > best_ei) {
          best_ei = ei;
          best = cand;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

Configuration propose(const GpModel& model, const HyperParamSpace& space, std::uint64_t seed,
                      const ProposeOptions& options) {
  if (space.size() != model.dim()) throw InvalidInput("propose: space/model dimension mismatch");
  return Configuration::from_encoded(space, propose_encoded(model, seed, options));
}

}  // namespace rfms
