#include <algorithm>
#include <cmath>

#include "rfms/error.hpp"
#include "rfms/learners.hpp"

namespace rfms {

namespace {

double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double mean_log_loss(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) acc += softplus(eta[i]) - y[i] * eta[i];
  return acc / static_cast<double>(eta.size());
}

// Loss after moving eta by delta * column.
double shifted_log_loss(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                        const Eigen::Ref<const Eigen::VectorXd>& column, double delta) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i] + delta * column[i];
    acc += softplus(e) - y[i] * e;
  }
  return acc / static_cast<double>(eta.size());
}

Eigen::VectorXd label_vector(std::span<const Label> y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<Eigen::Index>(i)] = y[i] == Label::positive;
  return v;
}

}  // namespace

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double elastic_net_objective(const Eigen::MatrixXd& x, std::span<const Label> y,
                             const ElasticNetModel& model, double alpha, double s) {
  const Eigen::VectorXd eta = (x * model.coef).array() + model.intercept;
  return mean_log_loss(eta, label_vector(y)) +
         s * (alpha * model.coef.lpNorm<1>() + 0.5 * (1.0 - alpha) * model.coef.squaredNorm());
}

ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& x, std::span<const Label> labels, double alpha,
                              double s, const ElasticNetOptions& options) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size())
    throw InvalidInput("elastic net: feature/label size mismatch");
  const double nd = static_cast<double>(n);
  const Eigen::VectorXd y = label_vector(labels);
  const double l1 = s * alpha;
  const double l2 = s * (1.0 - alpha);

  ElasticNetFit fit;
  fit.model.coef = Eigen::VectorXd::Zero(p);
  const double frac = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  fit.model.intercept = std::log(frac / (1.0 - frac));
  if (y.minCoeff() == y.maxCoeff()) {
    fit.model.intercept = y[0] > 0.5 ? 20.0 : -20.0;
    return fit;
  }

  // Majorization constants: p(1-p) <= 1/4.
  Eigen::VectorXd lipschitz = x.colwise().squaredNorm().transpose() / (4.0 * nd);

  auto& beta = fit.model.coef;
  double& b0 = fit.model.intercept;
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, b0);
  double loss = mean_log_loss(eta, y);
  double objective = loss;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);

  // One prox-Newton try with the local curvature, falling back to the
  // majorizer step (which never increases the objective).
  auto update = [&](const Eigen::Ref<const Eigen::VectorXd>& col, double& coef, double lipschitz_j,
                    double pen_l1, double pen_l2) {
    double grad = 0.0, curv = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = sigmoid(eta[i]);
      grad += col[i] * (pr - y[i]);
      curv += col[i] * col[i] * pr * (1.0 - pr);
    }
    grad /= nd;
    curv /= nd;
    const double old_pen = pen_l1 * std::abs(coef) + 0.5 * pen_l2 * coef * coef;
    const double old_f = loss + old_pen;
    for (double c : {curv, lipschitz_j}) {
      if (!(c > 1e-300)) continue;
      const double next = soft_threshold(c * coef - grad, pen_l1) / (c + pen_l2);
      const double delta = next - coef;
      if (delta == 0.0) return;
      const double new_loss = shifted_log_loss(eta, y, col, delta);
      const double new_f = new_loss + pen_l1 * std::abs(next) + 0.5 * pen_l2 * next * next;
      if (new_f <= old_f) {
        coef = next;
        eta += delta * col;
        loss = new_loss;
        return;
      }
    }
  };

  if (options.record_objective) fit.objective_trace.push_back(elastic_net_objective(x, labels, fit.model, alpha, s));
  for (std::size_t cycle = 0; cycle < options.max_cycles; ++cycle) {
    update(ones, b0, 0.25, 0.0, 0.0);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (lipschitz[j] <= 0.0) continue;
      update(x.col(j), beta[j], lipschitz[j], l1, l2);
    }
    const double next_objective = loss + l1 * beta.lpNorm<1>() + 0.5 * l2 * beta.squaredNorm();
    ++fit.cycles;
    if (options.record_objective)
      fit.objective_trace.push_back(elastic_net_objective(x, labels, fit.model, alpha, s));
    const double gain = objective - next_objective;
    objective = next_objective;
    if (gain <= options.tolerance * (1.0 + std::abs(objective))) break;
  }
  return fit;
}

}  // namespace rfms
