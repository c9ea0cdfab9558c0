#include <cmath>

#include "rfms/error.hpp"
#include "rfms/learners.hpp"

namespace rfms {

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b, double sigma) {
  return std::exp(-sigma * (a - b).squaredNorm());
}

KernelSvmModel fit_kernel_svm(const Eigen::MatrixXd& x, std::span<const Label> labels, double cost,
                              double sigma) {
  const auto n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size())
    throw InvalidInput("kernel svm: feature/label size mismatch");
  if (!(cost > 0.0) || !(sigma > 0.0)) throw InvalidInput("kernel svm: C and sigma must be positive");

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] == Label::positive ? 1.0 : -1.0;

  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd k = (x * x.transpose() * 2.0).colwise() - sq;
  k.rowwise() -= sq.transpose();
  k = (k.array().min(0.0) * sigma).exp().matrix();
  k.diagonal().array() += 1.0 / cost;

  // Block elimination of the bordered system through the positive definite
  // block K + I/C.
  Eigen::MatrixXd rhs(n, 2);
  rhs.col(0).setOnes();
  rhs.col(1) = y;
  Eigen::MatrixXd sol;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) {
    sol = llt.solve(rhs);
  } else {
    sol = k.ldlt().solve(rhs);
  }
  const double denom = sol.col(0).sum();
  KernelSvmModel model;
  model.sigma = sigma;
  model.support = x;
  model.intercept = std::abs(denom) > 1e-300 ? sol.col(1).sum() / denom : y.mean();
  model.dual = sol.col(1) - model.intercept * sol.col(0);
  if (!model.dual.allFinite() || !std::isfinite(model.intercept)) {
    model.dual.setZero();
    model.intercept = y.mean();
  }
  return model;
}

}  // namespace rfms
