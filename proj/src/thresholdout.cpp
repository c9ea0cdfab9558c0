#include "rfms/thresholdout.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rfms {

ThresholdoutState::ThresholdoutState(ThresholdoutParams params, std::uint64_t seed)
    : params_(params), rng_(seed) {
  threshold_hat_ = params_.threshold + draw(params_.gamma);
}

double ThresholdoutState::draw(double scale) {
  if (!(scale > 0.0)) return 0.0;
  if (params_.family == NoiseFamily::gaussian) return std::normal_distribution<double>(0.0, scale)(rng_);
  // Inverse CDF of the Laplace distribution.
  const double u = uniform01(rng_) - 0.5;
  return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

double ThresholdoutState::answer(double f_openbox, double f_curator) {
  ++queries_;
  const double eta = draw(4.0 * params_.sigma);
  double out = f_openbox;
  if (std::abs(f_openbox - f_curator) > threshold_hat_ + eta) {
    out = f_curator + draw(params_.sigma);
    threshold_hat_ = params_.threshold + draw(params_.gamma);
    ++refreshes_;
  }
  return std::clamp(out, 0.0, 1.0);
}

}  // namespace rfms
