#pragma once

#include <cstddef>
#include <cstdint>

#include "rfms/seeds.hpp"

namespace rfms {

enum class NoiseFamily { gaussian, laplace };

/// Thresholdout settings. Noise scales are standard deviations for the
/// Gaussian family and the Laplace scale parameter otherwise.
struct ThresholdoutParams {
  double threshold = 0.02;  // T
  double sigma = 0.03;      // answer noise xi ~ N(0, sigma); comparison noise eta ~ N(0, 4 sigma)
  double gamma = 0.0;       // scale of the threshold refresh noise: T_hat = T + N(0, gamma)
  NoiseFamily family = NoiseFamily::gaussian;
};

/// Answer mechanism guarding one curator. Single writer; callers serialize.
class ThresholdoutState {
 public:
  ThresholdoutState(ThresholdoutParams params, std::uint64_t seed);

  /// Returns the curator value plus noise when it disagrees with the openbox
  /// value by more than the noisy threshold, otherwise the openbox value.
  /// The result is clamped to [0,1].
  double answer(double f_openbox, double f_curator);

  const ThresholdoutParams& params() const noexcept { return params_; }
  double current_threshold() const noexcept { return threshold_hat_; }
  /// Number of threshold refreshes, i.e. of over-threshold answers.
  std::size_t refresh_count() const noexcept { return refreshes_; }
  std::size_t query_count() const noexcept { return queries_; }

 private:
  double draw(double scale);

  ThresholdoutParams params_;
  Rng rng_;
  double threshold_hat_ = 0.0;
  std::size_t refreshes_ = 0;
  std::size_t queries_ = 0;
};

inline double thresholdout_answer(ThresholdoutState& state, double f_openbox, double f_curator) {
  return state.answer(f_openbox, f_curator);
}

}  // namespace rfms
