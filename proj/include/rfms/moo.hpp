#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rfms {

using ObjectiveVector = std::vector<double>;

enum class Orientation { maximize, minimize };

/// True when `a` is no worse than `b` everywhere and strictly better somewhere.
bool dominates(std::span<const double> a, std::span<const double> b, Orientation orientation);

struct ParetoFront {
  std::vector<ObjectiveVector> points;
  Orientation orientation = Orientation::maximize;
};

/// Non-dominated subset, in first-occurrence order; duplicates kept once.
ParetoFront pareto_front(std::span<const ObjectiveVector> points, Orientation orientation);

/// Indices of the non-dominated points (first occurrence of duplicates).
std::vector<std::size_t> pareto_indices(std::span<const ObjectiveVector> points, Orientation orientation);

/// Dominated hypervolume (maximization) in 2 or 3 dimensions. Points that do
/// not strictly exceed the reference in every coordinate contribute nothing.
double hypervolume(std::span<const ObjectiveVector> points, std::span<const double> reference);
double hypervolume(const ParetoFront& front, std::span<const double> reference);

inline constexpr double kParegoRho = 0.05;

struct ScalarizationWeight {
  std::vector<double> lambda;
  double rho = kParegoRho;
};

/// Augmented Tchebycheff: max_j l_j f_j + rho * sum_j l_j f_j.
double parego_scalarize(std::span<const double> objectives, const ScalarizationWeight& weight);

/// Rescales each column to [0,1] by its min/max over the buffer; a column with
/// zero range maps to 0.
std::vector<ObjectiveVector> normalize_objectives(std::span<const ObjectiveVector> buffer);

/// Simplex-lattice resolution used when drawing weights.
inline constexpr std::size_t kWeightLatticeSteps = 10;

/// All weight vectors with components in {0, 1/s, ..., 1} summing to one.
std::vector<ScalarizationWeight> weight_lattice(std::size_t k, std::size_t steps = kWeightLatticeSteps);

/// Uniform draw from the weight lattice.
ScalarizationWeight sample_weight(std::size_t k, std::uint64_t seed);

}  // namespace rfms
