#include "rfms/moo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "rfms/error.hpp"
#include "rfms/seeds.hpp"

namespace rfms {

bool dominates(std::span<const double> a, std::span<const double> b, Orientation orientation) {
  bool strictly = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double better = orientation == Orientation::maximize ? a[j] - b[j] : b[j] - a[j];
    if (better < 0.0) return false;
    if (better > 0.0) strictly = true;
  }
  return strictly;
}

std::vector<std::size_t> pareto_indices(std::span<const ObjectiveVector> points, Orientation orientation) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != points[0].size()) throw InvalidInput("pareto_front: ragged objective vectors");
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      if (j == i) continue;
      if (dominates(points[j], points[i], orientation)) keep = false;
      if (j < i && points[j] == points[i]) keep = false;
    }
    if (keep) out.push_back(i);
  }
  return out;
}

ParetoFront pareto_front(std::span<const ObjectiveVector> points, Orientation orientation) {
  ParetoFront front;
  front.orientation = orientation;
  for (auto i : pareto_indices(points, orientation)) front.points.push_back(points[i]);
  return front;
}

namespace {

// 2-D sweep over points sorted by the first coordinate, descending.
double hypervolume_2d(std::vector<std::array<double, 2>> pts, double ref_x, double ref_y) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] != b[0] ? a[0] > b[0] : a[1] > b[1];
  });
  double volume = 0.0;
  double covered_y = ref_y;
  for (const auto& p : pts) {
    if (p[1] > covered_y) {
      volume += (p[0] - ref_x) * (p[1] - covered_y);
      covered_y = p[1];
    }
  }
  return volume;
}

}  // namespace

double hypervolume(std::span<const ObjectiveVector> points, std::span<const double> reference) {
  const auto d = reference.size();
  if (d != 2 && d != 3) throw InvalidInput("hypervolume: only 2 or 3 objectives are supported");
  std::vector<ObjectiveVector> kept;
  for (const auto& p : points) {
    if (p.size() != d) throw InvalidInput("hypervolume: reference dimension mismatch");
    bool inside = true;
    for (std::size_t j = 0; j < d; ++j) inside = inside && p[j] > reference[j];
    if (inside) kept.push_back(p);
  }
  if (kept.empty()) return 0.0;

  if (d == 2) {
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : kept) pts.push_back({p[0], p[1]});
    return hypervolume_2d(std::move(pts), reference[0], reference[1]);
  }

  // Slice along the third coordinate: between consecutive distinct z levels
  // the cross-section is the 2-D volume of every point reaching that high.
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a[2] > b[2]; });
  double volume = 0.0;
  std::vector<std::array<double, 2>> active;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    active.push_back({kept[i][0], kept[i][1]});
    const double lower = i + 1 < kept.size() ? kept[i + 1][2] : reference[2];
    const double height = kept[i][2] - lower;
    if (height > 0.0) volume += height * hypervolume_2d(active, reference[0], reference[1]);
  }
  return volume;
}

double hypervolume(const ParetoFront& front, std::span<const double> reference) {
  if (front.orientation != Orientation::maximize)
    throw InvalidInput("hypervolume: front must be in maximization orientation");
  return hypervolume(front.points, reference);
}

double parego_scalarize(std::span<const double> objectives, const ScalarizationWeight& weight) {
  if (objectives.size() != weight.lambda.size())
    throw InvalidInput("parego_scalarize: weight dimension mismatch");
  double worst = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t j = 0; j < objectives.size(); ++j) {
    const double term = weight.lambda[j] * objectives[j];
    worst = std::max(worst, term);
    sum += term;
  }
  return worst + weight.rho * sum;
}

std::vector<ObjectiveVector> normalize_objectives(std::span<const ObjectiveVector> buffer) {
  std::vector<ObjectiveVector> out(buffer.begin(), buffer.end());
  if (buffer.empty()) return out;
  const auto k = buffer[0].size();
  for (std::size_t j = 0; j < k; ++j) {
    double lo = buffer[0][j], hi = buffer[0][j];
    for (const auto& row : buffer) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    for (auto& row : out) row[j] = hi - lo > 0.0 ? (row[j] - lo) / (hi - lo) : 0.0;
  }
  return out;
}

std::vector<ScalarizationWeight> weight_lattice(std::size_t k, std::size_t steps) {
  if (k < 2) throw InvalidInput("weight_lattice: need at least two objectives");
  std::vector<ScalarizationWeight> out;
  std::vector<std::size_t> parts(k, 0);
  std::function<void(std::size_t, std::size_t)> fill = [&](std::size_t j, std::size_t left) {
    if (j + 1 == k) {
      parts[j] = left;
      ScalarizationWeight w;
      for (auto c : parts) w.lambda.push_back(static_cast<double>(c) / static_cast<double>(steps));
      out.push_back(std::move(w));
      return;
    }
    for (std::size_t c = left + 1; c-- > 0;) {
      parts[j] = c;
      fill(j + 1, left - c);
    }
  };
  fill(0, steps);
  return out;
}

ScalarizationWeight sample_weight(std::size_t k, std::uint64_t seed) {
  const auto lattice = weight_lattice(k);
  Rng rng(seed);
  const auto pick = std::min(lattice.size() - 1,
                             static_cast<std::size_t>(uniform01(rng) * static_cast<double>(lattice.size())));
  return lattice[pick];
}

}  // namespace rfms
