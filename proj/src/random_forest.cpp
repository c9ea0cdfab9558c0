#include <algorithm>
#include <numeric>
#include <utility>

#include "rfms/error.hpp"
#include "rfms/learners.hpp"

namespace rfms {

double DecisionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  std::uint32_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& node = nodes[at];
    at = row[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[at].prob_positive;
}

namespace {

struct Split {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // n_left * gini_left + n_right * gini_right
};

double weighted_gini(double n, double pos) {
  if (n <= 0.0) return 0.0;
  const double q = pos / n;
  return n * 2.0 * q * (1.0 - q);
}

}  // namespace

DecisionTree grow_tree(const Eigen::MatrixXd& x, std::span<const Label> y,
                       std::span<const std::size_t> sample, const TreeOptions& options, Rng& rng) {
  if (sample.empty()) throw InvalidInput("grow_tree: empty sample");
  const auto p = static_cast<std::size_t>(x.cols());
  const std::size_t mtry = std::clamp<std::size_t>(options.mtry, 1, p);

  DecisionTree tree;
  std::vector<std::pair<std::uint32_t, std::vector<std::size_t>>> pending;
  tree.nodes.emplace_back();
  pending.emplace_back(0, std::vector<std::size_t>(sample.begin(), sample.end()));

  std::vector<std::size_t> features(p);
  std::vector<std::pair<double, bool>> column;

  while (!pending.empty()) {
    auto [id, rows] = std::move(pending.back());
    pending.pop_back();
    const double n = static_cast<double>(rows.size());
    double pos = 0.0;
    for (auto r : rows) pos += y[r] == Label::positive;
    tree.nodes[id].prob_positive = pos / n;
    if (rows.size() <= options.min_node_size || pos == 0.0 || pos == n) continue;

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t k = 0; k < mtry; ++k) {
      const auto pick = k + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(p - k));
      std::swap(features[k], features[pick]);
    }

    Split best;
    best.impurity = weighted_gini(n, pos) - 1e-12;
    for (std::size_t k = 0; k < mtry; ++k) {
      const auto f = static_cast<Eigen::Index>(features[k]);
      column.clear();
      for (auto r : rows) column.emplace_back(x(static_cast<Eigen::Index>(r), f), y[r] == Label::positive);
      std::sort(column.begin(), column.end());
      double left_n = 0.0, left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_n += 1.0;
        left_pos += column[i].second;
        if (!(column[i].first < column[i + 1].first)) continue;
        const double impurity = weighted_gini(left_n, left_pos) + weighted_gini(n - left_n, pos - left_pos);
        if (impurity < best.impurity) {
          best.impurity = impurity;
          best.feature = static_cast<std::int32_t>(f);
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best.feature < 0) continue;

    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    const auto left_id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left_id;
    node.right = left_id + 1;
    pending.emplace_back(left_id + 1, std::move(right));
    pending.emplace_back(left_id, std::move(left));
  }
  return tree;
}

}  // namespace rfms
