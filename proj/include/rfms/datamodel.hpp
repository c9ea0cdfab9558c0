#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace rfms {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

/// Dense feature matrix with binary labels; the unit held by one data site.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::MatrixXd features, std::vector<Label> labels,
          std::vector<std::string> feature_names = {});

  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  bool empty() const noexcept { return labels_.empty(); }

  const Eigen::MatrixXd& features() const noexcept { return features_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  std::size_t count(Label label) const noexcept;
  bool has_both_classes() const noexcept {
    return count(Label::negative) > 0 && count(Label::positive) > 0;
  }
  /// Throws InvalidInput unless both classes are present.
  void require_both_classes(std::string_view context) const;

  /// Row indices carrying `label`, in ascending order.
  std::vector<std::size_t> rows_with(Label label) const;

  Dataset subset(std::span<const std::size_t> rows) const;
  static Dataset concat(const Dataset& a, const Dataset& b);

 private:
  Eigen::MatrixXd features_;
  std::vector<Label> labels_;
  std::vector<std::string> names_;
};

/// CSV with a header row and a `target` column (0/1 or neg/pos); every other
/// column is a numeric feature.
Dataset parse_csv(std::istream& in);
Dataset read_csv(const std::filesystem::path& path);
void write_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Role assignment of the five data sites of one scenario.
struct SiteAssignment {
  std::size_t openbox = 0;
  std::array<std::size_t, 3> curators{};
  std::size_t lockbox = 0;

  /// Throws InvalidInput unless the five indices are distinct and < n_sites.
  void validate(std::size_t n_sites = 5) const;
  bool operator==(const SiteAssignment&) const = default;
};

struct SplitIndex {
  std::vector<std::size_t> inbag;
  std::vector<std::size_t> outbag;
  std::uint64_t seed = 0;
};

/// Stratified inbag/outbag split. Each class contributes floor(n_class *
/// outbag_fraction) rows to the outbag; the remainder stays inbag.
SplitIndex stratified_split(const Dataset& data, double outbag_fraction, std::uint64_t seed);

/// Lockbox convention: inbag and outbag both cover every row.
SplitIndex lockbox_split(const Dataset& data);

enum class LearnerKind { elastic_net, random_forest, kernel_svm };

std::string_view to_string(LearnerKind kind);
LearnerKind learner_from_string(std::string_view name);

enum class DimKind { real, real_log2, integer };

/// One tunable dimension. `lower`/`upper` are on the search scale (the
/// exponent for real_log2 dims) after open bounds were closed by an epsilon.
struct Dimension {
  std::string name;
  DimKind kind = DimKind::real;
  double lower = 0.0;
  double upper = 1.0;

  double decode(double unit) const;
  double encode(double value) const;
};

inline constexpr double kOpenBoundEpsilon = 1e-9;

class HyperParamSpace {
 public:
  HyperParamSpace(LearnerKind learner, std::vector<Dimension> dims);

  /// The tuning box of each learner family.
  static const HyperParamSpace& for_learner(LearnerKind learner);

  LearnerKind learner() const noexcept { return learner_; }
  std::size_t size() const noexcept { return dims_.size(); }
  const std::vector<Dimension>& dims() const noexcept { return dims_; }
  std::size_t index_of(std::string_view name) const;

 private:
  LearnerKind learner_;
  std::vector<Dimension> dims_;
};

/// A point in a learner's hyperparameter space, held both on the native scale
/// and encoded into the unit cube.
class Configuration {
 public:
  static Configuration from_encoded(const HyperParamSpace& space, std::span<const double> unit);
  static Configuration from_values(const HyperParamSpace& space, std::span<const double> values);

  LearnerKind learner() const noexcept { return learner_; }
  const HyperParamSpace& space() const { return HyperParamSpace::for_learner(learner_); }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& encoded() const noexcept { return encoded_; }
  double value(std::string_view name) const;

  std::string to_string() const;

  bool operator==(const Configuration&) const = default;

 private:
  Configuration(LearnerKind learner, std::vector<double> values, std::vector<double> encoded)
      : learner_(learner), values_(std::move(values)), encoded_(std::move(encoded)) {}

  LearnerKind learner_ = LearnerKind::elastic_net;
  std::vector<double> values_;
  std::vector<double> encoded_;
};

/// Uniform draw over the encoded unit cube.
Configuration sample_configuration(const HyperParamSpace& space, std::uint64_t seed);

enum class Phase { initial_design, bo };

std::string_view to_string(Phase phase);

/// One row of an optimization history.
struct EvalRecord {
  Configuration config;
  double j_local = 0.0;
  std::vector<double> j_remote_per_curator;
  std::vector<double> curator_weights;  // inbag sizes
  double j_remote = 0.0;
  std::size_t iteration = 0;
  Phase phase = Phase::initial_design;
};

/// Size-weighted mean of per-curator losses.
double weighted_remote_loss(std::span<const double> losses, std::span<const double> weights);

EvalRecord make_eval_record(Configuration config, double j_local,
                            std::vector<double> remote_losses,
                            std::vector<double> curator_weights, std::size_t iteration,
                            Phase phase);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace rfms
