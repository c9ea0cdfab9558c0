#include "rfms/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rfms/error.hpp"
#include "rfms/seeds.hpp"

namespace rfms {

Dataset::Dataset(Eigen::MatrixXd features, std::vector<Label> labels,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)), labels_(std::move(labels)), names_(std::move(feature_names)) {
  if (static_cast<std::size_t>(features_.rows()) != labels_.size())
    throw InvalidInput("dataset: feature rows and label count differ");
  if (labels_.empty() || features_.cols() == 0)
    throw InvalidInput("dataset: needs at least one row and one feature");
  if (!features_.allFinite()) throw InvalidInput("dataset: non-finite feature value");
  if (!names_.empty() && names_.size() != cols())
    throw InvalidInput("dataset: feature name count differs from column count");
}

std::size_t Dataset::count(Label label) const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

void Dataset::require_both_classes(std::string_view context) const {
  if (!has_both_classes())
    throw InvalidInput(std::string(context) + ": dataset must contain both classes");
}

std::vector<std::size_t> Dataset::rows_with(Label label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) out.push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), features_.cols());
  std::vector<Label> y;
  y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= labels_.size()) throw InvalidInput("dataset subset: row index out of range");
    x.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(rows[i]));
    y.push_back(labels_[rows[i]]);
  }
  return Dataset(std::move(x), std::move(y), names_);
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols()) throw InvalidInput("dataset concat: column count mismatch");
  Eigen::MatrixXd x(a.features_.rows() + b.features_.rows(), a.features_.cols());
  x << a.features_, b.features_;
  std::vector<Label> y = a.labels_;
  y.insert(y.end(), b.labels_.begin(), b.labels_.end());
  return Dataset(std::move(x), std::move(y), a.names_);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw InvalidInput("csv line " + std::to_string(line_no) + ": not a number: '" +
                       std::string(field) + "'");
  return v;
}

Label parse_label(std::string_view field, std::size_t line_no) {
  if (field == "1" || field == "pos" || field == "1.0") return Label::positive;
  if (field == "0" || field == "neg" || field == "0.0") return Label::negative;
  throw InvalidInput("csv line " + std::to_string(line_no) + ": bad target '" +
                     std::string(field) + "'");
}

}  // namespace

Dataset parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("csv: missing header");
  auto header = split_commas(line);
  std::size_t target = header.size();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "target") {
      if (target != header.size()) throw InvalidInput("csv: duplicate target column");
      target = i;
    } else {
      names.emplace_back(header[i]);
    }
  }
  if (target == header.size()) throw InvalidInput("csv: no 'target' column");

  std::vector<double> values;
  std::vector<Label> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_commas(line);
    if (fields.size() != header.size())
      throw InvalidInput("csv line " + std::to_string(line_no) + ": wrong field count");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == target)
        labels.push_back(parse_label(fields[i], line_no));
      else
        values.push_back(parse_number(fields[i], line_no));
    }
  }
  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto p = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < p; ++c) x(r, c) = values[static_cast<std::size_t>(r * p + c)];
  return Dataset(std::move(x), std::move(labels), std::move(names));
}

Dataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return parse_csv(in);
}

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t c = 0; c < data.cols(); ++c)
    out << (data.feature_names().empty() ? "x" + std::to_string(c + 1) : data.feature_names()[c])
        << ',';
  out << "target\n";
  const auto& x = data.features();
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c)
      out << format_double(x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) << ',';
    out << (data.labels()[r] == Label::positive ? '1' : '0') << '\n';
  }
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_csv(data, out);
}

void SiteAssignment::validate(std::size_t n_sites) const {
  std::array<std::size_t, 5> all{openbox, curators[0], curators[1], curators[2], lockbox};
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] >= n_sites) throw InvalidInput("site assignment: index out of range");
    for (std::size_t j = i + 1; j < all.size(); ++j)
      if (all[i] == all[j]) throw InvalidInput("site assignment: indices not distinct");
  }
}

SplitIndex stratified_split(const Dataset& data, double outbag_fraction, std::uint64_t seed) {
  if (!(outbag_fraction > 0.0 && outbag_fraction < 1.0))
    throw InvalidInput("stratified_split: outbag fraction must lie in (0,1)");
  data.require_both_classes("stratified_split");
  SplitIndex split;
  split.seed = seed;
  Rng rng(seed);
  for (Label label : {Label::negative, Label::positive}) {
    auto rows = data.rows_with(label);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_out = static_cast<std::size_t>(
        std::floor(static_cast<double>(rows.size()) * outbag_fraction + 1e-9));
    split.outbag.insert(split.outbag.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_out));
    split.inbag.insert(split.inbag.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_out), rows.end());
  }
  std::sort(split.inbag.begin(), split.inbag.end());
  std::sort(split.outbag.begin(), split.outbag.end());
  return split;
}

SplitIndex lockbox_split(const Dataset& data) {
  SplitIndex split;
  split.inbag.resize(data.rows());
  std::iota(split.inbag.begin(), split.inbag.end(), std::size_t{0});
  split.outbag = split.inbag;
  return split;
}

std::string_view to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::elastic_net: return "elastic_net";
    case LearnerKind::random_forest: return "random_forest";
    case LearnerKind::kernel_svm: return "kernel_svm";
  }
  return "?";
}

LearnerKind learner_from_string(std::string_view name) {
  if (name == "elastic_net" || name == "glmnet") return LearnerKind::elastic_net;
  if (name == "random_forest" || name == "ranger") return LearnerKind::random_forest;
  if (name == "kernel_svm" || name == "ksvm") return LearnerKind::kernel_svm;
  throw InvalidInput("unknown learner '" + std::string(name) + "'");
}

double Dimension::decode(double unit) const {
  unit = std::clamp(unit, 0.0, 1.0);
  const double x = lower + unit * (upper - lower);
  switch (kind) {
    case DimKind::real: return x;
    case DimKind::real_log2: return std::exp2(x);
    case DimKind::integer: return std::round(x);
  }
  return x;
}

double Dimension::encode(double value) const {
  const double x = kind == DimKind::real_log2 ? std::log2(value) : value;
  return std::clamp((x - lower) / (upper - lower), 0.0, 1.0);
}

HyperParamSpace::HyperParamSpace(LearnerKind learner, std::vector<Dimension> dims)
    : learner_(learner), dims_(std::move(dims)) {
  for (const auto& d : dims_)
    if (!(d.lower < d.upper)) throw InvalidInput("hyperparameter space: empty range for " + d.name);
}

const HyperParamSpace& HyperParamSpace::for_learner(LearnerKind learner) {
  constexpr double eps = kOpenBoundEpsilon;
  static const HyperParamSpace elastic_net(
      LearnerKind::elastic_net, {{"alpha", DimKind::real, 0.0 + eps, 1.0 - eps},
                                 {"s", DimKind::real_log2, -10.0 + eps, 10.0 - eps}});
  static const HyperParamSpace random_forest(
      LearnerKind::random_forest, {{"num.trees", DimKind::integer, 100.0, 5000.0},
                                   {"min.node.size", DimKind::integer, 1.0, 50.0},
                                   {"sample.fraction", DimKind::real, 0.1 + eps, 1.0 - eps}});
  static const HyperParamSpace kernel_svm(
      LearnerKind::kernel_svm, {{"C", DimKind::real_log2, -15.0 + eps, 15.0 - eps},
                                {"sigma", DimKind::real_log2, -15.0 + eps, 15.0 - eps}});
  switch (learner) {
    case LearnerKind::elastic_net: return elastic_net;
    case LearnerKind::random_forest: return random_forest;
    case LearnerKind::kernel_svm: return kernel_svm;
  }
  return elastic_net;
}

std::size_t HyperParamSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < dims_.size(); ++i)
    if (dims_[i].name == name) return i;
  throw InvalidInput("no hyperparameter named '" + std::string(name) + "'");
}

Configuration Configuration::from_encoded(const HyperParamSpace& space, std::span<const double> unit) {
  if (unit.size() != space.size()) throw InvalidInput("configuration: dimension mismatch");
  std::vector<double> values(unit.size()), encoded(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    if (!std::isfinite(unit[i])) throw InvalidInput("configuration: non-finite coordinate");
    encoded[i] = std::clamp(unit[i], 0.0, 1.0);
    values[i] = space.dims()[i].decode(encoded[i]);
  }
  return Configuration(space.learner(), std::move(values), std::move(encoded));
}

Configuration Configuration::from_values(const HyperParamSpace& space, std::span<const double> values) {
  if (values.size() != space.size()) throw InvalidInput("configuration: dimension mismatch");
  std::vector<double> unit(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) unit[i] = space.dims()[i].encode(values[i]);
  return from_encoded(space, unit);
}

double Configuration::value(std::string_view name) const {
  return values_[space().index_of(name)];
}

std::string Configuration::to_string() const {
  std::ostringstream os;
  const auto& dims = space().dims();
  for (std::size_t i = 0; i < values_.size(); ++i)
    os << (i ? ";" : "") << dims[i].name << '=' << format_double(values_[i]);
  return os.str();
}

Configuration sample_configuration(const HyperParamSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> unit(space.size());
  for (auto& u : unit) u = uniform01(rng);
  return Configuration::from_encoded(space, unit);
}

std::string_view to_string(Phase phase) {
  return phase == Phase::initial_design ? "initial_design" : "bo";
}

double weighted_remote_loss(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size() || losses.empty())
    throw InvalidInput("weighted_remote_loss: size mismatch");
  double total = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    total += weights[i];
    acc += weights[i] * losses[i];
  }
  if (!(total > 0.0)) throw InvalidInput("weighted_remote_loss: weights must sum to > 0");
  return acc / total;
}

EvalRecord make_eval_record(Configuration config, double j_local, std::vector<double> remote_losses,
                            std::vector<double> curator_weights, std::size_t iteration, Phase phase) {
  const double j_remote = weighted_remote_loss(remote_losses, curator_weights);
  return EvalRecord{std::move(config), j_local,   std::move(remote_losses), std::move(curator_weights),
                    j_remote,          iteration, phase};
}

}  // namespace rfms
