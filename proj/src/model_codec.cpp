// Wire encoding of trained models. All integers and doubles are little-endian;
// doubles travel as their IEEE-754 bit pattern so predictions survive a
// roundtrip bit-exactly.
//
//   "RFMSM1" | u8 learner | u32 p | f64[p] mean | f64[p] scale | payload
//   elastic_net:   f64 intercept | f64[p] coef
//   random_forest: u32 trees (>0) | per tree: u32 nodes (>0) |
//                  per node: i32 feature | f64 threshold | u32 left | u32 right | f64 prob
//   kernel_svm:    f64 sigma | f64 intercept | u32 m | f64[m*p] support (row-major) | f64[m] dual

#include <bit>
#include <cstring>

#include "rfms/error.hpp"
#include "rfms/learners.hpp"

namespace rfms {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    auto b = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    auto b = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  /// Guards element counts against the bytes actually left.
  std::size_t count(std::uint64_t n, std::size_t bytes_each) {
    if (bytes_each != 0 && n > remaining() / bytes_each) throw DecodeError("model decode: truncated");
    return static_cast<std::size_t>(n);
  }
  std::span<const std::uint8_t> need(std::size_t n) {
    if (n > remaining()) throw DecodeError("model decode: truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kMagicLen = sizeof(kModelMagic) - 1;

}  // namespace

std::vector<std::uint8_t> serialize_model(const TrainedModel& model) {
  Writer w;
  w.raw(std::string_view(kModelMagic, kMagicLen));
  w.u8(static_cast<std::uint8_t>(model.params().index()));
  const auto p = model.input_dim();
  w.u32(static_cast<std::uint32_t>(p));
  for (std::size_t j = 0; j < p; ++j) w.f64(model.scaling().mean[static_cast<Eigen::Index>(j)]);
  for (std::size_t j = 0; j < p; ++j) w.f64(model.scaling().scale[static_cast<Eigen::Index>(j)]);

  if (const auto* en = std::get_if<ElasticNetModel>(&model.params())) {
    w.f64(en->intercept);
    for (Eigen::Index j = 0; j < en->coef.size(); ++j) w.f64(en->coef[j]);
  } else if (const auto* rf = std::get_if<RandomForestModel>(&model.params())) {
    w.u32(static_cast<std::uint32_t>(rf->trees.size()));
    for (const auto& tree : rf->trees) {
      w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
      for (const auto& node : tree.nodes) {
        w.i32(node.feature);
        w.f64(node.threshold);
        w.u32(node.left);
        w.u32(node.right);
        w.f64(node.prob_positive);
      }
    }
  } else {
    const auto& svm = std::get<KernelSvmModel>(model.params());
    w.f64(svm.sigma);
    w.f64(svm.intercept);
    w.u32(static_cast<std::uint32_t>(svm.support.rows()));
    for (Eigen::Index r = 0; r < svm.support.rows(); ++r)
      for (Eigen::Index c = 0; c < svm.support.cols(); ++c) w.f64(svm.support(r, c));
    for (Eigen::Index r = 0; r < svm.dual.size(); ++r) w.f64(svm.dual[r]);
  }
  return w.take();
}

TrainedModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.need(kMagicLen);
  if (std::memcmp(magic.data(), kModelMagic, kMagicLen) != 0)
    throw DecodeError("model decode: bad magic or unsupported version");
  const auto tag = r.u8();
  const auto p = r.count(r.u32(), 16);
  if (p == 0) throw DecodeError("model decode: zero feature dimension");
  Standardizer scaling;
  scaling.mean.resize(static_cast<Eigen::Index>(p));
  scaling.scale.resize(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) scaling.mean[static_cast<Eigen::Index>(j)] = r.f64();
  for (std::size_t j = 0; j < p; ++j) scaling.scale[static_cast<Eigen::Index>(j)] = r.f64();

  ModelParams params;
  switch (tag) {
    case 0: {
      ElasticNetModel en;
      en.intercept = r.f64();
      en.coef.resize(static_cast<Eigen::Index>(p));
      for (std::size_t j = 0; j < p; ++j) en.coef[static_cast<Eigen::Index>(j)] = r.f64();
      params = std::move(en);
      break;
    }
    case 1: {
      RandomForestModel rf;
      const auto n_trees = r.count(r.u32(), 4);
      if (n_trees == 0) throw DecodeError("model decode: empty forest");
      rf.trees.resize(n_trees);
      for (auto& tree : rf.trees) {
        const auto n_nodes = r.count(r.u32(), 28);
        if (n_nodes == 0) throw DecodeError("model decode: empty tree");
        tree.nodes.resize(n_nodes);
        for (std::size_t k = 0; k < n_nodes; ++k) {
          auto& node = tree.nodes[k];
          node.feature = r.i32();
          node.threshold = r.f64();
          node.left = r.u32();
          node.right = r.u32();
          node.prob_positive = r.f64();
          // Children always follow their parent, which rules out cycles.
          if (node.feature >= 0 &&
              (static_cast<std::size_t>(node.feature) >= p || node.left <= k || node.right <= k ||
               node.left >= n_nodes || node.right >= n_nodes))
            throw DecodeError("model decode: invalid tree node");
          if (node.feature < -1) throw DecodeError("model decode: invalid feature index");
        }
      }
      params = std::move(rf);
      break;
    }
    case 2: {
      KernelSvmModel svm;
      svm.sigma = r.f64();
      svm.intercept = r.f64();
      const auto m = r.count(r.u32(), 8 * (p + 1));
      svm.support.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
      for (Eigen::Index i = 0; i < svm.support.rows(); ++i)
        for (Eigen::Index c = 0; c < svm.support.cols(); ++c) svm.support(i, c) = r.f64();
      svm.dual.resize(static_cast<Eigen::Index>(m));
      for (Eigen::Index i = 0; i < svm.dual.size(); ++i) svm.dual[i] = r.f64();
      params = std::move(svm);
      break;
    }
    default: throw DecodeError("model decode: unknown learner tag");
  }
  if (r.remaining() != 0) throw DecodeError("model decode: trailing bytes");
  return TrainedModel(std::move(scaling), std::move(params));
}

}  // namespace rfms
