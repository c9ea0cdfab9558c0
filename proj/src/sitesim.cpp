#include "rfms/sitesim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "rfms/error.hpp"
#include "rfms/seeds.hpp"

namespace rfms {

std::vector<std::vector<std::size_t>> pair_buckets(std::vector<std::vector<std::size_t>> negative,
                                                   std::vector<std::vector<std::size_t>> positive) {
  if (negative.size() != positive.size()) throw InvalidInput("pair_buckets: bucket count mismatch");
  auto by_size = [](const auto& a, const auto& b) { return a.size() < b.size(); };
  std::stable_sort(negative.begin(), negative.end(), by_size);
  std::stable_sort(positive.begin(), positive.end(), by_size);
  const auto n = negative.size();
  std::vector<std::vector<std::size_t>> sites(n);
  for (std::size_t i = 0; i < n; ++i) {
    sites[i] = negative[i];
    sites[i].insert(sites[i].end(), positive[n - 1 - i].begin(), positive[n - 1 - i].end());
    std::sort(sites[i].begin(), sites[i].end());
  }
  return sites;
}

namespace {

SiteSplit materialize(const Dataset& data, std::vector<std::vector<std::size_t>> rows) {
  SiteSplit out;
  for (const auto& r : rows) out.sites.push_back(data.subset(r));
  out.rows = std::move(rows);
  return out;
}

}  // namespace

SiteSplit srs_split(const Dataset& data, std::size_t n_sites, std::uint64_t seed) {
  if (n_sites < 2) throw InvalidInput("srs_split: need at least two sites");
  Rng rng(seed);
  std::array<std::vector<std::vector<std::size_t>>, 2> buckets;
  for (Label label : {Label::negative, Label::positive}) {
    auto rows = data.rows_with(label);
    if (rows.size() < n_sites)
      throw InvalidInput("srs_split: every class needs at least " + std::to_string(n_sites) + " rows");
    std::shuffle(rows.begin(), rows.end(), rng);
    auto& b = buckets[static_cast<std::size_t>(label)];
    b.resize(n_sites);
    for (std::size_t i = 0; i < rows.size(); ++i) b[i % n_sites].push_back(rows[i]);
  }
  return materialize(data, pair_buckets(std::move(buckets[0]), std::move(buckets[1])));
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd PcaResult::project(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd z = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  return z * components;
}

Eigen::MatrixXd PcaResult::reconstruct(const Eigen::MatrixXd& scores) const {
  return scores * components.transpose();
}

PcaResult pca(const Eigen::MatrixXd& x, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw InvalidInput("pca: variance fraction must lie in (0,1]");
  if (x.rows() < 2) throw InvalidInput("pca: need at least two rows");
  PcaResult out;
  const double n = static_cast<double>(x.rows());
  out.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - out.mean.transpose();
  out.scale = (centered.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (auto& s : out.scale)
    if (!(s > 1e-12)) s = 1.0;
  const Eigen::MatrixXd z = centered.array().rowwise() / out.scale.transpose().array();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinV);
  out.eigenvalues = svd.singularValues().array().square() / n;
  const double total = out.eigenvalues.sum();
  const double top = out.eigenvalues.size() ? out.eigenvalues[0] : 0.0;
  out.rank = static_cast<std::size_t>((out.eigenvalues.array() > 1e-10 * std::max(top, 1e-300)).count());
  std::size_t q = 0;
  double acc = 0.0;
  while (q < out.rank) {
    acc += out.eigenvalues[static_cast<Eigen::Index>(q)];
    ++q;
    if (acc >= variance_fraction * total - 1e-12 * total) break;
  }
  q = std::max<std::size_t>(q, 1);
  out.components = svd.matrixV().leftCols(static_cast<Eigen::Index>(q));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Gaussian {
  Eigen::LLT<Eigen::MatrixXd> chol;
  double log_norm = 0.0;
};

Gaussian factor(const Eigen::MatrixXd& cov) {
  Gaussian g;
  g.chol.compute(cov);
  if (g.chol.info() != Eigen::Success) throw InvalidInput("mog: covariance not positive definite");
  const Eigen::MatrixXd l = g.chol.matrixL();
  const double q = static_cast<double>(cov.rows());
  g.log_norm = -0.5 * q * std::log(2.0 * std::numbers::pi) - l.diagonal().array().log().sum();
  return g;
}

// Log of c_k N(x_i | mu_k, Sigma), n x k.
Eigen::MatrixXd log_joint(const MogModel& model, const Gaussian& g, const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto k = model.means.rows();
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::MatrixXd diff = (x.rowwise() - model.means.row(c)).transpose();
    const Eigen::MatrixXd solved = g.chol.matrixL().solve(diff);
    const Eigen::VectorXd maha = solved.colwise().squaredNorm().transpose();
    const double log_mix = model.mixing[c] > 0.0 ? std::log(model.mixing[c]) : -std::numeric_limits<double>::infinity();
    out.col(c) = (-0.5 * maha).array() + g.log_norm + log_mix;
  }
  return out;
}

// Row-wise log-sum-exp; fills `resp` with normalized probabilities.
double normalize_rows(const Eigen::MatrixXd& logp, Eigen::MatrixXd& resp) {
  resp.resize(logp.rows(), logp.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double m = logp.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logp.row(i).array() - m).exp();
    const double s = e.sum();
    resp.row(i) = e / s;
    total += m + std::log(s);
  }
  return total;
}

Eigen::MatrixXd seed_means(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  Eigen::MatrixXd means(static_cast<Eigen::Index>(k), x.cols());
  auto pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  means.row(0) = x.row(static_cast<Eigen::Index>(pick));
  Eigen::VectorXd d2 = (x.rowwise() - means.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[static_cast<Eigen::Index>(i)];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
    }
    means.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    d2 = d2.cwiseMin((x.rowwise() - means.row(static_cast<Eigen::Index>(c))).rowwise().squaredNorm());
  }
  return means;
}

}  // namespace

Eigen::MatrixXd shared_covariance(const Eigen::MatrixXd& points, const Eigen::MatrixXd& resp,
                                  const Eigen::MatrixXd& means, double loading) {
  const auto q = points.cols();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index c = 0; c < means.rows(); ++c) {
    const Eigen::MatrixXd diff = points.rowwise() - means.row(c);
    cov.noalias() += diff.transpose() * resp.col(c).asDiagonal() * diff;
  }
  cov /= static_cast<double>(points.rows());
  cov.diagonal().array() += loading;
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd mog_responsibilities(const MogModel& model, const Eigen::MatrixXd& points) {
  Eigen::MatrixXd resp;
  normalize_rows(log_joint(model, factor(model.covariance), points), resp);
  return resp;
}

MogModel mog_em(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, const EmOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k == 0 || n < k) throw InvalidInput("mog_em: fewer points than components");
  const double nd = static_cast<double>(n);
  const auto q = x.cols();
  Rng rng(seed);

  const Eigen::RowVectorXd grand_mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - grand_mean;
  const Eigen::MatrixXd data_cov = centered.transpose() * centered / nd;
  double loading = options.relative_loading * data_cov.trace() / static_cast<double>(q);
  if (!(loading > 0.0)) loading = 1e-12;

  MogModel model;
  model.loading = loading;
  model.means = seed_means(x, k, rng);
  model.covariance = data_cov;
  model.covariance.diagonal().array() += loading;
  model.mixing = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));

  // The loading acts as a fixed prior on Sigma, so EM ascends the penalized
  // objective  loglik - n/2 * loading * tr(Sigma^-1)  monotonically.
  auto penalized = [&](const Gaussian& g, double loglik) {
    const Eigen::MatrixXd inv = g.chol.solve(Eigen::MatrixXd::Identity(q, q));
    return loglik - 0.5 * nd * loading * inv.trace();
  };

  Eigen::MatrixXd resp;
  MogModel best;
  double best_objective = -std::numeric_limits<double>::infinity();
  bool reseeded = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Gaussian g = factor(model.covariance);
    const double objective = penalized(g, normalize_rows(log_joint(model, g, x), resp));
    model.objective_trace.push_back(objective);
    model.iterations = it + 1;
    if (objective >= best_objective) {
      best_objective = objective;
      best = model;
    }
    const auto size = model.objective_trace.size();
    if (size >= 2 && model.objective_trace[size - 1] - model.objective_trace[size - 2] < options.tolerance) {
      model.converged = true;
      best = model;
      break;
    }

    // M-step.
    const Eigen::VectorXd counts = resp.colwise().sum().transpose();
    bool degenerate = false;
    for (std::size_t c = 0; c < k; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      if (counts[ci] < 1e-8 * nd) {
        degenerate = true;
        continue;
      }
      model.means.row(ci) = (resp.col(ci).transpose() * x) / counts[ci];
    }
    if (degenerate && !reseeded) {
      // Move empty components onto the worst-explained points and start over.
      reseeded = true;
      ++model.reseeds;
      const Eigen::VectorXd fit = resp.rowwise().maxCoeff();
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return fit[static_cast<Eigen::Index>(a)] < fit[static_cast<Eigen::Index>(b)];
      });
      std::size_t next = 0;
      for (std::size_t c = 0; c < k; ++c)
        if (counts[static_cast<Eigen::Index>(c)] < 1e-8 * nd)
          model.means.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(order[next++ % n]));
      model.mixing.setConstant(1.0 / static_cast<double>(k));
      model.covariance = data_cov;
      model.covariance.diagonal().array() += loading;
      model.objective_trace.clear();
      best_objective = -std::numeric_limits<double>::infinity();
      continue;
    }
    model.mixing = counts / nd;
    model.covariance = shared_covariance(x, resp, model.means, loading);
  }
  if (!best.converged)
    spdlog::debug("mog_em: no convergence after {} iterations, keeping best iterate", options.max_iterations);
  best.objective_trace = model.objective_trace;
  best.iterations = model.iterations;
  best.reseeds = model.reseeds;
  return best;
}

// ---------------------------------------------------------------------------

SiteSplit drc_split(const Dataset& data, const DrcOptions& options, std::uint64_t seed) {
  constexpr std::size_t k = 5;
  const PcaResult reduced = pca(data.features(), options.variance_fraction);
  const Eigen::MatrixXd scores = reduced.project(data.features());

  std::array<std::vector<std::vector<std::size_t>>, 2> clusters;
  for (Label label : {Label::negative, Label::positive}) {
    const auto rows = data.rows_with(label);
    if (rows.size() < 5 * k)
      throw InvalidInput("drc_split: every class needs at least " + std::to_string(5 * k) + " rows");
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()), scores.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      pts.row(static_cast<Eigen::Index>(i)) = scores.row(static_cast<Eigen::Index>(rows[i]));

    const auto model = mog_em(pts, k, derive_seed(seed, {static_cast<std::uint64_t>(label)}), options.em);
    const Eigen::MatrixXd resp = mog_responsibilities(model, pts);

    std::vector<std::size_t> member(rows.size());
    std::vector<std::vector<std::size_t>> local(k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Eigen::Index best = 0;
      resp.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
      member[i] = static_cast<std::size_t>(best);
      local[member[i]].push_back(i);
    }

    const auto floor_size = static_cast<std::size_t>(
        std::ceil(options.min_cluster_fraction * static_cast<double>(rows.size()) - 1e-9));
    while (true) {
      auto [small, large] = std::minmax_element(local.begin(), local.end(),
                                                [](const auto& a, const auto& b) { return a.size() < b.size(); });
      if (small->size() >= floor_size || small == large) break;
      const auto target = static_cast<Eigen::Index>(small - local.begin());
      // Move the member of the largest cluster that leans most toward the smallest.
      auto pick = std::max_element(large->begin(), large->end(), [&](auto a, auto b) {
        return resp(static_cast<Eigen::Index>(a), target) < resp(static_cast<Eigen::Index>(b), target);
      });
      small->push_back(*pick);
      large->erase(pick);
    }

    auto& out = clusters[static_cast<std::size_t>(label)];
    for (auto& c : local) {
      std::vector<std::size_t> global;
      for (auto i : c) global.push_back(rows[i]);
      std::sort(global.begin(), global.end());
      out.push_back(std::move(global));
    }
  }
  return materialize(data, pair_buckets(std::move(clusters[0]), std::move(clusters[1])));
}

// ---------------------------------------------------------------------------

std::vector<Dataset> synth_shifted_sites(std::size_t n_per_site, std::size_t p, double shift_scale,
                                         std::uint64_t seed) {
  if (n_per_site < 20 || p < 2) throw InvalidInput("synth_shifted_sites: need n_per_site >= 20 and p >= 2");
  constexpr std::size_t n_sites = 5;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto pd = static_cast<Eigen::Index>(p);

  Eigen::VectorXd beta(pd);
  for (auto& b : beta) b = normal(rng);
  beta *= 2.0 / beta.norm();

  // Offset directions: orthonormal when p allows, otherwise a regular pentagon
  // in a random plane.
  Eigen::MatrixXd directions(pd, static_cast<Eigen::Index>(n_sites));
  if (p >= n_sites) {
    Eigen::MatrixXd g(pd, static_cast<Eigen::Index>(n_sites));
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    directions = qr.householderQ() * Eigen::MatrixXd::Identity(pd, static_cast<Eigen::Index>(n_sites));
  } else {
    Eigen::MatrixXd g(pd, 2);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd plane = qr.householderQ() * Eigen::MatrixXd::Identity(pd, 2);
    for (std::size_t s = 0; s < n_sites; ++s) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(n_sites);
      directions.col(static_cast<Eigen::Index>(s)) = std::cos(angle) * plane.col(0) + std::sin(angle) * plane.col(1);
    }
  }

  std::vector<Dataset> sites;
  for (std::size_t s = 0; s < n_sites; ++s) {
    const Eigen::VectorXd offset = shift_scale * directions.col(static_cast<Eigen::Index>(s));
    Eigen::VectorXd coef = beta;
    for (auto& c : coef) c += normal(rng) * 0.4 * shift_scale / std::sqrt(static_cast<double>(p));

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n_per_site), pd);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    x.rowwise() += offset.transpose();
    const Eigen::VectorXd logit = (x.rowwise() - offset.transpose()) * coef;

    std::vector<Label> labels(n_per_site);
    do {
      for (std::size_t i = 0; i < n_per_site; ++i) {
        const double prob = 1.0 / (1.0 + std::exp(-logit[static_cast<Eigen::Index>(i)]));
        labels[i] = uniform01(rng) < prob ? Label::positive : Label::negative;
      }
    } while (std::count(labels.begin(), labels.end(), Label::positive) == 0 ||
             std::count(labels.begin(), labels.end(), Label::negative) == 0);
    sites.emplace_back(std::move(x), std::move(labels));
  }
  return sites;
}

void write_sites(const std::vector<Dataset>& sites, const std::filesystem::path& dir,
                 const std::vector<std::pair<std::string, std::string>>& manifest) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json m;
  for (const auto& [key, value] : manifest) m[key] = value;
  m["sites"] = nlohmann::json::array();
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto name = "site_" + std::to_string(s + 1) + ".csv";
    write_csv(sites[s], dir / name);
    m["sites"].push_back({{"file", name},
                          {"rows", sites[s].rows()},
                          {"positive", sites[s].count(Label::positive)},
                          {"negative", sites[s].count(Label::negative)}});
  }
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

std::vector<Dataset> read_sites(const std::filesystem::path& dir, std::size_t n_sites) {
  std::vector<Dataset> sites;
  for (std::size_t s = 0; s < n_sites; ++s) sites.push_back(read_csv(dir / ("site_" + std::to_string(s + 1) + ".csv")));
  return sites;
}

}  // namespace rfms
