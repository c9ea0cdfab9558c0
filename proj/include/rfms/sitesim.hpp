#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rfms/datamodel.hpp"

namespace rfms {

/// Five simulated data sites cut from one dataset.
struct SiteSplit {
  std::vector<Dataset> sites;
  std::vector<std::vector<std::size_t>> rows;  // source row indices of each site
};

/// Pairs class buckets into sites: buckets of each class are ordered by size
/// (ascending, stable) and site i joins the i-th smallest negative bucket with
/// the i-th largest positive bucket.
std::vector<std::vector<std::size_t>> pair_buckets(std::vector<std::vector<std::size_t>> negative,
                                                   std::vector<std::vector<std::size_t>> positive);

/// Stratified random split: each class is shuffled into `n_sites` buckets of
/// near-equal size, then buckets are paired in reversed size order.
SiteSplit srs_split(const Dataset& data, std::size_t n_sites, std::uint64_t seed);

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::MatrixXd components;   // p x q, orthonormal columns
  Eigen::VectorXd eigenvalues;  // all, descending
  std::size_t rank = 0;

  std::size_t kept() const noexcept { return static_cast<std::size_t>(components.cols()); }
  Eigen::MatrixXd project(const Eigen::MatrixXd& x) const;
  /// Back-projection of scores into the standardized feature space.
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& scores) const;
};

/// PCA on standardized features keeping the fewest leading components whose
/// explained variance reaches `variance_fraction` (capped at the rank).
PcaResult pca(const Eigen::MatrixXd& x, double variance_fraction);

/// Mixture of Gaussians sharing one covariance matrix.
struct MogModel {
  Eigen::MatrixXd means;       // k x q
  Eigen::MatrixXd covariance;  // q x q
  Eigen::VectorXd mixing;      // k
  double loading = 0.0;        // diagonal loading added to every covariance update
  /// Penalized log-likelihood after each E-step; non-decreasing between reseeds.
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
  bool converged = false;

  std::size_t k() const noexcept { return static_cast<std::size_t>(means.rows()); }
};

struct EmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-8;
  /// Diagonal loading relative to trace(data covariance) / q.
  double relative_loading = 1e-6;
};

MogModel mog_em(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, const EmOptions& options = {});

/// Posterior cluster probabilities, n x k.
Eigen::MatrixXd mog_responsibilities(const MogModel& model, const Eigen::MatrixXd& points);

/// Shared-covariance M-step: responsibility-weighted scatter around `means`
/// divided by the number of points, plus `loading` on the diagonal.
Eigen::MatrixXd shared_covariance(const Eigen::MatrixXd& points, const Eigen::MatrixXd& resp,
                                  const Eigen::MatrixXd& means, double loading);

struct DrcOptions {
  double variance_fraction = 0.1;
  /// Floor on every cluster, as a fraction of its class size.
  double min_cluster_fraction = 0.1;
  EmOptions em;
};

/// Dimension reduction and clustering: PCA on the full feature matrix, a
/// five-component shared-covariance mixture per class, rebalancing up to the
/// floor, then reversed-size pairing of the class clusters.
SiteSplit drc_split(const Dataset& data, const DrcOptions& options, std::uint64_t seed);

/// Synthetic five-site data with site-specific feature mean offsets of norm
/// `shift_scale` and perturbed label coefficients.
std::vector<Dataset> synth_shifted_sites(std::size_t n_per_site, std::size_t p, double shift_scale,
                                         std::uint64_t seed);

/// Writes site_1.csv ... site_n.csv plus manifest.json holding `manifest`.
void write_sites(const std::vector<Dataset>& sites, const std::filesystem::path& dir,
                 const std::vector<std::pair<std::string, std::string>>& manifest);

/// Reads site_1.csv ... site_n.csv from `dir`.
std::vector<Dataset> read_sites(const std::filesystem::path& dir, std::size_t n_sites = 5);

}  // namespace rfms
