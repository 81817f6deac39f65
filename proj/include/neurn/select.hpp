#pragma once

#include "neurn/reprs.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace neurn {

enum class EmbedMethod { pca, none };

/// 2D embedding settings. n_neighbors, min_dist and metric describe the
/// manifold embedding the sampling protocol was designed around; the PCA
/// backend records them but does not use them.
struct EmbedConfig {
  EmbedMethod method = EmbedMethod::pca;
  int out_dims = 2;
  int n_neighbors = 15;
  double min_dist = 0.1;
  std::string metric = "euclidean";
};

struct Embedding {
  Eigen::MatrixXd points;      // [n, out_dims]
  Eigen::MatrixXd components;  // [d, out_dims], orthonormal columns (pca only)
  Eigen::VectorXd variances;   // covariance eigenvalues per component (pca only)
};

/// Centres the points and projects them onto the leading principal
/// directions, ordered by decreasing eigenvalue. Each direction's sign is
/// chosen so its largest-magnitude loading is positive.
Embedding embed(const Eigen::MatrixXd& points, const EmbedConfig& cfg = {});

struct ClusterResult {
  int k = 0;
  std::vector<int> assignments;
  Eigen::MatrixXd centroids;       // [k, d]
  double inertia = 0.0;
  std::vector<double> history;     // inertia after every assignment step
  int iterations = 0;
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // relative inertia change
};

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are
/// re-seeded with the point farthest from its current centroid.
ClusterResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                     const KMeansOptions& opts = {});

/// Sum of squared distances from every point to its assigned centroid.
double inertia(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
               const std::vector<int>& assignments);

/// Keeps the per_cluster members nearest each centroid (embedding space,
/// ties by original index), grouped by cluster. Small clusters contribute
/// everything they have and the shortfall is noted in the output notes.
RepresentationSet sample_central(const RepresentationSet& reps, const ClusterResult& clustering,
                                 const Eigen::MatrixXd& embedded, int per_cluster);

}  // namespace neurn
