#include "neurn/select.hpp"

#include "neurn/error.hpp"
#include "neurn/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace neurn {

Embedding embed(const Eigen::MatrixXd& points, const EmbedConfig& cfg) {
  const auto n = points.rows();
  const auto d = points.cols();
  if (cfg.out_dims <= 0) throw UsageError("embedding out_dims must be positive");
  if (n < cfg.out_dims) {
    throw UsageError("embedding needs at least out_dims points (" + std::to_string(n) + " < " +
                     std::to_string(cfg.out_dims) + ")");
  }
  if (d < cfg.out_dims) {
    throw UsageError("out_dims " + std::to_string(cfg.out_dims) +
                     " exceeds input dimensionality " + std::to_string(d));
  }
  Embedding out;
  if (cfg.method == EmbedMethod::none) {
    if (d != cfg.out_dims) throw UsageError("method none requires d == out_dims");
    out.points = points;
    return out;
  }

  const Eigen::RowVectorXd mean = points.colwise().mean();
  const Eigen::MatrixXd centered = points.rowwise() - mean;
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;

  // Ascending eigenvalues; walk from the top.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("covariance eigensolve failed");
  out.components.resize(d, cfg.out_dims);
  out.variances.resize(cfg.out_dims);
  for (int j = 0; j < cfg.out_dims; ++j) {
    const auto src = d - 1 - j;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.col(j) = v;
    out.variances(j) = std::max(0.0, solver.eigenvalues()(src));
  }
  out.points = centered * out.components;
  return out;
}

double inertia(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
               const std::vector<int>& assignments) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(assignments[std::size_t(i)])).squaredNorm();
  }
  return total;
}

namespace {

Eigen::MatrixXd plus_plus_seeds(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const auto n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(std::uint64_t(n))));
  Eigen::VectorXd nearest(n);
  for (Eigen::Index i = 0; i < n; ++i) nearest(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest(i);
        if (acc > target && nearest(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(std::uint64_t(n)));
    }
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest(i) = std::min(nearest(i), (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

// Nearest centroid with ties going to the lower index.
void assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
            std::vector<int>& labels, Eigen::VectorXd& dist) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double dd = (points.row(i) - centroids.row(c)).squaredNorm();
      if (dd < best_d) {
        best_d = dd;
        best = static_cast<int>(c);
      }
    }
    labels[std::size_t(i)] = best;
    dist(i) = best_d;
  }
}

}  // namespace

ClusterResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                     const KMeansOptions& opts) {
  const auto n = points.rows();
  if (k <= 0) throw UsageError("k must be positive");
  if (n < k) {
    throw UsageError("kmeans needs at least k points (" + std::to_string(n) + " < " +
                     std::to_string(k) + ")");
  }
  Rng rng(seed);
  ClusterResult res;
  res.k = k;
  res.centroids = plus_plus_seeds(points, k, rng);
  res.assignments.assign(std::size_t(n), 0);
  Eigen::VectorXd dist(n);

  assign(points, res.centroids, res.assignments, dist);
  res.inertia = dist.sum();
  res.history.push_back(res.inertia);

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    // Centroid update: deterministic sequential sums per cluster.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(std::size_t(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignments[std::size_t(i)]) += points.row(i);
      ++counts[std::size_t(res.assignments[std::size_t(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[std::size_t(c)] > 0) {
        res.centroids.row(c) = sums.row(c) / counts[std::size_t(c)];
        continue;
      }
      // Empty cluster: steal the point currently farthest from its centroid.
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      res.centroids.row(c) = points.row(far);
      dist(far) = 0.0;
    }

    const std::vector<int> previous = res.assignments;
    assign(points, res.centroids, res.assignments, dist);
    const double prev = res.inertia;
    res.inertia = dist.sum();
    res.history.push_back(res.inertia);

    if (res.assignments == previous) break;
    if (prev <= 0.0 || std::abs(prev - res.inertia) / prev < opts.tolerance) break;
  }
  return res;
}

RepresentationSet sample_central(const RepresentationSet& reps, const ClusterResult& clustering,
                                 const Eigen::MatrixXd& embedded, int per_cluster) {
  reps.validate();
  if (per_cluster <= 0) throw UsageError("per_cluster must be positive");
  if (embedded.rows() != static_cast<Eigen::Index>(reps.size()) ||
      clustering.assignments.size() != reps.size()) {
    throw UsageError("clustering does not match the representation set");
  }
  if (clustering.centroids.cols() != embedded.cols()) {
    throw UsageError("centroid dimensionality does not match the embedding");
  }

  std::vector<std::size_t> picked;
  RepresentationSet out;
  out.notes = reps.notes;
  int total_shortfall = 0;
  for (int c = 0; c < clustering.k; ++c) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (clustering.assignments[i] != c) continue;
      const double d = (embedded.row(Eigen::Index(i)) - clustering.centroids.row(c)).norm();
      members.emplace_back(d, i);
    }
    std::sort(members.begin(), members.end());
    const auto take = std::min<std::size_t>(members.size(), std::size_t(per_cluster));
    for (std::size_t r = 0; r < take; ++r) {
      const auto i = members[r].second;
      out.maps.push_back(reps.maps[i]);
      Meta m = reps.meta[i];
      m["cluster"] = std::to_string(c);
      m["source_index"] = std::to_string(i);
      out.meta.push_back(std::move(m));
    }
    const int shortfall = per_cluster - static_cast<int>(take);
    if (shortfall > 0) {
      out.notes["shortfall.cluster" + std::to_string(c)] = std::to_string(shortfall);
      total_shortfall += shortfall;
    }
  }
  out.notes["sample.per_cluster"] = std::to_string(per_cluster);
  out.notes["sample.k"] = std::to_string(clustering.k);
  out.notes["sample.shortfall"] = std::to_string(total_shortfall);
  return out;
}

}  // namespace neurn
