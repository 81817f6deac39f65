#include "neurn/error.hpp"
#include "neurn/select.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace neurn;

namespace {

Eigen::MatrixXd gaussian_cloud(Rng& rng, int n, int d) {
  Eigen::MatrixXd x(n, d);
  for (int j = 0; j < d; ++j) {
    const double scale = 1.0 + j;
    for (int i = 0; i < n; ++i) x(i, j) = scale * rng.normal();
  }
  return x;
}

Eigen::MatrixXd two_blobs(Rng& rng, std::vector<int>& truth) {
  Eigen::MatrixXd x(40, 2);
  truth.assign(40, 0);
  for (int i = 0; i < 40; ++i) {
    const double cx = i < 20 ? -10.0 : 10.0;
    x(i, 0) = cx + 0.5 * rng.normal();
    x(i, 1) = 0.5 * rng.normal();
    truth[std::size_t(i)] = i < 20 ? 0 : 1;
  }
  return x;
}

}  // namespace

TEST_CASE("method none passes points through") {
  Rng rng(1);
  const Eigen::MatrixXd x = gaussian_cloud(rng, 10, 2);
  EmbedConfig cfg;
  cfg.method = EmbedMethod::none;
  CHECK(embed(x, cfg).points == x);
  CHECK_THROWS_AS(embed(gaussian_cloud(rng, 10, 3), cfg), UsageError);
}

TEST_CASE("collinear points embed onto one axis") {
  Eigen::VectorXd dir(5);
  dir << 1, -2, 0.5, 3, 1;
  Eigen::MatrixXd x(12, 5);
  for (int i = 0; i < 12; ++i) x.row(i) = (0.3 * i - 1.0) * dir.transpose() + Eigen::RowVectorXd::Constant(5, 2.0);
  const Embedding e = embed(x);
  CHECK(e.points.col(1).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(e.points.col(0).cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("projected variance equals the top covariance eigenvalues from a Jacobi solve") {
  Rng rng(50);
  const Eigen::MatrixXd x = gaussian_cloud(rng, 50, 8);
  const Embedding e = embed(x);

  const Eigen::RowVectorXd mean = x.colwise().mean();
  oracle::Grid cov = oracle::zeros(8, 8);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      double acc = 0;
      for (int i = 0; i < 50; ++i) acc += (x(i, a) - mean(a)) * (x(i, b) - mean(b));
      cov[std::size_t(a)][std::size_t(b)] = acc / 49.0;
    }
  const auto ev = oracle::jacobi_eigenvalues(cov);
  const Eigen::MatrixXd p = e.points;
  const Eigen::RowVectorXd pm = p.colwise().mean();
  const double projected = (p.rowwise() - pm).squaredNorm() / 49.0;
  CHECK(std::abs(projected - (ev[7] + ev[6])) < 1e-8);
  CHECK(e.variances(0) == doctest::Approx(ev[7]).epsilon(1e-10));

  // Components are orthonormal with the largest loading positive.
  CHECK((e.components.transpose() * e.components - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  for (int j = 0; j < 2; ++j) {
    Eigen::Index arg;
    e.components.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(e.components(arg, j) > 0);
  }
}

TEST_CASE("embedding preconditions") {
  CHECK_THROWS_AS(embed(Eigen::MatrixXd::Zero(1, 5)), UsageError);
  CHECK_THROWS_AS(embed(Eigen::MatrixXd::Zero(5, 1)), UsageError);
}

TEST_CASE("k-means with n == k gives zero inertia") {
  Rng rng(9);
  const Eigen::MatrixXd x = gaussian_cloud(rng, 6, 3);
  const ClusterResult r = kmeans(x, 6, 4);
  CHECK(r.inertia == 0.0);
  std::vector<int> sorted = r.assignments;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK_THROWS_AS(kmeans(x, 7, 1), UsageError);
  CHECK_THROWS_AS(kmeans(x, 0, 1), UsageError);
}

TEST_CASE("k-means recovers two separated blobs and their means") {
  Rng rng(12);
  std::vector<int> truth;
  const Eigen::MatrixXd x = two_blobs(rng, truth);
  const ClusterResult r = kmeans(x, 2, 77);
  const bool same = r.assignments == truth;
  std::vector<int> flipped = truth;
  for (auto& t : flipped) t = 1 - t;
  CHECK((same || r.assignments == flipped));
  for (int c = 0; c < 2; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
    int n = 0;
    for (int i = 0; i < 40; ++i) {
      if (r.assignments[std::size_t(i)] == c) {
        mean += x.row(i);
        ++n;
      }
    }
    CHECK((r.centroids.row(c) - mean / n).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("k-means inertia never increases and runs are deterministic") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 100);
    const Eigen::MatrixXd x = gaussian_cloud(rng, 120, 4);
    const ClusterResult a = kmeans(x, 5, seed);
    for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i] <= a.history[i - 1]);
    CHECK(a.inertia == doctest::Approx(inertia(x, a.centroids, a.assignments)).epsilon(1e-12));
    const ClusterResult b = kmeans(x, 5, seed);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centroids == b.centroids);
  }
}

TEST_CASE("k-means survives duplicated points") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(10, 2);
  x.row(9) << 1, 1;
  const ClusterResult r = kmeans(x, 3, 5);
  CHECK(r.inertia == doctest::Approx(0.0));
}

TEST_CASE("sample_central keeps everyone when clusters are small") {
  Rng rng(3);
  std::vector<int> truth;
  const Eigen::MatrixXd x = two_blobs(rng, truth);
  RepresentationSet reps;
  for (int i = 0; i < 40; ++i) {
    reps.maps.push_back(Plane::Constant(2, 2, i));
    reps.meta.push_back({{"i", std::to_string(i)}});
  }
  const ClusterResult r = kmeans(x, 2, 1);
  const auto out = sample_central(reps, r, x, 25);
  CHECK(out.size() == 40);
  CHECK(out.notes.at("sample.shortfall") == "10");
  CHECK(out.notes.at("shortfall.cluster0") == "5");
  std::vector<int> seen;
  for (const auto& m : out.meta) seen.push_back(std::stoi(m.at("source_index")));
  std::sort(seen.begin(), seen.end());
  std::vector<int> all(40);
  std::iota(all.begin(), all.end(), 0);
  CHECK(seen == all);
}

TEST_CASE("sample_central picks the points nearest the centroid") {
  Eigen::MatrixXd x(5, 2);
  x << 0, 0, 1, 0, 2, 0, 3.5, 0, 10, 0;
  RepresentationSet reps;
  for (int i = 0; i < 5; ++i) {
    reps.maps.push_back(Plane::Constant(1, 1, i));
    reps.meta.push_back({});
  }
  const ClusterResult r = kmeans(x, 1, 0);
  const auto out = sample_central(reps, r, x, 2);
  // Mean is 3.3: brute-force distance order is 3.5, 2, 1, 0, 10.
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < 5; ++i) order.emplace_back(std::abs(x(i, 0) - 3.3), i);
  std::sort(order.begin(), order.end());
  REQUIRE(out.size() == 2);
  CHECK(out.meta[0].at("source_index") == std::to_string(order[0].second));
  CHECK(out.meta[1].at("source_index") == std::to_string(order[1].second));
  CHECK(out.meta[0].at("cluster") == "0");
}

TEST_CASE("ten balanced clusters of 100 maps sample down to 500") {
  Rng rng(21);
  RepresentationSet reps;
  std::vector<Plane> prototypes;
  for (int c = 0; c < 10; ++c) prototypes.push_back(testing_support::random_plane(rng, 6, 6));
  for (int i = 0; i < 1000; ++i) {
    Plane m = prototypes[std::size_t(i % 10)];
    for (Eigen::Index p = 0; p < m.size(); ++p) m.data()[p] += 0.01 * rng.normal();
    reps.maps.push_back(m);
    reps.meta.push_back({{"cell_class", i < 500 ? "excitatory" : "inhibitory"}});
  }
  const Embedding e = embed(reps.as_rows(), EmbedConfig{EmbedMethod::pca, 9});
  const ClusterResult r = kmeans(e.points, 10, 3);
  const auto out = sample_central(reps, r, e.points, 50);
  CHECK(out.size() == 500);
  CHECK(out.notes.at("sample.shortfall") == "0");
}
