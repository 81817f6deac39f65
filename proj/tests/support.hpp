#pragma once

#include "neurn/rng.hpp"
#include "neurn/tensorio.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <string>

namespace testing_support {

inline neurn::Plane random_plane(neurn::Rng& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  neurn::Plane p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(lo, hi);
  return p;
}

inline oracle::Grid to_grid(const neurn::Plane& p) {
  oracle::Grid g = oracle::zeros(int(p.rows()), int(p.cols()));
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c) g[std::size_t(r)][std::size_t(c)] = p(r, c);
  return g;
}

inline double max_abs_diff(const neurn::Plane& p, const oracle::Grid& g) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r)
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      worst = std::max(worst, std::abs(p(r, c) - g[std::size_t(r)][std::size_t(c)]));
  return worst;
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("neurn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
