#pragma once

#include "neurn/reprs.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace neurn {

/// Gaussian kernel density estimate sampled on a uniform grid.
///
/// The samples are kept so that two curves can be re-evaluated exactly on
/// a shared grid when their overlap is measured.
struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t sample_count = 0;
  bool auto_bandwidth = false;
  std::size_t subsampled_from = 0;  // original pool size when the guard kicked in, else 0
  std::vector<double> samples;

  double spacing() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
};

constexpr int kDefaultGridSize = 512;
constexpr std::size_t kMaxKdeSamples = 1'000'000;

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to whichever spread
/// is nonzero, floored at 1e-6.
double silverman_bandwidth(std::span<const double> samples);

/// Standard normal density.
double gaussian_kernel(double u);

/// f(x) = 1/(n h) * sum K((x - x_i) / h) on [min - 3h, max + 3h].
KdeCurve kde_fit(std::vector<double> samples, std::optional<double> bandwidth = std::nullopt,
                 int grid_size = kDefaultGridSize);

/// Density of the fitted estimator at arbitrary points.
std::vector<double> kde_evaluate(const KdeCurve& curve, std::span<const double> xs);

/// Trapezoidal integral of the density over its own grid.
double kde_mass(const KdeCurve& curve);

/// Area under min(f_a, f_b) over area under max(f_a, f_b), both curves
/// evaluated on a shared uniform grid spanning the union of their grids.
double iou(const KdeCurve& a, const KdeCurve& b);

/// Concatenates map values per metadata group: map order, then row-major.
std::map<std::string, std::vector<double>> pool_activations(const RepresentationSet& reps,
                                                            const std::string& group_by);

/// Uniform subsample without replacement down to max_count values, order
/// preserved. Returns the input unchanged when it is already small enough.
std::vector<double> subsample(const std::vector<double>& values, std::size_t max_count,
                              std::uint64_t seed);

/// Fit with the large-pool guard applied first.
KdeCurve kde_fit_pool(const std::vector<double>& pool, std::optional<double> bandwidth,
                      int grid_size, std::uint64_t seed);

/// Two curves as polylines in a fixed 640x400 viewport.
void write_kde_svg(std::ostream& out, const KdeCurve& a, const KdeCurve& b,
                   const std::string& label_a, const std::string& label_b);

}  // namespace neurn
