#include "neurn/kdeiou.hpp"

#include "neurn/error.hpp"
#include "neurn/parallel.hpp"
#include "neurn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>

namespace neurn {

namespace {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  if (n == 1) {
    g[0] = 0.5 * (lo + hi);
    return g;
  }
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) g[std::size_t(i)] = lo + step * i;
  g.back() = hi;
  return g;
}

double trapezoid(const std::vector<double>& y, double dx) {
  if (y.size() < 2) return 0.0;
  CompensatedSum s;
  s.add(0.5 * y.front());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s.add(y[i]);
  s.add(0.5 * y.back());
  return s.value() * dx;
}

}  // namespace

double gaussian_kernel(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
}

double silverman_bandwidth(std::span<const double> samples) {
  const auto n = samples.size();
  if (n < 2) throw UsageError("bandwidth needs at least 2 samples");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / double(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / double(n - 1));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = std::max(sd, iqr);
  const double h = 0.9 * spread * std::pow(double(n), -0.2);
  return std::max(h, 1e-6);
}

std::vector<double> kde_evaluate(const KdeCurve& curve, std::span<const double> xs) {
  std::vector<double> out(xs.size());
  const double h = curve.bandwidth;
  const double norm = 1.0 / (static_cast<double>(curve.samples.size()) * h);
  parallel_for(xs.size(), [&](std::size_t g) {
    CompensatedSum s;
    for (double xi : curve.samples) s.add(gaussian_kernel((xs[g] - xi) / h));
    out[g] = s.value() * norm;
  });
  return out;
}

KdeCurve kde_fit(std::vector<double> samples, std::optional<double> bandwidth, int grid_size) {
  if (samples.size() < 2) throw UsageError("kde_fit needs at least 2 samples");
  if (grid_size < 2) throw UsageError("kde grid_size must be at least 2");
  for (double x : samples) {
    if (!std::isfinite(x)) throw UsageError("kde_fit samples must be finite");
  }
  KdeCurve c;
  c.auto_bandwidth = !bandwidth.has_value();
  c.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(c.bandwidth > 0.0) || !std::isfinite(c.bandwidth)) {
    throw UsageError("kde bandwidth must be positive and finite");
  }
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  c.grid = uniform_grid(*mn - 3.0 * c.bandwidth, *mx + 3.0 * c.bandwidth, grid_size);
  c.sample_count = samples.size();
  c.samples = std::move(samples);
  c.density = kde_evaluate(c, c.grid);
  return c;
}

double kde_mass(const KdeCurve& curve) { return trapezoid(curve.density, curve.spacing()); }

double iou(const KdeCurve& a, const KdeCurve& b) {
  if (a.grid.empty() || b.grid.empty()) throw UsageError("iou of an empty curve");
  const double lo = std::min(a.grid.front(), b.grid.front());
  const double hi = std::max(a.grid.back(), b.grid.back());
  const int n = static_cast<int>(std::max(a.grid.size(), b.grid.size()));
  const auto grid = uniform_grid(lo, hi, n);
  const auto fa = kde_evaluate(a, grid);
  const auto fb = kde_evaluate(b, grid);
  std::vector<double> lower(grid.size()), upper(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    lower[i] = std::min(fa[i], fb[i]);
    upper[i] = std::max(fa[i], fb[i]);
  }
  const double dx = grid.size() > 1 ? grid[1] - grid[0] : 1.0;
  const double inter = trapezoid(lower, dx);
  const double uni = trapezoid(upper, dx);
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::map<std::string, std::vector<double>> pool_activations(const RepresentationSet& reps,
                                                            const std::string& group_by) {
  if (reps.empty()) throw UsageError("pool_activations needs a non-empty set");
  reps.validate();
  std::map<std::string, std::vector<double>> pools;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto it = reps.meta[i].find(group_by);
    if (it == reps.meta[i].end()) throw UsageError("unknown group key '" + group_by + "'");
    auto& pool = pools[it->second];
    const Plane& m = reps.maps[i];
    pool.insert(pool.end(), m.data(), m.data() + m.size());
  }
  return pools;
}

std::vector<double> subsample(const std::vector<double>& values, std::size_t max_count,
                              std::uint64_t seed) {
  if (values.size() <= max_count) return values;
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first max_count slots are a uniform draw.
  for (std::size_t i = 0; i < max_count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_count);
  std::sort(idx.begin(), idx.end());
  std::vector<double> out;
  out.reserve(max_count);
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

KdeCurve kde_fit_pool(const std::vector<double>& pool, std::optional<double> bandwidth,
                      int grid_size, std::uint64_t seed) {
  if (pool.size() <= kMaxKdeSamples) return kde_fit(pool, bandwidth, grid_size);
  KdeCurve c = kde_fit(subsample(pool, kMaxKdeSamples, seed), bandwidth, grid_size);
  c.subsampled_from = pool.size();
  return c;
}

namespace {
std::string xml_escape(const std::string& s) {
  std::string r;
  for (char c : s) {
    switch (c) {
      case '&': r += "&amp;"; break;
      case '<': r += "&lt;"; break;
      case '>': r += "&gt;"; break;
      case '"': r += "&quot;"; break;
      default: r += c;
    }
  }
  return r;
}
}  // namespace

void write_kde_svg(std::ostream& out, const KdeCurve& a, const KdeCurve& b,
                   const std::string& label_a, const std::string& label_b) {
  constexpr double W = 640, H = 400, pad = 40;
  const double lo = std::min(a.grid.front(), b.grid.front());
  const double hi = std::max(a.grid.back(), b.grid.back());
  double top = 0.0;
  for (double d : a.density) top = std::max(top, d);
  for (double d : b.density) top = std::max(top, d);
  if (!(top > 0.0)) top = 1.0;
  const double span = hi > lo ? hi - lo : 1.0;

  auto polyline = [&](const KdeCurve& c, const char* colour) {
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      const double x = pad + (c.grid[i] - lo) / span * (W - 2 * pad);
      const double y = H - pad - c.density[i] / top * (H - 2 * pad);
      out << (i ? " " : "") << x << ',' << y;
    }
    out << "\"/>\n";
  };

  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  out << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out << "<line x1=\"40\" y1=\"360\" x2=\"600\" y2=\"360\" stroke=\"black\"/>\n";
  polyline(a, "#1f77b4");
  polyline(b, "#d62728");
  out << "<text x=\"48\" y=\"24\" fill=\"#1f77b4\">" << xml_escape(label_a) << "</text>\n";
  out << "<text x=\"340\" y=\"24\" fill=\"#d62728\">" << xml_escape(label_b) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace neurn
