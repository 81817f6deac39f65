#include "neurn/neurn.hpp"

#include "neurn/error.hpp"

#include <cmath>

namespace neurn {

void NeurnConfig::validate() const {
  if (k < 3 || k % 2 == 0) throw UsageError("NeuRN patch size k must be odd and >= 3, got " + std::to_string(k));
  if (!(epsilon > 0.0)) throw UsageError("NeuRN epsilon must be positive");
}

int pad_index(int i, int n, Padding padding) {
  if (i >= 0 && i < n) return i;
  if (padding == Padding::replicate || n == 1) return i < 0 ? 0 : n - 1;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

namespace {

void plane_stats(const Plane& src, const NeurnConfig& cfg, Plane& mean, Plane& sd) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const int r = cfg.k / 2;
  const double inv = 1.0 / (static_cast<double>(cfg.k) * cfg.k);
  mean.resize(h, w);
  sd.resize(h, w);

  // Row/col lookup tables so the inner loop is branch-free.
  std::vector<int> rows(static_cast<std::size_t>(h + 2 * r));
  std::vector<int> cols(static_cast<std::size_t>(w + 2 * r));
  for (int i = -r; i < h + r; ++i) rows[std::size_t(i + r)] = pad_index(i, h, cfg.padding);
  for (int j = -r; j < w + r; ++j) cols[std::size_t(j + r)] = pad_index(j, w, cfg.padding);

  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int di = 0; di < cfg.k; ++di) {
        const int y = rows[std::size_t(i + di)];
        for (int dj = 0; dj < cfg.k; ++dj) s += src(y, cols[std::size_t(j + dj)]);
      }
      const double mu = s * inv;
      double ss = 0.0;
      for (int di = 0; di < cfg.k; ++di) {
        const int y = rows[std::size_t(i + di)];
        for (int dj = 0; dj < cfg.k; ++dj) {
          const double d = src(y, cols[std::size_t(j + dj)]) - mu;
          ss += d * d;
        }
      }
      mean(i, j) = mu;
      sd(i, j) = std::sqrt(ss * inv);
    }
  }
}

}  // namespace

PatchStats patch_stats(const Image& img, const NeurnConfig& cfg) {
  cfg.validate();
  std::vector<Plane> means, sds;
  for (const auto& p : img.planes()) {
    Plane m, s;
    plane_stats(p, cfg, m, s);
    means.push_back(std::move(m));
    sds.push_back(std::move(s));
  }
  return {Image(std::move(means)), Image(std::move(sds))};
}

Plane neurn_apply(const Plane& plane, const NeurnConfig& cfg) {
  cfg.validate();
  Plane mean, sd;
  plane_stats(plane, cfg, mean, sd);
  const double c = sd.maxCoeff();
  if (!(c >= cfg.epsilon)) return Plane::Zero(sd.rows(), sd.cols());
  return sd / c;
}

Image neurn_apply(const Image& img, const NeurnConfig& cfg) {
  std::vector<Plane> out;
  out.reserve(img.planes().size());
  for (const auto& p : img.planes()) out.push_back(neurn_apply(p, cfg));
  return Image(std::move(out));
}

}  // namespace neurn
