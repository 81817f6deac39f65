#pragma once

#include "neurn/tensorio.hpp"

namespace neurn {

enum class Padding { replicate, reflect };

struct NeurnConfig {
  int k = 3;                         // patch side, odd and >= 3
  Padding padding = Padding::replicate;
  double epsilon = 1e-12;            // channels whose max local std is below this map to zero

  void validate() const;
  bool operator==(const NeurnConfig&) const = default;
};

/// Per-pixel mean and population standard deviation of the k x k patch
/// centred on each pixel (stride 1, so one patch per pixel).
struct PatchStats {
  Image mean_map;
  Image std_map;
};

/// Maps an out-of-range index into [0, n) under the given padding rule.
/// Reflect mirrors about the edge pixel without repeating it.
int pad_index(int i, int n, Padding padding);

PatchStats patch_stats(const Image& img, const NeurnConfig& cfg = {});

/// Local standard deviation divided by its per-channel maximum. The result
/// lies in [0, 1] and is invariant to any affine intensity change a*I + b
/// with a != 0.
Image neurn_apply(const Image& img, const NeurnConfig& cfg = {});

/// Single-plane variant used by the batch paths.
Plane neurn_apply(const Plane& plane, const NeurnConfig& cfg = {});

}  // namespace neurn
