#pragma once

#include "neurn/domainbench.hpp"
#include "neurn/neurn.hpp"
#include "neurn/reprs.hpp"
#include "neurn/rsa.hpp"
#include "neurn/select.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace neurn {

struct KMeansSection {
  int k = 10;
  int per_cluster = 50;
  int max_iterations = 300;
  double tolerance = 1e-6;
};

struct RepsSection {
  int side = 28;
  ReduceMode mode = ReduceMode::peak;
};

struct KdeSection {
  int grid_size = 512;
  std::optional<double> bandwidth;  // empty = Silverman
};

struct BenchSection {
  int side = 16;
  ClassifierConfig classifier;
  double holdout = 0.1;
  int seeds = 1;
  bool include_in_domain = true;
};

/// Every tunable of every pipeline stage, with defaults. Loaded from a JSON
/// document whose sections mirror the fields below; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  NeurnConfig neurn;
  RepsSection reps;
  EmbedConfig embed;
  KMeansSection kmeans;
  CompareOptions rsa;
  KdeSection kde;
  BenchSection bench;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// FNV-1a of a file's bytes, hex encoded.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace neurn
