#pragma once

#include "neurn/tensorio.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace neurn {

/// Stimuli resized to side x side and flattened, one row per stimulus.
struct StimulusSet {
  int side = 0;
  Eigen::MatrixXd flattened;  // [count, side*side]

  int count() const { return static_cast<int>(flattened.rows()); }

  /// Accepts [count, h, w] or [count, s*s]; every stimulus is resized to
  /// side x side. Values must lie in [0, 1].
  static StimulusSet from_tensor(const Tensor& t, int side);
};

enum class CellClass { excitatory, inhibitory };

std::string to_string(CellClass c);
CellClass parse_cell_class(const std::string& s);

/// Responses of one neuron: row i holds the trial trace recorded for stimulus i.
struct TrialTraces {
  std::string neuron_id;
  CellClass cell_class = CellClass::excitatory;
  std::string genotype;
  std::string region;
  Eigen::MatrixXd traces;  // [count, trace_len], DF/F
};

/// A bag of equally sized 2D maps with one metadata record per map.
///
/// Neural maps carry kind=neural, neuron_id, cell_class, genotype, region.
/// Artificial maps carry kind=artificial, model, layer, filter, channel, neurn.
/// `notes` holds set-level annotations (e.g. sampling shortfalls).
struct RepresentationSet {
  std::vector<Plane> maps;
  std::vector<Meta> meta;
  Meta notes;

  std::size_t size() const { return maps.size(); }
  bool empty() const { return maps.empty(); }
  void validate() const;

  void append(const RepresentationSet& other);
  RepresentationSet subset(const std::vector<std::size_t>& indices) const;

  /// Maps flattened into the rows of a [size, h*w] matrix.
  Eigen::MatrixXd as_rows() const;
};

enum class ReduceMode { peak, mean, full };

std::string to_string(ReduceMode m);
ReduceMode parse_reduce_mode(const std::string& s);

/// Neural representation N = T^T * FS.
///
/// peak and mean first reduce each trial trace to a scalar, giving one
/// side x side map per neuron; full keeps every trace position and yields
/// trace_len maps.
RepresentationSet build_neural_rep(const TrialTraces& traces, const StimulusSet& stimuli,
                                   ReduceMode mode = ReduceMode::peak);

/// All neurons, concatenated in input order. Neurons are built in parallel.
RepresentationSet build_neural_reps(const std::vector<TrialTraces>& neurons,
                                    const StimulusSet& stimuli,
                                    ReduceMode mode = ReduceMode::peak);

struct ArtificialMeta {
  std::string model;
  std::string layer;
  bool neurn = false;
};

/// Splits a [F, C, H, W] kernel tensor into F*C maps, filter-major.
RepresentationSet extract_feature_reps(const Tensor& kernels, const ArtificialMeta& meta);

TrialTraces traces_from_tensor(const Tensor& t, const std::string& source);
Tensor traces_to_tensor(const TrialTraces& tr);

/// Loads every *.ntf file in dir as one neuron, sorted by neuron_id.
std::vector<TrialTraces> ingest_neuron_dir(const std::filesystem::path& dir);

/// Representation sets live on disk as a [n, h, w] NTF plus a JSON sidecar
/// at "<path>.meta.json".
std::filesystem::path sidecar_path(const std::filesystem::path& ntf);
void save_rep_set(const RepresentationSet& reps, const std::filesystem::path& path);
RepresentationSet load_rep_set(const std::filesystem::path& path);

}  // namespace neurn
