#pragma once

#include "neurn/neurn.hpp"
#include "neurn/tensorio.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace neurn {

/// Single-channel labelled images sharing one side length.
struct DomainDataset {
  std::string name;
  std::vector<Plane> images;
  std::vector<int> labels;
  std::string domain_tag;

  std::size_t size() const { return images.size(); }
  int side() const { return images.empty() ? 0 : static_cast<int>(images.front().rows()); }
  void validate() const;

  /// Resizes every image to side x side (no-op when already that size).
  DomainDataset resized(int side) const;
  DomainDataset subset(const std::vector<std::size_t>& indices) const;
};

/// A named domain with its own train and test splits.
struct Domain {
  std::string name;
  DomainDataset train;
  DomainDataset test;
};

/// images: [n, h, w] tensor (NTF or IDX); labels: [n].
DomainDataset dataset_from_tensors(const std::string& name, const Tensor& images,
                                   const Tensor& labels);
Tensor images_to_tensor(const DomainDataset& ds);
Tensor labels_to_tensor(const DomainDataset& ds);

enum class ShiftKind { affine, invert, background_blend };

struct ShiftSpec {
  ShiftKind kind = ShiftKind::affine;
  double gain = 1.0;
  double bias = 0.0;
  std::uint64_t texture_seed = 0;
  double scale = 0.0;
  bool clamp = false;

  static ShiftSpec affine(double gain, double bias, bool clamp = false);
  static ShiftSpec invert();
  static ShiftSpec background_blend(std::uint64_t texture_seed, double scale);

  /// Parses "affine:GAIN:BIAS[:clamp]", "invert" or "blend:SEED:SCALE".
  static ShiftSpec parse(const std::string& text);
  std::string tag() const;
};

/// Sum of three sinusoidal gratings with random orientation, frequency and
/// phase, rescaled to [0, 1].
Plane grating_texture(int side, std::uint64_t seed);

DomainDataset apply_shift(const DomainDataset& ds, const ShiftSpec& spec, std::uint64_t seed);

enum class ArchKind { softmax, mlp };
enum class OptimizerKind { adam, sgd };

struct ClassifierConfig {
  ArchKind arch = ArchKind::mlp;
  int hidden = 128;
  int num_classes = 10;
  double learning_rate = 0.001;
  int batch_size = 256;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  std::string arch_name() const;  // "softmax" or "mlp<hidden>"
};

struct Layer {
  Eigen::MatrixXd weight;  // [out, in]
  Eigen::VectorXd bias;    // [out]
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

/// Fully connected classifier: one affine layer (softmax regression) or one
/// rectified-linear hidden layer followed by an affine output layer.
/// Inputs are columns of a [input_dim, batch] matrix.
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(int input_dim, const ClassifierConfig& cfg, std::uint64_t init_seed);

  int input_dim() const { return input_dim_; }
  int num_classes() const { return num_classes_; }
  const std::string& arch_name() const { return arch_name_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;

  /// Mean softmax cross-entropy over the batch columns.
  double loss(const Eigen::MatrixXd& x, const std::vector<int>& y) const;

  /// Loss plus gradients with respect to every layer's parameters.
  double loss_and_gradient(const Eigen::MatrixXd& x, const std::vector<int>& y,
                           std::vector<Layer>& grads) const;

  /// Argmax per column; ties resolve to the lowest class index.
  std::vector<int> predict(const Eigen::MatrixXd& x) const;

  std::optional<NeurnConfig> preprocess;
  std::vector<EpochRecord> history;
  int best_epoch = 0;

 private:
  int input_dim_ = 0;
  int num_classes_ = 0;
  std::string arch_name_;
  std::vector<Layer> layers_;
};

/// Adam with bias correction; plain SGD when configured so.
class Optimizer {
 public:
  explicit Optimizer(const ClassifierConfig& cfg) : cfg_(cfg) {}
  void step(std::vector<Layer>& params, const std::vector<Layer>& grads);
  int steps() const { return t_; }

 private:
  ClassifierConfig cfg_;
  std::vector<Layer> m_, v_;
  int t_ = 0;
};

/// Images (optionally NeuRN-transformed) flattened into matrix columns.
Eigen::MatrixXd design_matrix(const DomainDataset& ds,
                              const std::optional<NeurnConfig>& preprocess);

MlpModel train_classifier(const DomainDataset& train, const DomainDataset& val,
                          const ClassifierConfig& cfg,
                          const std::optional<NeurnConfig>& preprocess = std::nullopt);

std::vector<int> predict(const MlpModel& model, const DomainDataset& ds,
                         const std::optional<NeurnConfig>& preprocess);

double evaluate(const MlpModel& model, const DomainDataset& ds,
                const std::optional<NeurnConfig>& preprocess);

/// Seeded split of ds into (train, validation) with the given fraction held out.
std::pair<DomainDataset, DomainDataset> holdout_split(const DomainDataset& ds, double fraction,
                                                      std::uint64_t seed);

struct TransferRow {
  std::string source;
  std::string target;
  std::string arch;
  bool neurn = false;
  double accuracy = 0.0;
  std::uint64_t seed = 0;
};

struct TransferReport {
  std::vector<TransferRow> rows;
};

struct TransferOptions {
  bool include_in_domain = true;  // also emit source -> source rows (source test split)
  double holdout = 0.1;
};

/// Trains once per (source, NeuRN flag) on the source training split with
/// a seeded validation holdout, then scores every target's test split.
/// With neurn set, each pair is run plain and with NeuRN preprocessing.
TransferReport run_transfer_matrix(const std::vector<Domain>& domains,
                                   const ClassifierConfig& cfg,
                                   const std::optional<NeurnConfig>& neurn,
                                   const TransferOptions& opts = {});

void write_transfer_csv(std::ostream& out, const TransferReport& report);

}  // namespace neurn
