#include "neurn/domainbench.hpp"

#include "neurn/error.hpp"
#include "neurn/parallel.hpp"
#include "neurn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

namespace neurn {

// ---- Datasets --------------------------------------------------------------

void DomainDataset::validate() const {
  if (images.size() != labels.size()) {
    throw UsageError("dataset " + name + " has " + std::to_string(images.size()) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (const auto& im : images) {
    if (im.rows() != images.front().rows() || im.cols() != images.front().cols()) {
      throw UsageError("dataset " + name + " mixes image sizes");
    }
  }
}

DomainDataset DomainDataset::resized(int s) const {
  DomainDataset out = *this;
  for (auto& im : out.images) {
    if (im.rows() != s || im.cols() != s) im = resize_bilinear(im, s, s);
  }
  return out;
}

DomainDataset DomainDataset::subset(const std::vector<std::size_t>& indices) const {
  DomainDataset out;
  out.name = name;
  out.domain_tag = domain_tag;
  for (auto i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

DomainDataset dataset_from_tensors(const std::string& name, const Tensor& images,
                                   const Tensor& labels) {
  DomainDataset ds;
  ds.name = name;
  ds.domain_tag = images.meta.contains("domain_tag") ? images.meta.at("domain_tag") : name;
  ds.images = planes_from_tensor(images);
  if (labels.rank() != 1) throw DataError("labels must be a rank-1 tensor");
  for (double v : labels.data) {
    if (v < 0 || v != std::floor(v)) throw DataError("labels must be non-negative integers");
    ds.labels.push_back(static_cast<int>(v));
  }
  if (ds.labels.size() != ds.images.size()) {
    throw DataError("dataset " + name + ": " + std::to_string(ds.images.size()) + " images vs " +
                    std::to_string(ds.labels.size()) + " labels");
  }
  return ds;
}

Tensor images_to_tensor(const DomainDataset& ds) {
  return tensor_from_planes(ds.images, {{"name", ds.name}, {"domain_tag", ds.domain_tag}});
}

Tensor labels_to_tensor(const DomainDataset& ds) {
  return Tensor({ds.labels.size()}, std::vector<double>(ds.labels.begin(), ds.labels.end()),
                {{"name", ds.name}, {"content", "labels"}});
}

// ---- Shifts ---------------------------------------------------------------

ShiftSpec ShiftSpec::affine(double gain, double bias, bool clamp) {
  ShiftSpec s;
  s.kind = ShiftKind::affine;
  s.gain = gain;
  s.bias = bias;
  s.clamp = clamp;
  return s;
}

ShiftSpec ShiftSpec::invert() {
  ShiftSpec s;
  s.kind = ShiftKind::invert;
  return s;
}

ShiftSpec ShiftSpec::background_blend(std::uint64_t texture_seed, double scale) {
  ShiftSpec s;
  s.kind = ShiftKind::background_blend;
  s.texture_seed = texture_seed;
  s.scale = scale;
  return s;
}

ShiftSpec ShiftSpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  try {
    if (!parts.empty() && parts[0] == "affine" && (parts.size() == 3 || parts.size() == 4)) {
      const bool clamp = parts.size() == 4 && parts[3] == "clamp";
      if (parts.size() == 4 && !clamp) throw UsageError("bad shift flag '" + parts[3] + "'");
      return affine(std::stod(parts[1]), std::stod(parts[2]), clamp);
    }
    if (parts.size() == 1 && parts[0] == "invert") return invert();
    if (parts.size() == 3 && parts[0] == "blend") {
      return background_blend(std::stoull(parts[1]), std::stod(parts[2]));
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse shift '" + text + "'");
  }
  throw UsageError("cannot parse shift '" + text +
                   "' (expected affine:GAIN:BIAS[:clamp], invert or blend:SEED:SCALE)");
}

std::string ShiftSpec::tag() const {
  std::ostringstream out;
  out << std::setprecision(6);
  switch (kind) {
    case ShiftKind::affine: out << "affine(" << gain << ";" << bias << (clamp ? ";clamp" : "") << ")"; break;
    case ShiftKind::invert: out << "invert"; break;
    case ShiftKind::background_blend: out << "blend(" << texture_seed << ";" << scale << ")"; break;
  }
  return out.str();
}

Plane grating_texture(int side, std::uint64_t seed) {
  Rng rng(seed);
  Plane tex = Plane::Zero(side, side);
  for (int g = 0; g < 3; ++g) {
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double cycles = rng.uniform(1.0, 4.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double kx = std::cos(theta) * cycles * 2.0 * std::numbers::pi / side;
    const double ky = std::sin(theta) * cycles * 2.0 * std::numbers::pi / side;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) tex(r, c) += std::sin(kx * c + ky * r + phase);
    }
  }
  const double lo = tex.minCoeff(), hi = tex.maxCoeff();
  if (hi > lo) tex = (tex.array() - lo) / (hi - lo);
  return tex;
}

DomainDataset apply_shift(const DomainDataset& ds, const ShiftSpec& spec, std::uint64_t seed) {
  ds.validate();
  if (spec.kind == ShiftKind::affine && spec.gain == 0.0) {
    throw UsageError("affine shift gain must be nonzero");
  }
  DomainDataset out = ds;
  out.domain_tag = ds.domain_tag + "+" + spec.tag();
  Rng texture_rng(spec.texture_seed ^ (seed * 0x9E3779B97F4A7C15ULL));
  for (auto& im : out.images) {
    switch (spec.kind) {
      case ShiftKind::affine:
        if (spec.gain != 1.0 || spec.bias != 0.0) im = (spec.gain * im.array() + spec.bias).matrix();
        if (spec.clamp) im = im.cwiseMax(0.0).cwiseMin(1.0);
        break;
      case ShiftKind::invert:
        im = (1.0 - im.array()).matrix();
        break;
      case ShiftKind::background_blend: {
        const Plane tex = grating_texture(static_cast<int>(im.rows()), texture_rng.next());
        im = (im - spec.scale * tex).cwiseAbs();
        break;
      }
    }
  }
  return out;
}

// ---- Classifier -------------------------------------------------------------

void ClassifierConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  if (max_epochs <= 0) throw UsageError("max_epochs must be positive");
  if (patience <= 0) throw UsageError("patience must be positive");
  if (num_classes < 2) throw UsageError("num_classes must be at least 2");
  if (arch == ArchKind::mlp && hidden <= 0) throw UsageError("mlp hidden width must be positive");
}

std::string ClassifierConfig::arch_name() const {
  return arch == ArchKind::softmax ? "softmax" : "mlp" + std::to_string(hidden);
}

namespace {

Layer init_layer(int in, int out, double limit, Rng& rng) {
  Layer l;
  l.weight.resize(out, in);
  for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = rng.uniform(-limit, limit);
  }
  l.bias = Eigen::VectorXd::Zero(out);
  return l;
}

// Column-wise log-softmax probabilities and the mean cross-entropy.
double softmax_xent(const Eigen::MatrixXd& z, const std::vector<int>& y, Eigen::MatrixXd* probs) {
  const auto batch = z.cols();
  double total = 0.0;
  if (probs) probs->resize(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double mx = z.col(j).maxCoeff();
    const Eigen::VectorXd e = (z.col(j).array() - mx).exp();
    const double s = e.sum();
    total += std::log(s) + mx - z(y[std::size_t(j)], j);
    if (probs) probs->col(j) = e / s;
  }
  return total / static_cast<double>(batch);
}

void check_labels(const std::vector<int>& y, int classes) {
  for (int v : y) {
    if (v < 0 || v >= classes) throw UsageError("label " + std::to_string(v) + " out of range");
  }
}

}  // namespace

MlpModel::MlpModel(int input_dim, const ClassifierConfig& cfg, std::uint64_t init_seed)
    : input_dim_(input_dim), num_classes_(cfg.num_classes), arch_name_(cfg.arch_name()) {
  cfg.validate();
  if (input_dim <= 0) throw UsageError("input dimension must be positive");
  Rng rng(init_seed);
  if (cfg.arch == ArchKind::softmax) {
    layers_.push_back(init_layer(input_dim, num_classes_,
                                 std::sqrt(6.0 / (input_dim + num_classes_)), rng));
  } else {
    layers_.push_back(init_layer(input_dim, cfg.hidden, std::sqrt(6.0 / input_dim), rng));
    layers_.push_back(init_layer(cfg.hidden, num_classes_,
                                 std::sqrt(6.0 / (cfg.hidden + num_classes_)), rng));
  }
}

Eigen::MatrixXd MlpModel::logits(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim_) {
    throw UsageError("input dimension " + std::to_string(x.rows()) + " does not match model " +
                     std::to_string(input_dim_));
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

double MlpModel::loss(const Eigen::MatrixXd& x, const std::vector<int>& y) const {
  check_labels(y, num_classes_);
  return softmax_xent(logits(x), y, nullptr);
}

double MlpModel::loss_and_gradient(const Eigen::MatrixXd& x, const std::vector<int>& y,
                                   std::vector<Layer>& grads) const {
  check_labels(y, num_classes_);
  if (x.rows() != input_dim_) throw UsageError("input dimension does not match model");
  const auto batch = static_cast<double>(x.cols());

  // Forward, keeping each layer's input activation.
  std::vector<Eigen::MatrixXd> inputs;
  inputs.reserve(layers_.size());
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    inputs.push_back(a);
    Eigen::MatrixXd z = (layers_[l].weight * a).colwise() + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  Eigen::MatrixXd probs;
  const double value = softmax_xent(a, y, &probs);

  Eigen::MatrixXd delta = probs;
  for (Eigen::Index j = 0; j < delta.cols(); ++j) delta(y[std::size_t(j)], j) -= 1.0;
  delta /= batch;

  grads.resize(layers_.size());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads[l].weight = delta * inputs[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers_[l].weight.transpose() * delta;
      // ReLU derivative: the stored input of layer l is the rectified output of l-1.
      delta = (inputs[l].array() > 0.0).select(back, 0.0);
    }
  }
  return value;
}

std::vector<int> MlpModel::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd z = logits(x);
  std::vector<int> out(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    int best = 0;
    for (Eigen::Index c = 1; c < z.rows(); ++c) {
      if (z(c, j) > z(best, j)) best = static_cast<int>(c);
    }
    out[std::size_t(j)] = best;
  }
  return out;
}

void Optimizer::step(std::vector<Layer>& params, const std::vector<Layer>& grads) {
  ++t_;
  if (cfg_.optimizer == OptimizerKind::sgd) {
    for (std::size_t l = 0; l < params.size(); ++l) {
      params[l].weight -= cfg_.learning_rate * grads[l].weight;
      params[l].bias -= cfg_.learning_rate * grads[l].bias;
    }
    return;
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      Layer z{Eigen::MatrixXd::Zero(p.weight.rows(), p.weight.cols()),
              Eigen::VectorXd::Zero(p.bias.size())};
      m_.push_back(z);
      v_.push_back(z);
    }
  }
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, t_);
  const double c2 = 1.0 - std::pow(b2, t_);
  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= cfg_.learning_rate * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + cfg_.adam_epsilon);
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, m_[l].weight, v_[l].weight, grads[l].weight);
    update(params[l].bias, m_[l].bias, v_[l].bias, grads[l].bias);
  }
}

Eigen::MatrixXd design_matrix(const DomainDataset& ds, const std::optional<NeurnConfig>& preprocess) {
  ds.validate();
  if (ds.images.empty()) return {};
  const auto dim = ds.images.front().size();
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(ds.size()));
  parallel_for(ds.size(), [&](std::size_t i) {
    const Plane p = preprocess ? neurn_apply(ds.images[i], *preprocess) : ds.images[i];
    x.col(Eigen::Index(i)) = Eigen::Map<const Eigen::VectorXd>(p.data(), dim);
  });
  return x;
}

namespace {

double accuracy_of(const std::vector<int>& pred, const std::vector<int>& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace

MlpModel train_classifier(const DomainDataset& train, const DomainDataset& val,
                          const ClassifierConfig& cfg,
                          const std::optional<NeurnConfig>& preprocess) {
  cfg.validate();
  if (train.size() == 0 || val.size() == 0) throw UsageError("training and validation sets must be non-empty");
  train.validate();
  val.validate();
  if (train.side() != val.side() || train.images.front().cols() != val.images.front().cols()) {
    throw UsageError("training and validation images differ in size");
  }
  check_labels(train.labels, cfg.num_classes);
  check_labels(val.labels, cfg.num_classes);
  if (preprocess) preprocess->validate();

  const Eigen::MatrixXd x = design_matrix(train, preprocess);
  const Eigen::MatrixXd xv = design_matrix(val, preprocess);

  MlpModel model(static_cast<int>(x.rows()), cfg, cfg.seed);
  model.preprocess = preprocess;
  Optimizer opt(cfg);
  Rng shuffle_rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Layer> grads;
  std::vector<Layer> best = model.layers();
  double best_acc = -1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const auto end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const std::vector<std::size_t> idx(order.begin() + long(start), order.begin() + long(end));
      Eigen::MatrixXd xb = x(Eigen::all, idx);
      std::vector<int> yb;
      yb.reserve(idx.size());
      for (auto i : idx) yb.push_back(train.labels[i]);
      const double l = model.loss_and_gradient(xb, yb, grads);
      if (!std::isfinite(l)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      opt.step(model.layers(), grads);
      loss_sum += l;
      ++batches;
    }
    const double acc = accuracy_of(model.predict(xv), val.labels);
    model.history.push_back({epoch, loss_sum / batches, acc});
    if (acc > best_acc) {
      best_acc = acc;
      best = model.layers();
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.layers() = best;
  return model;
}

std::vector<int> predict(const MlpModel& model, const DomainDataset& ds,
                         const std::optional<NeurnConfig>& preprocess) {
  if (preprocess != model.preprocess) {
    throw UsageError("evaluation preprocessing does not match the model's training preprocessing");
  }
  return model.predict(design_matrix(ds, preprocess));
}

double evaluate(const MlpModel& model, const DomainDataset& ds,
                const std::optional<NeurnConfig>& preprocess) {
  return accuracy_of(predict(model, ds, preprocess), ds.labels);
}

std::pair<DomainDataset, DomainDataset> holdout_split(const DomainDataset& ds, double fraction,
                                                      std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("holdout fraction must be in (0, 1)");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed ^ 0x2545F4914F6CDD1DULL);
  rng.shuffle(idx);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, ds.size() > 1 ? ds.size() - 1 : 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + long(n_val));
  std::vector<std::size_t> tr(idx.begin() + long(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {ds.subset(tr), ds.subset(val)};
}

TransferReport run_transfer_matrix(const std::vector<Domain>& domains,
                                   const ClassifierConfig& cfg,
                                   const std::optional<NeurnConfig>& neurn,
                                   const TransferOptions& opts) {
  if (domains.empty()) throw UsageError("transfer matrix needs at least one domain");
  const int side = domains.front().train.side();
  for (const auto& d : domains) {
    d.train.validate();
    d.test.validate();
    if (d.train.size() == 0 || d.test.size() == 0) {
      throw UsageError("domain " + d.name + " has an empty split");
    }
    if (d.train.side() != side || d.test.side() != side ||
        d.train.images.front().cols() != side || d.test.images.front().cols() != side) {
      throw UsageError("domain " + d.name + " does not share image side " + std::to_string(side));
    }
  }

  std::vector<std::optional<NeurnConfig>> flags = {std::nullopt};
  if (neurn) flags.push_back(neurn);

  struct Cell {
    std::size_t source;
    std::size_t flag;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < domains.size(); ++s) {
    for (std::size_t f = 0; f < flags.size(); ++f) cells.push_back({s, f});
  }

  // Each (source, flag) cell is an independent, internally sequential run.
  std::vector<std::vector<double>> acc(cells.size());
  parallel_for(cells.size(), [&](std::size_t c) {
    const auto& src = domains[cells[c].source];
    const auto& pre = flags[cells[c].flag];
    const auto [tr, val] = holdout_split(src.train, opts.holdout, cfg.seed);
    const MlpModel model = train_classifier(tr, val, cfg, pre);
    acc[c].resize(domains.size());
    for (std::size_t t = 0; t < domains.size(); ++t) {
      if (t == cells[c].source && !opts.include_in_domain) continue;
      acc[c][t] = evaluate(model, domains[t].test, pre);
    }
  });

  TransferReport report;
  for (std::size_t s = 0; s < domains.size(); ++s) {
    for (std::size_t t = 0; t < domains.size(); ++t) {
      if (s == t && !opts.include_in_domain) continue;
      for (std::size_t f = 0; f < flags.size(); ++f) {
        const std::size_t c = s * flags.size() + f;
        report.rows.push_back({domains[s].name, domains[t].name, cfg.arch_name(), f == 1,
                               acc[c][t], cfg.seed});
      }
    }
  }
  return report;
}

void write_transfer_csv(std::ostream& out, const TransferReport& report) {
  out << "source,target,arch,neurn,accuracy,seed\n" << std::setprecision(17);
  for (const auto& r : report.rows) {
    out << r.source << ',' << r.target << ',' << r.arch << ",neurn=" << (r.neurn ? "true" : "false")
        << ',' << r.accuracy << ',' << r.seed << '\n';
  }
}

}  // namespace neurn
