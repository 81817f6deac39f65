#include "neurn/domainbench.hpp"
#include "neurn/error.hpp"
#include "neurn/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace neurn;

namespace {

// Class 0 lights the top-left pixel, class 1 the bottom-right one.
DomainDataset separable_toy(int n, std::uint64_t seed) {
  Rng rng(seed);
  DomainDataset ds;
  ds.name = "toy";
  for (int i = 0; i < n; ++i) {
    Plane p = Plane::Zero(2, 2);
    const int label = i % 2;
    p(label, label) = rng.uniform(0.5, 1.0);
    p(1 - label, label) = rng.uniform(0.0, 0.2);
    ds.images.push_back(p);
    ds.labels.push_back(label);
  }
  return ds;
}

ClassifierConfig small_config(ArchKind arch, int classes, int hidden = 8) {
  ClassifierConfig c;
  c.arch = arch;
  c.hidden = hidden;
  c.num_classes = classes;
  c.learning_rate = 0.05;
  c.batch_size = 16;
  c.max_epochs = 50;
  c.patience = 50;
  return c;
}

// Largest relative error between analytic and central-difference gradients.
double gradient_error(ArchKind arch, std::uint64_t seed) {
  ClassifierConfig cfg = small_config(arch, 4, 8);
  MlpModel model(6, cfg, seed);
  Rng rng(seed + 1000);
  for (auto& l : model.layers()) {
    l.bias = Eigen::VectorXd::NullaryExpr(l.bias.size(), [&] { return rng.normal(0, 0.1); });
  }
  Eigen::MatrixXd x(6, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const std::vector<int> y = {0, 3, 1};
  std::vector<Layer> grads;
  model.loss_and_gradient(x, y, grads);

  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = model.loss(x, y);
    param = keep - h;
    const double down = model.loss(x, y);
    param = keep;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric)));
  };
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) check(layer.weight.data()[i], grads[l].weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias.data()[i], grads[l].bias.data()[i]);
  }
  return worst;
}

}  // namespace

TEST_CASE("identity-like shifts") {
  const DomainDataset ds = synth::digits(20, 12, 3);
  const DomainDataset same = apply_shift(ds, ShiftSpec::affine(1.0, 0.0), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(same.images[i] == ds.images[i]);

  const DomainDataset twice = apply_shift(apply_shift(ds, ShiftSpec::invert(), 0), ShiftSpec::invert(), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK((twice.images[i] - ds.images[i]).cwiseAbs().maxCoeff() < 1e-12);

  const DomainDataset blend0 = apply_shift(ds, ShiftSpec::background_blend(5, 0.0), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(blend0.images[i] == ds.images[i]);

  CHECK_THROWS_AS(apply_shift(ds, ShiftSpec::affine(0.0, 0.1), 0), UsageError);
}

TEST_CASE("affine shift with and without clamping") {
  DomainDataset ds;
  ds.images = {Plane::Constant(2, 2, 0.6)};
  ds.labels = {0};
  CHECK(apply_shift(ds, ShiftSpec::affine(2.0, 0.2), 0).images[0](0, 0) == doctest::Approx(1.4));
  CHECK(apply_shift(ds, ShiftSpec::affine(2.0, 0.2, true), 0).images[0](0, 0) == 1.0);
}

TEST_CASE("background blend uses a normalized grating") {
  const Plane tex = grating_texture(16, 4);
  CHECK(tex.minCoeff() == doctest::Approx(0.0));
  CHECK(tex.maxCoeff() == doctest::Approx(1.0));
  CHECK(grating_texture(16, 4) == tex);
  DomainDataset ds;
  ds.images = {Plane::Zero(16, 16)};
  ds.labels = {0};
  const Plane out = apply_shift(ds, ShiftSpec::background_blend(4, 0.5), 0).images[0];
  CHECK(out.maxCoeff() <= 0.5 + 1e-12);
  CHECK(out.minCoeff() >= 0.0);
}

TEST_CASE("shift spec parsing") {
  const ShiftSpec a = ShiftSpec::parse("affine:2.0:0.2");
  CHECK(a.kind == ShiftKind::affine);
  CHECK(a.gain == 2.0);
  CHECK_FALSE(a.clamp);
  CHECK(ShiftSpec::parse("affine:1:0:clamp").clamp);
  CHECK(ShiftSpec::parse("invert").kind == ShiftKind::invert);
  CHECK(ShiftSpec::parse("blend:7:0.5").texture_seed == 7);
  CHECK_THROWS_AS(ShiftSpec::parse("affine:x:0"), UsageError);
  CHECK_THROWS_AS(ShiftSpec::parse("rotate:3"), UsageError);
}

TEST_CASE("softmax and mlp gradients agree with central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CHECK(gradient_error(ArchKind::softmax, seed) < 1e-4);
    CHECK(gradient_error(ArchKind::mlp, seed) < 1e-4);
  }
}

TEST_CASE("adam step matches a scalar reference loop") {
  ClassifierConfig cfg = small_config(ArchKind::softmax, 2);
  cfg.learning_rate = 0.01;
  std::vector<Layer> params = {{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Zero(1)}};
  Optimizer opt(cfg);
  double p = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 0.3 * t - 0.7;
    opt.step(params, {{Eigen::MatrixXd::Constant(1, 1, g), Eigen::VectorXd::Zero(1)}});
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    p -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(params[0].weight(0, 0) == doctest::Approx(p).epsilon(1e-14));
  }
  CHECK(opt.steps() == 5);
}

TEST_CASE("separable toy is learned perfectly and deterministically") {
  const DomainDataset train = separable_toy(64, 1), val = separable_toy(16, 2);
  const ClassifierConfig cfg = small_config(ArchKind::softmax, 2);
  const MlpModel a = train_classifier(train, val, cfg);
  CHECK(evaluate(a, train, std::nullopt) == 1.0);
  CHECK(a.history.size() <= 50);
  const MlpModel b = train_classifier(train, val, cfg);
  REQUIRE(a.layers().size() == b.layers().size());
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    CHECK(a.layers()[l].weight == b.layers()[l].weight);
    CHECK(a.layers()[l].bias == b.layers()[l].bias);
  }
  CHECK_THROWS_AS(train_classifier(DomainDataset{}, val, cfg), UsageError);
}

TEST_CASE("all-zero model predicts class 0 everywhere") {
  const DomainDataset ds = synth::digits(50, 8, 9);
  ClassifierConfig cfg;
  MlpModel model(64, cfg, 1);
  for (auto& l : model.layers()) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const double zeros = double(std::count(ds.labels.begin(), ds.labels.end(), 0)) / double(ds.size());
  CHECK(evaluate(model, ds, std::nullopt) == zeros);
}

TEST_CASE("preprocessing must match training") {
  const DomainDataset train = separable_toy(32, 3), val = separable_toy(8, 4);
  const MlpModel m = train_classifier(train, val, small_config(ArchKind::softmax, 2));
  CHECK_THROWS_AS(evaluate(m, train, NeurnConfig{}), UsageError);
}

TEST_CASE("a NeuRN model scores identically on affinely shifted data") {
  const DomainDataset train = synth::digits(300, 12, 5), test = synth::digits(100, 12, 6);
  const auto [tr, val] = holdout_split(train, 0.1, 0);
  ClassifierConfig cfg = small_config(ArchKind::mlp, 10, 32);
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 10;
  const MlpModel m = train_classifier(tr, val, cfg, NeurnConfig{});
  const DomainDataset shifted = apply_shift(test, ShiftSpec::affine(2.0, 0.2), 0);
  CHECK(predict(m, shifted, NeurnConfig{}) == predict(m, test, NeurnConfig{}));
  CHECK(evaluate(m, shifted, NeurnConfig{}) == evaluate(m, test, NeurnConfig{}));
}

TEST_CASE("holdout split is a seeded partition") {
  const DomainDataset ds = synth::digits(50, 8, 1);
  const auto [tr, val] = holdout_split(ds, 0.1, 7);
  CHECK(val.size() == 5);
  CHECK(tr.size() == 45);
  const auto [tr2, val2] = holdout_split(ds, 0.1, 7);
  CHECK(val2.labels == val.labels);
  CHECK_THROWS_AS(holdout_split(ds, 1.0, 0), UsageError);
}

TEST_CASE("transfer matrix layout and identical-domain equality") {
  const DomainDataset train = synth::digits(200, 8, 11), test = synth::digits(60, 8, 12);
  std::vector<Domain> domains = {{"A", train, test}, {"B", train, test}};
  ClassifierConfig cfg = small_config(ArchKind::softmax, 10);
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 5;
  const TransferReport r = run_transfer_matrix(domains, cfg, NeurnConfig{});
  REQUIRE(r.rows.size() == 8);
  CHECK(r.rows[0].source == "A");
  CHECK(r.rows[0].target == "A");
  CHECK_FALSE(r.rows[0].neurn);
  CHECK(r.rows[1].neurn);
  CHECK(r.rows[2].target == "B");
  CHECK(r.rows[2].accuracy == r.rows[0].accuracy);
  CHECK(r.rows[3].accuracy == r.rows[1].accuracy);

  TransferOptions only_cross;
  only_cross.include_in_domain = false;
  CHECK(run_transfer_matrix(domains, cfg, std::nullopt, only_cross).rows.size() == 2);

  std::ostringstream out;
  write_transfer_csv(out, r);
  const std::string csv = out.str();
  CHECK(csv.rfind("source,target,arch,neurn,accuracy,seed\n", 0) == 0);
  CHECK(csv.find("A,B,softmax,neurn=true,") != std::string::npos);
}

TEST_CASE("dataset conversion checks labels") {
  const DomainDataset ds = synth::digits(10, 8, 2);
  const DomainDataset back = dataset_from_tensors("d", images_to_tensor(ds), labels_to_tensor(ds));
  CHECK(back.labels == ds.labels);
  CHECK(back.images == ds.images);
  CHECK_THROWS_AS(dataset_from_tensors("d", images_to_tensor(ds), Tensor({9}, std::vector<double>(9))), DataError);
  CHECK_THROWS_AS(dataset_from_tensors("d", images_to_tensor(ds), Tensor({10}, std::vector<double>(10, 0.5))), DataError);
}
