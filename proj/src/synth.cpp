#include "neurn/synth.hpp"

#include "neurn/error.hpp"
#include "neurn/rng.hpp"
#include "neurn/rsa.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace neurn::synth {

Tensor kernel_bank(int filters, int channels, int size, std::uint64_t seed) {
  if (filters <= 0 || channels <= 0 || size <= 0) throw UsageError("kernel bank dimensions must be positive");
  Rng rng(seed);
  Tensor t;
  t.shape = {std::size_t(filters), std::size_t(channels), std::size_t(size), std::size_t(size)};
  t.data.reserve(shape_product(t.shape));
  const double mid = 0.5 * (size - 1);
  for (int f = 0; f < filters; ++f) {
    for (int c = 0; c < channels; ++c) {
      const double cx = mid + rng.uniform(-0.8, 0.8);
      const double cy = mid + rng.uniform(-0.8, 0.8);
      const double major = rng.uniform(0.7, 1.6);
      const double minor = rng.uniform(0.5, major);
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const double amp = rng.uniform(0.1, 0.5);
      const double ct = std::cos(theta), st = std::sin(theta);
      for (int r = 0; r < size; ++r) {
        for (int q = 0; q < size; ++q) {
          const double dx = q - cx, dy = r - cy;
          const double u = (ct * dx + st * dy) / major;
          const double v = (-st * dx + ct * dy) / minor;
          t.data.push_back(amp * std::exp(-0.5 * (u * u + v * v)) + 0.01 * rng.normal());
        }
      }
    }
  }
  t.meta = {{"model", "synthnet"}, {"layer", "conv1"}, {"neurn", "false"}};
  return t;
}

Tensor neurn_kernel_bank(const Tensor& bank, const NeurnConfig& cfg) {
  if (bank.rank() != 4) throw UsageError("kernel bank must have rank 4");
  Tensor out = bank;
  const auto h = bank.shape[2], w = bank.shape[3];
  for (std::size_t m = 0; m < bank.shape[0] * bank.shape[1]; ++m) {
    const Plane p = Eigen::Map<const Plane>(bank.data.data() + m * h * w, Eigen::Index(h), Eigen::Index(w));
    const Plane n = neurn_apply(p, cfg);
    std::copy(n.data(), n.data() + n.size(), out.data.begin() + long(m * h * w));
  }
  out.meta["neurn"] = "true";
  return out;
}

namespace {

const std::array<const char*, 5> kExcGenotypes = {"Cux2", "Emx1", "Fezf2", "Rbp4", "Scnn1a"};
const std::array<const char*, 3> kInhGenotypes = {"Pvalb", "Sst", "Vip"};
const std::array<const char*, 6> kRegions = {"VISal", "VISam", "VISl", "VISp", "VISpm", "VISrl"};
// Calcium-transient-like trace profile; its single maximum is exactly 1.
const std::array<double, 8> kTraceShape = {0.1, 0.55, 1.0, 0.75, 0.5, 0.3, 0.18, 0.1};

std::string neuron_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%04d", i);
  return buf;
}

}  // namespace

NeuronPopulation neuron_population(const Tensor& bank, const PopulationSpec& spec,
                                   std::uint64_t seed) {
  const int n = spec.stimuli;
  const int J = spec.prototypes;
  const int D = spec.side * spec.side;
  if (bank.rank() != 4) throw UsageError("kernel bank must have rank 4");
  if (J <= 0 || static_cast<std::size_t>(J) > bank.shape[0]) throw UsageError("not enough kernels for the prototypes");
  if (n <= J + 1) throw UsageError("need more stimuli than prototypes + 1");
  if (spec.trace_len <= 2) throw UsageError("trace_len must exceed 2");
  Rng rng(seed);

  // Prototype maps: channel 0 of the first J filters, on the stimulus grid.
  const auto kh = bank.shape[2], kw = bank.shape[3];
  Eigen::MatrixXd protos(J, D);
  for (int j = 0; j < J; ++j) {
    const double* src = bank.data.data() + std::size_t(j) * bank.shape[1] * kh * kw;
    const Plane k = Eigen::Map<const Plane>(src, Eigen::Index(kh), Eigen::Index(kw));
    const Plane p = minmax_normalize(resize_bilinear(k, spec.side, spec.side));
    protos.row(j) = Eigen::Map<const Eigen::RowVectorXd>(p.data(), D).array() - 0.5;
  }

  // Orthonormal basis whose first direction is the all-ones vector.
  Eigen::MatrixXd g(n, J + 1);
  g.col(0).setOnes();
  for (int c = 1; c <= J; ++c) {
    for (int r = 0; r < n; ++r) g(r, c) = rng.normal();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, J + 1);
  const Eigen::MatrixXd weights = q.rightCols(J) * std::sqrt(double(n));

  auto orthogonal_noise = [&]() {
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r(i) = rng.normal();
    r -= q * (q.transpose() * r);
    return Eigen::VectorXd(r * (std::sqrt(double(n)) / r.norm()));
  };

  Eigen::MatrixXd noise(n, D);
  for (int c = 0; c < D; ++c) {
    for (int r = 0; r < n; ++r) noise(r, c) = rng.uniform(-1.0, 1.0);
  }
  noise.rowwise() -= noise.colwise().mean();
  const Eigen::MatrixXd mixture = weights * protos;
  const double alpha = 0.35 / mixture.cwiseAbs().maxCoeff();
  const double beta = 0.05;
  const Eigen::MatrixXd stim = ((alpha * mixture + beta * noise).array() + 0.5).matrix();

  NeuronPopulation pop;
  pop.stimuli.shape = {std::size_t(n), std::size_t(spec.side), std::size_t(spec.side)};
  pop.stimuli.data.resize(std::size_t(n) * D);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < D; ++c) pop.stimuli.data[std::size_t(r) * D + c] = std::clamp(stim(r, c), 0.0, 1.0);
  }
  pop.stimuli.meta = {{"content", "stimuli"}};

  std::vector<double> shape(kTraceShape.begin(), kTraceShape.end());
  shape.resize(std::size_t(spec.trace_len), kTraceShape.back());

  auto make = [&](int index, CellClass cls, const Eigen::VectorXd& response, const std::string& genotype) {
    TrialTraces tr;
    tr.neuron_id = neuron_id(index);
    tr.cell_class = cls;
    tr.genotype = genotype;
    tr.region = kRegions[std::size_t(index) % kRegions.size()];
    // Shift so the smallest peak response is 0.5; the offset only adds a constant map.
    const Eigen::VectorXd v = response.array() + (0.5 - response.minCoeff());
    tr.traces.resize(n, spec.trace_len);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < spec.trace_len; ++t) tr.traces(i, t) = v(i) * shape[std::size_t(t)];
    }
    return tr;
  };

  const int total = spec.excitatory + spec.inhibitory;
  pop.neurons.reserve(std::size_t(total));
  for (int e = 0; e < spec.excitatory; ++e) {
    const int j = e % J;
    const double gain = rng.uniform(0.5, 1.5);
    const Eigen::VectorXd response = gain * weights.col(j) + 0.15 * orthogonal_noise();
    pop.neurons.push_back(make(e, CellClass::excitatory, response,
                               kExcGenotypes[std::size_t(e) % kExcGenotypes.size()]));
  }
  for (int i = 0; i < spec.inhibitory; ++i) {
    const Eigen::VectorXd response = orthogonal_noise();
    pop.neurons.push_back(make(spec.excitatory + i, CellClass::inhibitory, response,
                               kInhGenotypes[std::size_t(i) % kInhGenotypes.size()]));
  }
  return pop;
}

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

// Segment order: top, upper-right, lower-right, bottom, lower-left, upper-left, middle.
constexpr std::array<unsigned, 10> kDigitSegments = {
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111};

double segment_distance(double px, double py, const Segment& s) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

DomainDataset digits(int count, int side, std::uint64_t seed, const std::string& name) {
  if (count <= 0 || side <= 0) throw UsageError("digit count and side must be positive");
  Rng rng(seed);
  DomainDataset ds;
  ds.name = name;
  ds.domain_tag = name;
  constexpr double w = 0.24, h = 0.34;
  const std::array<Segment, 7> base = {{{-w, -h, w, -h},
                                        {w, -h, w, 0},
                                        {w, 0, w, h},
                                        {-w, h, w, h},
                                        {-w, 0, -w, h},
                                        {-w, -h, -w, 0},
                                        {-w, 0, w, 0}}};
  for (int i = 0; i < count; ++i) {
    const int label = i % 10;
    const double scale = rng.uniform(0.85, 1.15);
    const double rot = rng.uniform(-0.15, 0.15);
    const double shear = rng.uniform(-0.2, 0.2);
    const double tx = rng.uniform(-0.06, 0.06), ty = rng.uniform(-0.06, 0.06);
    const double half_width = rng.uniform(0.045, 0.08);
    const double ink = rng.uniform(0.1, 0.2);
    const double cr = std::cos(rot), sr = std::sin(rot);
    auto pose = [&](double x, double y) {
      x = (x + shear * y) * scale;
      y *= scale;
      return std::pair{cr * x - sr * y + tx, sr * x + cr * y + ty};
    };
    std::vector<Segment> segs;
    for (int s = 0; s < 7; ++s) {
      if (!((kDigitSegments[std::size_t(label)] >> s) & 1u)) continue;
      const auto [ax, ay] = pose(base[std::size_t(s)].x0 + rng.normal(0, 0.015), base[std::size_t(s)].y0 + rng.normal(0, 0.015));
      const auto [bx, by] = pose(base[std::size_t(s)].x1 + rng.normal(0, 0.015), base[std::size_t(s)].y1 + rng.normal(0, 0.015));
      segs.push_back({ax, ay, bx, by});
    }
    Plane img(side, side);
    const double soft = 0.7 / side;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const double px = (c + 0.5) / side - 0.5, py = (r + 0.5) / side - 0.5;
        double d = 1e9;
        for (const auto& s : segs) d = std::min(d, segment_distance(px, py, s));
        const double cover = std::clamp(0.5 - (d - half_width) / soft, 0.0, 1.0);
        img(r, c) = cover > 0.0 ? std::clamp(ink * cover * (1.0 + rng.normal(0.0, 0.1)), 0.0, 1.0) : 0.0;
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

void write_population(const std::filesystem::path& dir, const Tensor& bank,
                      const Tensor& neurn_bank, const NeuronPopulation& pop) {
  std::filesystem::create_directories(dir / "neurons");
  save_ntf(pop.stimuli, dir / "stimuli.ntf");
  save_ntf(bank, dir / "kernels.ntf");
  save_ntf(neurn_bank, dir / "kernels_neurn.ntf");
  for (const auto& tr : pop.neurons) {
    save_ntf(traces_to_tensor(tr), dir / "neurons" / (tr.neuron_id + ".ntf"));
  }
}

}  // namespace neurn::synth
