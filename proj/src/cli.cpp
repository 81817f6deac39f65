#include "neurn/cli.hpp"

#include "neurn/config.hpp"
#include "neurn/domainbench.hpp"
#include "neurn/error.hpp"
#include "neurn/kdeiou.hpp"
#include "neurn/neurn.hpp"
#include "neurn/parallel.hpp"
#include "neurn/reprs.hpp"
#include "neurn/rsa.hpp"
#include "neurn/select.hpp"
#include "neurn/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>

namespace neurn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raw flag values; unset optionals leave the config value alone.
struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<int> threads;

  // neurn
  std::string input;
  std::optional<int> k;
  std::optional<std::string> padding;
  std::optional<double> epsilon;
  bool batch = false;

  // reps
  std::string neurons_dir, stimuli, kernels, model = "model", layer = "layer";
  std::optional<int> side;
  std::optional<std::string> mode;
  bool neurn_flag = false;

  // select
  std::string reps;
  std::optional<int> clusters, per_cluster;
  std::string split_by;

  // rsa
  std::string features, neurals, plain, neurn_features;
  std::vector<std::string> group_by;
  bool no_normalize = false;

  // kde
  std::string reps_a, reps_b, group_b;
  std::optional<int> grid;
  std::optional<double> bandwidth;
  bool svg = false;
  bool normalize_maps = false;

  // bench
  std::vector<std::string> domains, derives;
  std::optional<std::string> arch;
  std::optional<int> hidden, epochs, patience, batch_size, seeds;
  std::optional<double> lr;
  bool no_neurn = false;
  bool transfer_only = false;

  // synth
  int exc = 500, inh = 500, n_stimuli = 100, filters = 64, channels = 16, kernel_size = 5;
  std::string tuned_to = "neurn";
  int digits_train = 2000, digits_test = 500, digits_side = 16;
};

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  std::map<std::string, std::string> inputs;   // path -> checksum
  std::map<std::string, std::string> outputs;  // path -> checksum

  void input(const fs::path& p) {
    if (fs::is_regular_file(p)) inputs[p.string()] = file_checksum(p);
  }
  void output(const fs::path& p) { outputs[p.string()] = file_checksum(p); }

  void write(const fs::path& path) const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["config_hash"] = hex64(fnv1a64(config.dump()));
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write manifest " + path.string());
    f << j.dump(2) << '\n';
  }
};

Padding parse_padding(const std::string& s) {
  if (s == "replicate") return Padding::replicate;
  if (s == "reflect") return Padding::reflect;
  throw UsageError("--padding must be replicate or reflect, got '" + s + "'");
}

RunConfig effective_config(const Flags& f) {
  RunConfig cfg = f.config ? RunConfig::load(*f.config) : RunConfig{};
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.threads) cfg.threads = *f.threads;
  if (f.k) cfg.neurn.k = *f.k;
  if (f.padding) cfg.neurn.padding = parse_padding(*f.padding);
  if (f.epsilon) cfg.neurn.epsilon = *f.epsilon;
  if (f.side) {
    cfg.reps.side = *f.side;
    cfg.rsa.common_side = *f.side;
    cfg.bench.side = *f.side;
  }
  if (f.mode) cfg.reps.mode = parse_reduce_mode(*f.mode);
  if (f.clusters) cfg.kmeans.k = *f.clusters;
  if (f.per_cluster) cfg.kmeans.per_cluster = *f.per_cluster;
  if (f.no_normalize) cfg.rsa.normalize = false;
  if (f.grid) cfg.kde.grid_size = *f.grid;
  if (f.bandwidth) cfg.kde.bandwidth = *f.bandwidth;
  auto& c = cfg.bench.classifier;
  if (f.arch) {
    if (*f.arch != "mlp" && *f.arch != "softmax") throw UsageError("--arch must be mlp or softmax");
    c.arch = *f.arch == "mlp" ? ArchKind::mlp : ArchKind::softmax;
  }
  if (f.hidden) c.hidden = *f.hidden;
  if (f.epochs) c.max_epochs = *f.epochs;
  if (f.patience) c.patience = *f.patience;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.lr) c.learning_rate = *f.lr;
  if (f.seeds) cfg.bench.seeds = *f.seeds;
  if (f.transfer_only) cfg.bench.include_in_domain = false;
  cfg.neurn.validate();
  return cfg;
}

fs::path require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  return cfg.out;
}

fs::path out_dir(const RunConfig& cfg) {
  const fs::path dir = require_out(cfg);
  fs::create_directories(dir);
  return dir;
}

fs::path file_manifest(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError(flag + " is required");
}

// ---- Subcommands ----------------------------------------------------------

void run_neurn_apply(const Flags& f, const RunConfig& cfg, Manifest& man) {
  require_file("--input", f.input);
  const fs::path out = require_out(cfg);
  const Tensor in = load_ntf(f.input);
  man.input(f.input);
  Tensor result = in;
  if (in.rank() == 2) {
    const auto planes = planes_from_tensor(Tensor({1, in.shape[0], in.shape[1]}, in.data));
    const Plane p = neurn_apply(planes.front(), cfg.neurn);
    result.data.assign(p.data(), p.data() + p.size());
  } else if (in.rank() == 3) {
    const auto planes = planes_from_tensor(in);
    std::vector<Plane> outp;
    if (f.batch) {
      outp.resize(planes.size());
      parallel_for(planes.size(), [&](std::size_t i) { outp[i] = neurn_apply(planes[i], cfg.neurn); });
    } else {
      outp = neurn_apply(Image(planes), cfg.neurn).planes();
    }
    result = tensor_from_planes(outp, in.meta);
  } else {
    throw DataError(f.input + ": expected a rank-2 image or rank-3 [c|n, h, w] tensor");
  }
  result.meta["neurn.k"] = std::to_string(cfg.neurn.k);
  result.meta["neurn.padding"] = cfg.neurn.padding == Padding::replicate ? "replicate" : "reflect";
  save_ntf(result, out);
  man.output(out);
  man.write(file_manifest(out));
}

void save_reps_with_manifest(const RepresentationSet& reps, const fs::path& out, Manifest& man) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_rep_set(reps, out);
  man.output(out);
  man.output(sidecar_path(out));
  man.write(file_manifest(out));
}

void run_reps_neural(const Flags& f, const RunConfig& cfg, Manifest& man) {
  require_file("--neurons", f.neurons_dir);
  require_file("--stimuli", f.stimuli);
  const fs::path out = require_out(cfg);
  const auto neurons = ingest_neuron_dir(f.neurons_dir);
  if (neurons.empty()) throw DataError(f.neurons_dir + ": no neuron files found");
  man.input(f.stimuli);
  for (const auto& e : fs::directory_iterator(f.neurons_dir)) {
    if (e.path().extension() == ".ntf") man.input(e.path());
  }
  const StimulusSet stim = StimulusSet::from_tensor(load_ntf(f.stimuli), cfg.reps.side);
  save_reps_with_manifest(build_neural_reps(neurons, stim, cfg.reps.mode), out, man);
}

void run_reps_features(const Flags& f, const RunConfig& cfg, Manifest& man) {
  require_file("--kernels", f.kernels);
  const fs::path out = require_out(cfg);
  const Tensor k = load_ntf(f.kernels);
  man.input(f.kernels);
  save_reps_with_manifest(extract_feature_reps(k, {f.model, f.layer, f.neurn_flag}), out, man);
}

RepresentationSet select_central(const RepresentationSet& reps, const RunConfig& cfg,
                                 std::uint64_t seed) {
  const Embedding e = embed(reps.as_rows(), cfg.embed);
  KMeansOptions opts;
  opts.max_iterations = cfg.kmeans.max_iterations;
  opts.tolerance = cfg.kmeans.tolerance;
  const ClusterResult cr = kmeans(e.points, cfg.kmeans.k, seed, opts);
  return sample_central(reps, cr, e.points, cfg.kmeans.per_cluster);
}

void run_select_sample(const Flags& f, const RunConfig& cfg, Manifest& man) {
  require_file("--reps", f.reps);
  const fs::path out = require_out(cfg);
  const RepresentationSet reps = load_rep_set(f.reps);
  man.input(f.reps);
  man.input(sidecar_path(f.reps));
  if (reps.empty()) throw DataError(f.reps + ": empty representation set");

  RepresentationSet result;
  if (f.split_by.empty()) {
    result = select_central(reps, cfg, cfg.seed);
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const auto it = reps.meta[i].find(f.split_by);
      if (it == reps.meta[i].end()) throw UsageError("--split-by key '" + f.split_by + "' missing from " + f.reps);
      groups[it->second].push_back(i);
    }
    for (const auto& [value, idx] : groups) {
      RepresentationSet part = select_central(reps.subset(idx), cfg, cfg.seed);
      RepresentationSet renamed;
      renamed.maps = std::move(part.maps);
      renamed.meta = std::move(part.meta);
      for (const auto& [k, v] : part.notes) renamed.notes[value + "." + k] = v;
      result.append(renamed);
    }
  }
  save_reps_with_manifest(result, out, man);
}

RepresentationSet load_checked(const std::string& flag, const std::string& path, Manifest& man) {
  require_file(flag, path);
  RepresentationSet r = load_rep_set(path);
  if (r.empty()) throw DataError(path + ": empty representation set");
  man.input(path);
  man.input(sidecar_path(path));
  return r;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& body, Manifest& man) {
  {
    std::ofstream o(path, std::ios::trunc);
    if (!o) throw DataError("cannot write " + path.string());
    body(o);
  }
  man.output(path);
}

void run_rsa_compare(const Flags& f, const RunConfig& cfg, Manifest& man) {
  const auto features = load_checked("--features", f.features, man);
  const auto neurals = load_checked("--neurals", f.neurals, man);
  const fs::path dir = out_dir(cfg);
  const RmseMatrix m = compare_sets(features, neurals, cfg.rsa);
  write_text(dir / "matrix.csv", [&](std::ostream& o) { write_matrix_csv(o, m); }, man);
  for (const auto& key : f.group_by) {
    const auto groups = aggregate(m, key);
    write_text(dir / ("summary_" + key + ".csv"), [&](std::ostream& o) { write_summary_csv(o, groups); }, man);
  }
  man.write(dir / "manifest.json");
}

void run_rsa_scatter(const Flags& f, const RunConfig& cfg, Manifest& man) {
  const auto plain = load_checked("--plain", f.plain, man);
  const auto with_neurn = load_checked("--neurn", f.neurn_features, man);
  const auto neurals = load_checked("--neurals", f.neurals, man);
  if (f.group_by.empty()) throw UsageError("--group-by is required");
  const fs::path dir = out_dir(cfg);
  const RmseMatrix mp = compare_sets(plain, neurals, cfg.rsa);
  const RmseMatrix mn = compare_sets(with_neurn, neurals, cfg.rsa);
  for (const auto& key : f.group_by) {
    const auto pts = neurn_scatter(mn, mp, key);
    write_text(dir / ("scatter_" + key + ".csv"), [&](std::ostream& o) { write_scatter_csv(o, pts); }, man);
  }
  man.write(dir / "manifest.json");
}

void run_kde_iou(const Flags& f, const RunConfig& cfg, Manifest& man) {
  auto a = load_checked("--a", f.reps_a, man);
  auto b = load_checked("--b", f.reps_b, man);
  if (f.group_by.size() != 1) throw UsageError("--group-by takes exactly one key for kde iou");
  const std::string key = f.group_by.front();
  if (f.normalize_maps) {
    for (auto& m : a.maps) m = minmax_normalize(m);
    for (auto& m : b.maps) m = minmax_normalize(m);
  }
  const auto pools_a = pool_activations(a, key);
  const auto pools_b = pool_activations(b, f.group_b.empty() ? key : f.group_b);
  const fs::path dir = out_dir(cfg);

  std::vector<std::pair<std::string, KdeCurve>> curves_a, curves_b;
  for (const auto& [g, pool] : pools_a) curves_a.emplace_back(g, kde_fit_pool(pool, cfg.kde.bandwidth, cfg.kde.grid_size, cfg.seed));
  for (const auto& [g, pool] : pools_b) curves_b.emplace_back(g, kde_fit_pool(pool, cfg.kde.bandwidth, cfg.kde.grid_size, cfg.seed));

  write_text(dir / "iou.csv", [&](std::ostream& o) {
    o << "group_a,group_b,iou,bandwidth_a,bandwidth_b,n_a,n_b\n" << std::setprecision(17);
    for (const auto& [ga, ca] : curves_a) {
      for (const auto& [gb, cb] : curves_b) {
        o << ga << ',' << gb << ',' << iou(ca, cb) << ',' << ca.bandwidth << ',' << cb.bandwidth << ','
          << ca.sample_count << ',' << cb.sample_count << '\n';
      }
    }
  }, man);
  if (f.svg) {
    for (const auto& [ga, ca] : curves_a) {
      for (const auto& [gb, cb] : curves_b) {
        write_text(dir / ("kde_" + ga + "__" + gb + ".svg"),
                   [&](std::ostream& o) { write_kde_svg(o, ca, cb, "a:" + ga, "b:" + gb); }, man);
      }
    }
  }
  man.write(dir / "manifest.json");
}

Tensor load_any(const fs::path& p) { return is_ntf_file(p) ? load_ntf(p) : load_idx(p); }

void run_bench_domain(const Flags& f, const RunConfig& cfg, Manifest& man) {
  if (f.domains.empty()) throw UsageError("--domain is required at least once");
  std::vector<Domain> domains;
  std::map<std::string, std::size_t> by_name;
  for (const auto& spec : f.domains) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--domain expects NAME=TRAIN_IMG,TRAIN_LBL,TEST_IMG,TEST_LBL");
    const std::string name = spec.substr(0, eq);
    std::vector<std::string> files;
    std::stringstream ss(spec.substr(eq + 1));
    for (std::string p; std::getline(ss, p, ',');) files.push_back(p);
    if (files.size() != 4) throw UsageError("--domain " + name + " needs four comma-separated files");
    for (const auto& p : files) man.input(p);
    Domain d;
    d.name = name;
    d.train = dataset_from_tensors(name, load_any(files[0]), load_any(files[1])).resized(cfg.bench.side);
    d.test = dataset_from_tensors(name, load_any(files[2]), load_any(files[3])).resized(cfg.bench.side);
    by_name[name] = domains.size();
    domains.push_back(std::move(d));
  }
  for (const auto& spec : f.derives) {
    const auto eq = spec.find('=');
    const auto colon = spec.find(':', eq == std::string::npos ? 0 : eq);
    if (eq == std::string::npos || colon == std::string::npos) throw UsageError("--derive expects NAME=BASE:SHIFT");
    const std::string name = spec.substr(0, eq);
    const std::string base = spec.substr(eq + 1, colon - eq - 1);
    if (!by_name.contains(base)) throw UsageError("--derive base domain '" + base + "' is not defined");
    const ShiftSpec shift = ShiftSpec::parse(spec.substr(colon + 1));
    const Domain& src = domains[by_name.at(base)];
    Domain d;
    d.name = name;
    d.train = apply_shift(src.train, shift, cfg.seed);
    d.test = apply_shift(src.test, shift, cfg.seed + 1);
    d.train.name = d.test.name = name;
    by_name[name] = domains.size();
    domains.push_back(std::move(d));
  }

  const fs::path dir = out_dir(cfg);
  TransferOptions opts;
  opts.include_in_domain = cfg.bench.include_in_domain;
  opts.holdout = cfg.bench.holdout;
  const std::optional<NeurnConfig> neurn = f.no_neurn ? std::nullopt : std::optional(cfg.neurn);
  TransferReport all;
  for (int s = 0; s < cfg.bench.seeds; ++s) {
    ClassifierConfig c = cfg.bench.classifier;
    c.seed = cfg.seed + static_cast<std::uint64_t>(s);
    const TransferReport r = run_transfer_matrix(domains, c, neurn, opts);
    all.rows.insert(all.rows.end(), r.rows.begin(), r.rows.end());
  }
  write_text(dir / "report.csv", [&](std::ostream& o) { write_transfer_csv(o, all); }, man);
  man.write(dir / "manifest.json");
}

void run_synth_gen(const Flags& f, const RunConfig& cfg, Manifest& man) {
  const fs::path dir = out_dir(cfg);
  if (f.exc + f.inh > 0) {
    const Tensor bank = synth::kernel_bank(f.filters, f.channels, f.kernel_size, cfg.seed);
    const Tensor nbank = synth::neurn_kernel_bank(bank, cfg.neurn);
    synth::PopulationSpec spec;
    spec.excitatory = f.exc;
    spec.inhibitory = f.inh;
    spec.stimuli = f.n_stimuli;
    spec.side = cfg.reps.side;
    if (f.tuned_to != "neurn" && f.tuned_to != "plain") throw UsageError("--tuned-to must be neurn or plain");
    const auto pop = synth::neuron_population(f.tuned_to == "neurn" ? nbank : bank, spec, cfg.seed + 1);
    synth::write_population(dir, bank, nbank, pop);
    man.output(dir / "stimuli.ntf");
    man.output(dir / "kernels.ntf");
    man.output(dir / "kernels_neurn.ntf");
  }
  if (f.digits_train > 0) {
    const auto train = synth::digits(f.digits_train, f.digits_side, cfg.seed + 2, "digits");
    const auto test = synth::digits(std::max(1, f.digits_test), f.digits_side, cfg.seed + 3, "digits");
    save_ntf(images_to_tensor(train), dir / "digits_train_images.ntf");
    save_ntf(labels_to_tensor(train), dir / "digits_train_labels.ntf");
    save_ntf(images_to_tensor(test), dir / "digits_test_images.ntf");
    save_ntf(labels_to_tensor(test), dir / "digits_test_labels.ntf");
    for (const char* n : {"digits_train_images.ntf", "digits_train_labels.ntf", "digits_test_images.ntf",
                          "digits_test_labels.ntf"}) {
      man.output(dir / n);
    }
  }
  man.write(dir / "manifest.json");
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NeuRN normalization and representation-comparison toolkit", "neurn"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--seed", f.seed, "Global seed");
  app.add_option("--config", f.config, "JSON run configuration");
  app.add_option("--out", f.out, "Output file or directory");
  app.add_option("--threads", f.threads, "Worker threads (default: NEURN_THREADS or hardware)");

  using Runner = std::function<void(const Flags&, const RunConfig&, Manifest&)>;
  std::vector<std::pair<CLI::App*, std::pair<std::string, Runner>>> leaves;
  auto group = [&](const std::string& name, const std::string& help) {
    CLI::App* g = app.add_subcommand(name, help);
    g->require_subcommand(1);
    g->fallthrough();
    return g;
  };
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, Runner r) {
    CLI::App* s = parent->add_subcommand(name, help);
    s->fallthrough();
    leaves.push_back({s, {parent->get_name() + " " + name, std::move(r)}});
    return s;
  };

  auto* g_neurn = group("neurn", "NeuRN transform");
  auto* apply = leaf(g_neurn, "apply", "Apply NeuRN to an NTF image or image stack", run_neurn_apply);
  apply->add_option("--input", f.input, "Input NTF")->required();
  apply->add_option("--k", f.k, "Patch size (odd, >= 3)");
  apply->add_option("--padding", f.padding, "replicate | reflect");
  apply->add_option("--epsilon", f.epsilon, "Constant-channel guard");
  apply->add_flag("--batch", f.batch, "Treat a rank-3 input as n single-channel images");

  auto* g_reps = group("reps", "Build representation sets");
  auto* neural = leaf(g_reps, "neural", "Neural representations from traces and stimuli", run_reps_neural);
  neural->add_option("--neurons", f.neurons_dir, "Directory of per-neuron NTF files")->required();
  neural->add_option("--stimuli", f.stimuli, "Stimulus NTF")->required();
  neural->add_option("--side", f.side, "Stimulus resize target");
  neural->add_option("--mode", f.mode, "peak | mean | full");
  auto* feats = leaf(g_reps, "features", "Feature representations from a kernel tensor", run_reps_features);
  feats->add_option("--kernels", f.kernels, "[F, C, H, W] kernel NTF")->required();
  feats->add_option("--model", f.model, "Model name recorded in metadata");
  feats->add_option("--layer", f.layer, "Layer name recorded in metadata");
  feats->add_flag("--neurn-flag", f.neurn_flag, "Mark the kernels as coming from a NeuRN model");

  auto* g_select = group("select", "Representative sampling");
  auto* sample = leaf(g_select, "sample", "Embed, cluster and keep central members", run_select_sample);
  sample->add_option("--reps", f.reps, "Representation set NTF")->required();
  sample->add_option("--k", f.clusters, "Cluster count");
  sample->add_option("--per-cluster", f.per_cluster, "Members kept per cluster");
  sample->add_option("--split-by", f.split_by, "Sample each value of this metadata key separately");

  auto* g_rsa = group("rsa", "RMSE representational similarity");
  auto* compare = leaf(g_rsa, "compare", "Pairwise RMSE plus group summaries", run_rsa_compare);
  compare->add_option("--features", f.features, "Feature representation set")->required();
  compare->add_option("--neurals", f.neurals, "Neural representation set")->required();
  compare->add_option("--side", f.side, "Common resize side");
  compare->add_option("--group-by", f.group_by, "Metadata keys to summarize by");
  compare->add_flag("--no-normalize", f.no_normalize, "Skip per-map min-max scaling");
  auto* scatter = leaf(g_rsa, "scatter", "NeuRN vs plain mean RMSE per group", run_rsa_scatter);
  scatter->add_option("--plain", f.plain, "Plain-model feature set")->required();
  scatter->add_option("--neurn", f.neurn_features, "NeuRN-model feature set")->required();
  scatter->add_option("--neurals", f.neurals, "Neural representation set")->required();
  scatter->add_option("--side", f.side, "Common resize side");
  scatter->add_option("--group-by", f.group_by, "Metadata key(s)")->required();
  scatter->add_flag("--no-normalize", f.no_normalize, "Skip per-map min-max scaling");

  auto* g_kde = group("kde", "Distributional comparison");
  auto* kiou = leaf(g_kde, "iou", "KDE curves per group and their IoU", run_kde_iou);
  kiou->add_option("--a", f.reps_a, "First representation set")->required();
  kiou->add_option("--b", f.reps_b, "Second representation set")->required();
  kiou->add_option("--group-by", f.group_by, "Metadata key")->required();
  kiou->add_option("--group-by-b", f.group_b, "Metadata key for the second set (default: same as --group-by)");
  kiou->add_option("--grid", f.grid, "Grid size");
  kiou->add_option("--bandwidth", f.bandwidth, "Fixed bandwidth (default Silverman)");
  kiou->add_flag("--normalize", f.normalize_maps, "Min-max scale each map before pooling");
  kiou->add_flag("--svg", f.svg, "Write one SVG per curve pair");

  auto* g_bench = group("bench", "Domain generalization harness");
  auto* dom = leaf(g_bench, "domain", "Source -> target transfer matrix", run_bench_domain);
  dom->add_option("--domain", f.domains, "NAME=TRAIN_IMG,TRAIN_LBL,TEST_IMG,TEST_LBL (NTF or IDX)")->required();
  dom->add_option("--derive", f.derives, "NAME=BASE:SHIFT, e.g. shifted=digits:affine:2.0:0.2");
  dom->add_option("--side", f.side, "Common image side");
  dom->add_option("--arch", f.arch, "mlp | softmax");
  dom->add_option("--hidden", f.hidden, "Hidden width for mlp");
  dom->add_option("--epochs", f.epochs, "Maximum epochs");
  dom->add_option("--patience", f.patience, "Early-stopping patience");
  dom->add_option("--batch-size", f.batch_size, "Mini-batch size");
  dom->add_option("--lr", f.lr, "Learning rate");
  dom->add_option("--seeds", f.seeds, "Number of consecutive seeds to run");
  dom->add_flag("--no-neurn", f.no_neurn, "Only run the plain classifier");
  dom->add_flag("--transfer-only", f.transfer_only, "Skip in-domain rows");

  auto* g_synth = group("synth", "Synthetic data");
  auto* gen = leaf(g_synth, "gen", "Synthetic neurons, stimuli, kernel banks and digit domains", run_synth_gen);
  gen->add_option("--excitatory", f.exc, "Excitatory neurons");
  gen->add_option("--inhibitory", f.inh, "Inhibitory neurons");
  gen->add_option("--stimuli", f.n_stimuli, "Stimulus count");
  gen->add_option("--filters", f.filters, "Kernel bank filters");
  gen->add_option("--channels", f.channels, "Kernel bank channels");
  gen->add_option("--kernel-size", f.kernel_size, "Kernel side");
  gen->add_option("--side", f.side, "Stimulus side");
  gen->add_option("--tuned-to", f.tuned_to, "Bank the excitatory prototypes come from: neurn | plain");
  gen->add_option("--digits-train", f.digits_train, "Synthetic digit training images (0 to skip)");
  gen->add_option("--digits-test", f.digits_test, "Synthetic digit test images");
  gen->add_option("--digits-side", f.digits_side, "Synthetic digit side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  try {
    RunConfig cfg = effective_config(f);
    if (cfg.threads > 0) {
      set_thread_count(static_cast<std::size_t>(cfg.threads));
    } else if (const char* env = std::getenv("NEURN_THREADS")) {
      try {
        set_thread_count(static_cast<std::size_t>(std::stoul(env)));
      } catch (const std::logic_error&) {
        throw UsageError(std::string("NEURN_THREADS is not a number: ") + env);
      }
    }
    for (auto& [sub, entry] : leaves) {
      if (!sub->parsed()) continue;
      Manifest man;
      man.command = entry.first;
      man.argv = args;
      man.config = cfg.to_json();
      entry.second(f, cfg, man);
      out << entry.first << ": ok\n";
      return kOk;
    }
    throw UsageError("no subcommand selected");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv = {"neurn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace neurn::cli
