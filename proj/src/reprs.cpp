#include "neurn/reprs.hpp"

#include "neurn/error.hpp"
#include "neurn/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace neurn {

namespace {
const char* const kRequiredNeuronKeys[] = {"neuron_id", "cell_class", "genotype", "region"};
}

StimulusSet StimulusSet::from_tensor(const Tensor& t, int side) {
  if (side <= 0) throw UsageError("stimulus side must be positive");
  const auto planes = planes_from_tensor(t);
  StimulusSet s;
  s.side = side;
  s.flattened.resize(static_cast<Eigen::Index>(planes.size()), side * side);
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const Plane& p = planes[i];
    if (p.minCoeff() < 0.0 || p.maxCoeff() > 1.0) {
      throw DataError("stimulus " + std::to_string(i) + " has values outside [0, 1]");
    }
    const Plane r = (p.rows() == side && p.cols() == side) ? p : resize_bilinear(p, side, side);
    s.flattened.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(r.data(), r.size());
  }
  return s;
}

std::string to_string(CellClass c) {
  return c == CellClass::excitatory ? "excitatory" : "inhibitory";
}

CellClass parse_cell_class(const std::string& s) {
  if (s == "excitatory") return CellClass::excitatory;
  if (s == "inhibitory") return CellClass::inhibitory;
  throw DataError("unknown cell class '" + s + "'");
}

std::string to_string(ReduceMode m) {
  switch (m) {
    case ReduceMode::peak: return "peak";
    case ReduceMode::mean: return "mean";
    case ReduceMode::full: return "full";
  }
  return "?";
}

ReduceMode parse_reduce_mode(const std::string& s) {
  if (s == "peak") return ReduceMode::peak;
  if (s == "mean") return ReduceMode::mean;
  if (s == "full") return ReduceMode::full;
  throw UsageError("unknown reduction mode '" + s + "' (expected peak, mean or full)");
}

// ---- RepresentationSet ----------------------------------------------------

void RepresentationSet::validate() const {
  if (maps.size() != meta.size()) {
    throw DataError("representation set has " + std::to_string(maps.size()) + " maps but " +
                    std::to_string(meta.size()) + " metadata records");
  }
  for (const auto& m : maps) {
    if (m.rows() != maps.front().rows() || m.cols() != maps.front().cols()) {
      throw DataError("representation maps differ in size");
    }
  }
}

void RepresentationSet::append(const RepresentationSet& other) {
  maps.insert(maps.end(), other.maps.begin(), other.maps.end());
  meta.insert(meta.end(), other.meta.begin(), other.meta.end());
  for (const auto& [k, v] : other.notes) notes[k] = v;
}

RepresentationSet RepresentationSet::subset(const std::vector<std::size_t>& indices) const {
  RepresentationSet out;
  out.notes = notes;
  for (auto i : indices) {
    out.maps.push_back(maps.at(i));
    out.meta.push_back(meta.at(i));
  }
  return out;
}

Eigen::MatrixXd RepresentationSet::as_rows() const {
  validate();
  if (maps.empty()) return {};
  const auto dim = maps.front().size();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(maps.size()), dim);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(maps[i].data(), dim);
  }
  return rows;
}

// ---- Neural representations -----------------------------------------------

RepresentationSet build_neural_rep(const TrialTraces& traces, const StimulusSet& stimuli,
                                   ReduceMode mode) {
  if (traces.traces.rows() != stimuli.count()) {
    throw UsageError("neuron " + traces.neuron_id + " has " +
                     std::to_string(traces.traces.rows()) + " trials but the stimulus set has " +
                     std::to_string(stimuli.count()));
  }
  if (traces.traces.cols() == 0) throw UsageError("neuron " + traces.neuron_id + " has empty traces");

  Eigen::MatrixXd weights;  // [count, m]
  switch (mode) {
    case ReduceMode::peak: weights = traces.traces.rowwise().maxCoeff(); break;
    case ReduceMode::mean: weights = traces.traces.rowwise().mean(); break;
    case ReduceMode::full: weights = traces.traces; break;
  }
  const Eigen::MatrixXd product = weights.transpose() * stimuli.flattened;

  RepresentationSet out;
  const Meta base = {{"kind", "neural"},
                     {"neuron_id", traces.neuron_id},
                     {"cell_class", to_string(traces.cell_class)},
                     {"genotype", traces.genotype},
                     {"region", traces.region},
                     {"mode", to_string(mode)}};
  for (Eigen::Index r = 0; r < product.rows(); ++r) {
    const Eigen::RowVectorXd row = product.row(r);
    out.maps.push_back(Eigen::Map<const Plane>(row.data(), stimuli.side, stimuli.side));
    Meta m = base;
    if (mode == ReduceMode::full) m["trace_index"] = std::to_string(r);
    out.meta.push_back(std::move(m));
  }
  return out;
}

RepresentationSet build_neural_reps(const std::vector<TrialTraces>& neurons,
                                    const StimulusSet& stimuli, ReduceMode mode) {
  std::vector<RepresentationSet> parts(neurons.size());
  parallel_for(neurons.size(),
               [&](std::size_t i) { parts[i] = build_neural_rep(neurons[i], stimuli, mode); });
  RepresentationSet out;
  for (const auto& p : parts) out.append(p);
  return out;
}

// ---- Feature representations ----------------------------------------------

RepresentationSet extract_feature_reps(const Tensor& kernels, const ArtificialMeta& meta) {
  if (kernels.rank() != 4) {
    throw UsageError("kernel tensor must have rank 4 [F, C, H, W], got rank " +
                     std::to_string(kernels.rank()));
  }
  const auto f = kernels.shape[0], c = kernels.shape[1];
  const auto h = kernels.shape[2], w = kernels.shape[3];
  RepresentationSet out;
  out.maps.reserve(f * c);
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double* src = kernels.data.data() + (fi * c + ci) * h * w;
      out.maps.push_back(Eigen::Map<const Plane>(src, Eigen::Index(h), Eigen::Index(w)));
      out.meta.push_back({{"kind", "artificial"},
                          {"model", meta.model},
                          {"layer", meta.layer},
                          {"filter", std::to_string(fi)},
                          {"channel", std::to_string(ci)},
                          {"neurn", meta.neurn ? "true" : "false"}});
    }
  }
  return out;
}

// ---- Neuron files ---------------------------------------------------------

TrialTraces traces_from_tensor(const Tensor& t, const std::string& source) {
  for (const char* key : kRequiredNeuronKeys) {
    if (!t.meta.contains(key)) {
      throw DataError(source + ": missing required meta key '" + key + "'");
    }
  }
  if (t.rank() != 2) {
    throw DataError(source + ": trial traces must be [count, trace_len], got rank " +
                    std::to_string(t.rank()));
  }
  TrialTraces tr;
  tr.neuron_id = t.meta.at("neuron_id");
  try {
    tr.cell_class = parse_cell_class(t.meta.at("cell_class"));
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
  tr.genotype = t.meta.at("genotype");
  tr.region = t.meta.at("region");
  tr.traces = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data.data(), Eigen::Index(t.shape[0]), Eigen::Index(t.shape[1]));
  return tr;
}

Tensor traces_to_tensor(const TrialTraces& tr) {
  Tensor t;
  t.shape = {static_cast<std::size_t>(tr.traces.rows()), static_cast<std::size_t>(tr.traces.cols())};
  t.data.resize(shape_product(t.shape));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data.data(), tr.traces.rows(), tr.traces.cols()) = tr.traces;
  t.meta = {{"neuron_id", tr.neuron_id},
            {"cell_class", to_string(tr.cell_class)},
            {"genotype", tr.genotype},
            {"region", tr.region}};
  t.validate();
  return t;
}

std::vector<TrialTraces> ingest_neuron_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ntf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TrialTraces> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(traces_from_tensor(load_ntf(f), f.string()));
  std::stable_sort(out.begin(), out.end(),
                   [](const TrialTraces& a, const TrialTraces& b) { return a.neuron_id < b.neuron_id; });
  return out;
}

// ---- On-disk sets ---------------------------------------------------------

std::filesystem::path sidecar_path(const std::filesystem::path& ntf) {
  return std::filesystem::path(ntf.string() + ".meta.json");
}

void save_rep_set(const RepresentationSet& reps, const std::filesystem::path& path) {
  reps.validate();
  save_ntf(tensor_from_planes(reps.maps, {{"content", "representation_set"}}), path);
  nlohmann::json side;
  side["notes"] = reps.notes;
  side["maps"] = reps.meta;
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw DataError("cannot write " + sidecar_path(path).string());
  out << side.dump(1) << '\n';
}

RepresentationSet load_rep_set(const std::filesystem::path& path) {
  RepresentationSet reps;
  reps.maps = planes_from_tensor(load_ntf(path));
  const auto side_file = sidecar_path(path);
  std::ifstream in(side_file);
  if (!in) throw DataError(side_file.string() + ": metadata sidecar not found");
  try {
    const auto side = nlohmann::json::parse(in);
    reps.meta = side.at("maps").get<std::vector<Meta>>();
    if (side.contains("notes")) reps.notes = side.at("notes").get<Meta>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(side_file.string() + ": malformed sidecar (" + e.what() + ")");
  }
  if (reps.meta.size() != reps.maps.size()) {
    throw DataError(side_file.string() + ": sidecar lists " + std::to_string(reps.meta.size()) +
                    " records but " + path.string() + " holds " +
                    std::to_string(reps.maps.size()) + " maps");
  }
  return reps;
}

}  // namespace neurn
