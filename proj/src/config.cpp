#include "neurn/config.hpp"

#include "neurn/error.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>

namespace neurn {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw UsageError("config section '" + where + "' must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) {
      throw UsageError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

std::string padding_name(Padding p) { return p == Padding::replicate ? "replicate" : "reflect"; }

Padding parse_padding(const std::string& s) {
  if (s == "replicate") return Padding::replicate;
  if (s == "reflect") return Padding::reflect;
  throw UsageError("unknown padding '" + s + "'");
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["out"] = out;
  j["threads"] = threads;
  j["neurn"] = {{"k", neurn.k}, {"padding", padding_name(neurn.padding)}, {"epsilon", neurn.epsilon}};
  j["reps"] = {{"side", reps.side}, {"mode", to_string(reps.mode)}};
  j["embed"] = {{"method", embed.method == EmbedMethod::pca ? "pca" : "none"},
                {"out_dims", embed.out_dims},
                {"n_neighbors", embed.n_neighbors},
                {"min_dist", embed.min_dist},
                {"metric", embed.metric}};
  j["kmeans"] = {{"k", kmeans.k},
                 {"per_cluster", kmeans.per_cluster},
                 {"max_iterations", kmeans.max_iterations},
                 {"tolerance", kmeans.tolerance}};
  j["rsa"] = {{"common_side", rsa.common_side}, {"normalize", rsa.normalize}};
  j["kde"] = {{"grid_size", kde.grid_size}};
  if (kde.bandwidth) {
    j["kde"]["bandwidth"] = *kde.bandwidth;
  } else {
    j["kde"]["bandwidth"] = "auto";
  }
  const auto& c = bench.classifier;
  j["bench"] = {{"side", bench.side},
                {"arch", c.arch == ArchKind::softmax ? "softmax" : "mlp"},
                {"hidden", c.hidden},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_epsilon", c.adam_epsilon},
                {"holdout", bench.holdout},
                {"seeds", bench.seeds},
                {"include_in_domain", bench.include_in_domain}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  try {
    reject_unknown(j, "", {"seed", "out", "threads", "neurn", "reps", "embed", "kmeans", "rsa", "kde", "bench"});
    read(j, "seed", cfg.seed);
    read(j, "out", cfg.out);
    read(j, "threads", cfg.threads);
    if (j.contains("neurn")) {
      const auto& s = j.at("neurn");
      reject_unknown(s, "neurn", {"k", "padding", "epsilon"});
      read(s, "k", cfg.neurn.k);
      if (s.contains("padding")) cfg.neurn.padding = parse_padding(s.at("padding").get<std::string>());
      read(s, "epsilon", cfg.neurn.epsilon);
    }
    if (j.contains("reps")) {
      const auto& s = j.at("reps");
      reject_unknown(s, "reps", {"side", "mode"});
      read(s, "side", cfg.reps.side);
      if (s.contains("mode")) cfg.reps.mode = parse_reduce_mode(s.at("mode").get<std::string>());
    }
    if (j.contains("embed")) {
      const auto& s = j.at("embed");
      reject_unknown(s, "embed", {"method", "out_dims", "n_neighbors", "min_dist", "metric"});
      if (s.contains("method")) {
        const auto m = s.at("method").get<std::string>();
        if (m != "pca" && m != "none") throw UsageError("unknown embed method '" + m + "'");
        cfg.embed.method = m == "pca" ? EmbedMethod::pca : EmbedMethod::none;
      }
      read(s, "out_dims", cfg.embed.out_dims);
      read(s, "n_neighbors", cfg.embed.n_neighbors);
      read(s, "min_dist", cfg.embed.min_dist);
      read(s, "metric", cfg.embed.metric);
      if (cfg.embed.metric != "euclidean") throw UsageError("only the euclidean metric is supported");
    }
    if (j.contains("kmeans")) {
      const auto& s = j.at("kmeans");
      reject_unknown(s, "kmeans", {"k", "per_cluster", "max_iterations", "tolerance"});
      read(s, "k", cfg.kmeans.k);
      read(s, "per_cluster", cfg.kmeans.per_cluster);
      read(s, "max_iterations", cfg.kmeans.max_iterations);
      read(s, "tolerance", cfg.kmeans.tolerance);
    }
    if (j.contains("rsa")) {
      const auto& s = j.at("rsa");
      reject_unknown(s, "rsa", {"common_side", "normalize"});
      read(s, "common_side", cfg.rsa.common_side);
      read(s, "normalize", cfg.rsa.normalize);
    }
    if (j.contains("kde")) {
      const auto& s = j.at("kde");
      reject_unknown(s, "kde", {"grid_size", "bandwidth"});
      read(s, "grid_size", cfg.kde.grid_size);
      if (s.contains("bandwidth")) {
        const auto& b = s.at("bandwidth");
        if (b.is_string()) {
          if (b.get<std::string>() != "auto") throw UsageError("kde.bandwidth must be a number or \"auto\"");
          cfg.kde.bandwidth.reset();
        } else {
          cfg.kde.bandwidth = b.get<double>();
        }
      }
    }
    if (j.contains("bench")) {
      const auto& s = j.at("bench");
      reject_unknown(s, "bench", {"side", "arch", "hidden", "learning_rate", "batch_size", "max_epochs",
                                  "patience", "optimizer", "beta1", "beta2", "adam_epsilon", "holdout",
                                  "seeds", "include_in_domain"});
      auto& c = cfg.bench.classifier;
      read(s, "side", cfg.bench.side);
      if (s.contains("arch")) {
        const auto a = s.at("arch").get<std::string>();
        if (a != "softmax" && a != "mlp") throw UsageError("unknown arch '" + a + "'");
        c.arch = a == "softmax" ? ArchKind::softmax : ArchKind::mlp;
      }
      read(s, "hidden", c.hidden);
      read(s, "learning_rate", c.learning_rate);
      read(s, "batch_size", c.batch_size);
      read(s, "max_epochs", c.max_epochs);
      read(s, "patience", c.patience);
      if (s.contains("optimizer")) {
        const auto o = s.at("optimizer").get<std::string>();
        if (o != "adam" && o != "sgd") throw UsageError("unknown optimizer '" + o + "'");
        c.optimizer = o == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
      }
      read(s, "beta1", c.beta1);
      read(s, "beta2", c.beta2);
      read(s, "adam_epsilon", c.adam_epsilon);
      read(s, "holdout", cfg.bench.holdout);
      read(s, "seeds", cfg.bench.seeds);
      read(s, "include_in_domain", cfg.bench.include_in_domain);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return hex64(fnv1a64(bytes));
}

}  // namespace neurn
