#include "lca/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lca/crc64.hpp"
#include "lca/errors.hpp"
#include "lca/idx.hpp"

namespace lca::config {
namespace {

void reject_unknown(const nlohmann::json& j, const char* where,
                    std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
  }
}

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  const char* root = std::getenv("LCA_DATA_ROOT");
  if (root == nullptr || *root == '\0') return path;
  return (std::filesystem::path(root) / path).string();
}

}  // namespace

Dataset DatasetConfig::load() const {
  if (kind == Kind::MnistIdx) {
    return io::load_mnist_idx(resolve_data_path(images), resolve_data_path(labels),
                              subset_size, subset_seed);
  }
  if (generator == Generator::Digits) {
    return synth::gen_digits_corpus(digits_examples, digits_seed);
  }
  return synth::gen_synthetic(clusters);
}

void RunConfig::validate() const {
  if (arch.size() < 2) throw ConfigError("arch needs at least [input, output]");
  if (iterations == 0) throw ConfigError("iterations must be positive");
  if (lca.tol <= 0.0) throw ConfigError("lca.tol must be positive");
  if (lca.max_depth < 0 || lca.max_depth > 12) {
    throw ConfigError("lca.max_depth must be in [0, 12]");
  }
  if (lca.aggregate != "layer" && lca.aggregate != "none") {
    throw ConfigError("lca.aggregate must be \"layer\" or \"none\"");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must be set");
  const LayerLayout layout = LayerLayout::dense_stack(arch);
  optimizer.validate(layout);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json jd;
  if (dataset.kind == DatasetConfig::Kind::MnistIdx) {
    jd["kind"] = "mnist_idx";
    jd["images"] = dataset.images;
    jd["labels"] = dataset.labels;
    if (dataset.subset_size) jd["subset_size"] = *dataset.subset_size;
    jd["subset_seed"] = dataset.subset_seed;
  } else {
    jd["kind"] = "synthetic";
    if (dataset.generator == DatasetConfig::Generator::Digits) {
      jd["generator"] = "digits";
      jd["num_examples"] = dataset.digits_examples;
      jd["seed"] = dataset.digits_seed;
    } else {
      jd["generator"] = "clusters";
      jd["num_examples"] = dataset.clusters.num_examples;
      jd["feature_dim"] = dataset.clusters.feature_dim;
      jd["num_classes"] = dataset.clusters.num_classes;
      jd["separation"] = dataset.clusters.separation;
      jd["seed"] = dataset.clusters.seed;
    }
  }
  return {{"dataset", jd},
          {"arch", arch},
          {"optimizer", optimizer.to_json()},
          {"iterations", iterations},
          {"full_loss_every", full_loss_every},
          {"lca",
           {{"tol", lca.tol},
            {"max_depth", lca.max_depth},
            {"first_order", lca.first_order},
            {"per_class", lca.per_class},
            {"aggregate", lca.aggregate},
            {"grad_signs", lca.grad_signs}}},
          {"analysis",
           {{"zero_tol", analysis.zero_tol},
            {"histogram_bins", analysis.histogram_bins},
            {"top_k_peaks", analysis.top_k_peaks},
            {"shift_range", analysis.shift_range},
            {"sync_trials", analysis.sync_trials},
            {"sync_threshold", analysis.sync_threshold},
            {"sigma_cutoff", analysis.sigma_cutoff},
            {"specialization_top_k", analysis.specialization_top_k},
            {"specialization_threshold", analysis.specialization_threshold},
            {"fanio_baseline_nodes", analysis.fanio_baseline_nodes},
            {"seed", analysis.seed},
            {"help", analysis.help},
            {"layers", analysis.layers},
            {"oscillations", analysis.oscillations},
            {"tails", analysis.tails},
            {"sync", analysis.sync},
            {"specialization", analysis.specialization},
            {"fanio", analysis.fanio}}},
          {"out_dir", out_dir},
          {"seed", seed}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, "config",
                 {"dataset", "arch", "optimizer", "iterations", "full_loss_every",
                  "lca", "analysis", "out_dir", "seed"});
  RunConfig cfg;
  if (j.contains("dataset")) {
    const auto& jd = j.at("dataset");
    const std::string kind = jd.value("kind", "synthetic");
    if (kind == "mnist_idx") {
      reject_unknown(jd, "dataset",
                     {"kind", "images", "labels", "subset_size", "subset_seed"});
      cfg.dataset.kind = DatasetConfig::Kind::MnistIdx;
      cfg.dataset.images = jd.at("images").get<std::string>();
      cfg.dataset.labels = jd.at("labels").get<std::string>();
      if (jd.contains("subset_size")) {
        cfg.dataset.subset_size = jd.at("subset_size").get<std::size_t>();
      }
      cfg.dataset.subset_seed = jd.value("subset_seed", std::uint64_t{0});
    } else if (kind == "synthetic") {
      reject_unknown(jd, "dataset",
                     {"kind", "generator", "num_examples", "feature_dim",
                      "num_classes", "separation", "seed"});
      cfg.dataset.kind = DatasetConfig::Kind::Synthetic;
      const std::string gen = jd.value("generator", "clusters");
      if (gen == "digits") {
        cfg.dataset.generator = DatasetConfig::Generator::Digits;
        cfg.dataset.digits_examples =
            jd.value("num_examples", cfg.dataset.digits_examples);
        cfg.dataset.digits_seed = jd.value("seed", std::uint64_t{0});
      } else if (gen == "clusters") {
        cfg.dataset.generator = DatasetConfig::Generator::Clusters;
        cfg.dataset.clusters.num_examples =
            jd.value("num_examples", cfg.dataset.clusters.num_examples);
        cfg.dataset.clusters.feature_dim =
            jd.value("feature_dim", cfg.dataset.clusters.feature_dim);
        cfg.dataset.clusters.num_classes =
            jd.value("num_classes", cfg.dataset.clusters.num_classes);
        cfg.dataset.clusters.separation =
            jd.value("separation", cfg.dataset.clusters.separation);
        cfg.dataset.clusters.seed = jd.value("seed", std::uint64_t{0});
      } else {
        throw ConfigError("unknown synthetic generator: " + gen);
      }
    } else {
      throw ConfigError("dataset.kind must be mnist_idx or synthetic");
    }
  }
  cfg.arch = j.value("arch", std::vector<std::size_t>{});
  if (j.contains("optimizer")) {
    reject_unknown(j.at("optimizer"), "optimizer",
                   {"kind", "lr", "momentum", "adam_beta1", "adam_beta2",
                    "adam_eps", "batch_size", "per_layer"});
    if (j.at("optimizer").contains("per_layer")) {
      for (const auto& [name, ov] : j.at("optimizer").at("per_layer").items()) {
        reject_unknown(ov, ("optimizer.per_layer." + name).c_str(),
                       {"lr_scale", "frozen", "freeze_from_iter",
                        "momentum_override"});
      }
    }
    cfg.optimizer = optim::OptimConfig::from_json(j.at("optimizer"));
  }
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.full_loss_every = j.value("full_loss_every", cfg.full_loss_every);
  if (j.contains("lca")) {
    const auto& jl = j.at("lca");
    reject_unknown(jl, "lca",
                   {"tol", "max_depth", "first_order", "per_class", "aggregate",
                    "grad_signs"});
    cfg.lca.tol = jl.value("tol", cfg.lca.tol);
    cfg.lca.max_depth = jl.value("max_depth", cfg.lca.max_depth);
    cfg.lca.first_order = jl.value("first_order", cfg.lca.first_order);
    cfg.lca.per_class = jl.value("per_class", cfg.lca.per_class);
    cfg.lca.aggregate = jl.value("aggregate", cfg.lca.aggregate);
    cfg.lca.grad_signs = jl.value("grad_signs", cfg.lca.grad_signs);
  }
  if (j.contains("analysis")) {
    const auto& ja = j.at("analysis");
    reject_unknown(ja, "analysis",
                   {"zero_tol", "histogram_bins", "top_k_peaks", "shift_range",
                    "sync_trials", "sync_threshold", "sigma_cutoff",
                    "specialization_top_k", "specialization_threshold",
                    "fanio_baseline_nodes", "seed", "help", "layers",
                    "oscillations", "tails", "sync", "specialization", "fanio"});
    auto& a = cfg.analysis;
    a.zero_tol = ja.value("zero_tol", a.zero_tol);
    a.histogram_bins = ja.value("histogram_bins", a.histogram_bins);
    a.top_k_peaks = ja.value("top_k_peaks", a.top_k_peaks);
    a.shift_range = ja.value("shift_range", a.shift_range);
    a.sync_trials = ja.value("sync_trials", a.sync_trials);
    a.sync_threshold = ja.value("sync_threshold", a.sync_threshold);
    a.sigma_cutoff = ja.value("sigma_cutoff", a.sigma_cutoff);
    a.specialization_top_k = ja.value("specialization_top_k", a.specialization_top_k);
    a.specialization_threshold =
        ja.value("specialization_threshold", a.specialization_threshold);
    a.fanio_baseline_nodes = ja.value("fanio_baseline_nodes", a.fanio_baseline_nodes);
    a.seed = ja.value("seed", a.seed);
    a.help = ja.value("help", a.help);
    a.layers = ja.value("layers", a.layers);
    a.oscillations = ja.value("oscillations", a.oscillations);
    a.tails = ja.value("tails", a.tails);
    a.sync = ja.value("sync", a.sync);
    a.specialization = ja.value("specialization", a.specialization);
    a.fanio = ja.value("fanio", a.fanio);
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

std::string RunConfig::config_hash() const {
  const std::string canon = to_json().dump();
  const std::uint64_t h = crc64(canon.data(), canon.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace lca::config
