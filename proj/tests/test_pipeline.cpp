#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lca/errors.hpp"
#include "lca/experiment.hpp"
#include "lca/nn.hpp"
#include "lca/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace lca;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

config::RunConfig small_run(const TempDir& dir, const std::string& name) {
  config::RunConfig cfg;
  cfg.dataset.kind = config::DatasetConfig::Kind::Synthetic;
  cfg.dataset.generator = config::DatasetConfig::Generator::Clusters;
  cfg.dataset.clusters = {120, 6, 3, 2.0, 4};
  cfg.arch = {6, 10, 3};
  cfg.optimizer.kind = optim::OptimKind::Sgd;
  cfg.optimizer.lr = 0.1;
  cfg.optimizer.momentum = 0.9;
  cfg.optimizer.batch_size = 24;
  cfg.iterations = 40;
  cfg.full_loss_every = 10;
  cfg.lca.per_class = true;
  cfg.lca.grad_signs = true;
  cfg.analysis.sync_trials = 500;
  cfg.out_dir = dir.file(name);
  cfg.seed = 5;
  return cfg;
}

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("train -> lca -> analyze produces a consistent artifact set") {
  TempDir dir;
  const auto cfg = small_run(dir, "run");
  const auto tr = pipeline::train(cfg);
  CHECK(tr.iterations == 40);
  CHECK(fs::exists(tr.trajectory_path));

  // recorded minibatch indices replay to the recorded parameter deltas
  const traj::TrajectoryReader reader(tr.trajectory_path);
  CHECK(reader.iterations() == 40);
  const auto& meta = reader.metadata();
  CHECK(meta.at("sampling") == "without_replacement_epochs");
  const Dataset data = cfg.dataset.load();
  const LayerLayout layout = LayerLayout::dense_stack(cfg.arch);
  {
    // step 0 of a momentum run: delta = -lr * minibatch_grad
    const auto batch0 = meta.at("batch_indices").at(0).get<std::vector<int>>();
    CHECK(batch0.size() == 24);
    const auto theta0 = reader.snapshot(0);
    std::vector<double> grad(layout.param_count());
    nn::full_gradient(layout, theta0, data, grad, batch0);
    const auto d = reader.delta(0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d[i] == doctest::Approx(-cfg.optimizer.lr * grad[i]).epsilon(1e-5));
    }
  }

  const auto lr = pipeline::lca(cfg);
  CHECK(lr.gate_passed);
  CHECK(fs::exists(lr.lcam_path));
  CHECK(fs::exists(dir.file("run/" + std::string(pipeline::kClassTensorFile))));
  CHECK(fs::exists(dir.file("run/" + std::string(pipeline::kGradSignsFile))));

  const auto an = pipeline::analyze(cfg);
  CHECK(fs::exists(an.summary_path));
  CHECK(an.help.iterations == 40);
  CHECK(an.oscillations.has_value());
  CHECK(an.sync.has_value());
  CHECK(an.sync_layers.has_value());

  // summary is valid JSON with the provenance fields
  std::ifstream in(an.summary_path);
  const auto summary = nlohmann::json::parse(in);
  CHECK(summary.at("config_hash") == cfg.config_hash());
  CHECK(summary.contains("layer_totals"));

  // every CSV carries the provenance comment line
  for (const auto& entry : fs::directory_iterator(dir.file("run/analysis"))) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream csv(entry.path());
    std::string first;
    std::getline(csv, first);
    CHECK(first.find("# run_id=") == 0);
    CHECK(first.find("config_hash=") != std::string::npos);
    CHECK(first.find("tol=") != std::string::npos);
  }
}

TEST_CASE("the pipeline is bitwise deterministic on re-run") {
  TempDir dir;
  const auto cfg = small_run(dir, "a");
  pipeline::train(cfg);
  pipeline::lca(cfg);
  const auto traj_1 = slurp(dir.file("a/trajectory.lcat"));
  const auto lcam_1 = slurp(dir.file("a/lca.lcam"));

  pipeline::train(cfg);
  pipeline::lca(cfg);
  CHECK(slurp(dir.file("a/trajectory.lcat")) == traj_1);
  CHECK(slurp(dir.file("a/lca.lcam")) == lcam_1);
}

TEST_CASE("an all-frozen run yields a flat loss curve and an all-zero report") {
  TempDir dir;
  auto cfg = small_run(dir, "frozen");
  cfg.lca.per_class = false;
  cfg.lca.grad_signs = false;
  cfg.optimizer.per_layer["dense0"].frozen = true;
  cfg.optimizer.per_layer["dense1"].frozen = true;
  pipeline::train(cfg);

  const traj::TrajectoryReader reader(dir.file("frozen/trajectory.lcat"));
  CHECK(reader.snapshot_f32(0) == reader.snapshot_f32(40));

  pipeline::lca(cfg);
  const auto an = pipeline::analyze(cfg);
  CHECK(an.help.overall_pct_zero == 100.0);
  for (double v : an.layers.totals) CHECK(v == 0.0);
}

TEST_CASE("K mismatch between config and trajectory is a config error") {
  TempDir dir;
  auto cfg = small_run(dir, "k");
  pipeline::train(cfg);
  auto other = cfg;
  other.arch = {6, 11, 3};
  CHECK_THROWS_AS(pipeline::lca(other, dir.file("k/trajectory.lcat")),
                  ConfigError);
}

TEST_CASE("experiment presets aggregate and reconcile with analyze") {
  TempDir dir;
  auto base = small_run(dir, "expbase");
  base.iterations = 25;
  base.lca.per_class = false;
  base.lca.grad_signs = false;

  experiment::ExperimentOptions opts;
  opts.preset = "freeze-last";
  opts.runs = 3;
  opts.base_seed = 11;
  opts.keep_artifacts = true;
  opts.out_dir = dir.file("exp");

  const auto res = experiment::run_experiment(base, opts);
  REQUIRE(res.arms.size() == 2);
  CHECK(res.arms[0].name == "baseline");
  CHECK(res.arms[1].name == "freeze-last");

  // frozen layer has exactly zero total in every seed
  const std::size_t last = res.layer_names.size() - 1;
  for (const auto& run : res.arms[1].layer_totals) {
    CHECK(run[last] == 0.0);
  }

  // comparison rows reconcile with a fresh analyze on the kept artifacts
  auto cfg0 = base;
  cfg0.seed = 11;
  cfg0.out_dir = dir.file("exp/baseline/seed11");
  const auto an = pipeline::analyze(cfg0);
  for (std::size_t l = 0; l < res.layer_names.size(); ++l) {
    CHECK(res.arms[0].layer_totals[0][l] == an.layers.totals[l]);
  }

  CHECK(fs::exists(res.comparison_csv));
  CHECK(fs::exists(res.comparison_json));
}

TEST_CASE("delay-sweep wires the momentum override into each arm") {
  TempDir dir;
  auto base = small_run(dir, "swbase");
  base.iterations = 8;
  base.lca.per_class = false;
  base.lca.grad_signs = false;

  experiment::ExperimentOptions opts;
  opts.preset = "delay-sweep";
  opts.runs = 1;
  opts.base_seed = 2;
  opts.out_dir = dir.file("sweep");
  const auto res = experiment::run_experiment(base, opts);
  CHECK(res.arms.size() == 10);
  CHECK(res.arms[0].knob == 0.0);
  CHECK(res.arms[9].knob == 9.0);
}

TEST_CASE("numeric blowups finalize a marked partial trajectory") {
  TempDir dir;
  auto cfg = small_run(dir, "boom");
  cfg.lca.per_class = false;
  cfg.optimizer.lr = 1e160;  // second step overflows the forward pass
  CHECK_THROWS_AS(pipeline::train(cfg), NumericError);
  // either a finalized file with a failure marker or a .partial file remains
  const std::string final_path = dir.file("boom/trajectory.lcat");
  if (fs::exists(final_path)) {
    const traj::TrajectoryReader reader(final_path);
    CHECK(reader.metadata().value("finalized", true) == false);
    CHECK(reader.metadata().contains("failure"));
  } else {
    CHECK(fs::exists(final_path + ".partial"));
  }
}
