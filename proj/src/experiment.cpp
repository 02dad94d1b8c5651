#include "lca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "lca/analysis.hpp"
#include "lca/errors.hpp"
#include "lca/pipeline.hpp"
#include "lca/report.hpp"

namespace lca::experiment {
namespace {

namespace fs = std::filesystem;

struct Arm {
  std::string name;
  double knob = 0.0;
  std::function<void(config::RunConfig&)> apply;
  bool freeze_at_argmin = false;  // needs the per-seed baseline pilot
};

struct SingleRun {
  std::vector<double> layer_totals;
  double final_loss = 0.0;
  double pct_helped = 0.0;
  bool gate_failed = false;
  std::vector<double> cumulative_target;  // target-layer cumulative series
};

std::string first_layer(const LayerLayout& layout) { return layout.group_name(0); }
std::string last_layer(const LayerLayout& layout) {
  return layout.group_name(layout.group_count() - 1);
}

std::vector<Arm> arms_for(const std::string& preset, const LayerLayout& layout,
                          const optim::OptimConfig& base_optim) {
  std::vector<Arm> arms;
  const auto baseline = Arm{"baseline", 0.0, [](config::RunConfig&) {}, false};
  if (preset == "baseline") {
    arms.push_back(baseline);
  } else if (preset == "freeze-first" || preset == "freeze-last") {
    arms.push_back(baseline);
    const std::string layer =
        preset == "freeze-first" ? first_layer(layout) : last_layer(layout);
    arms.push_back(Arm{preset, 0.0, [layer](config::RunConfig& cfg) {
                         cfg.optimizer.per_layer[layer].frozen = true;
                       }});
  } else if (preset == "freeze-at-argmin") {
    arms.push_back(baseline);
    Arm arm{preset, 0.0, [](config::RunConfig&) {}};
    arm.freeze_at_argmin = true;
    arms.push_back(std::move(arm));
  } else if (preset == "lr10x-last") {
    arms.push_back(baseline);
    const std::string layer = last_layer(layout);
    arms.push_back(Arm{preset, 0.1, [layer](config::RunConfig& cfg) {
                         cfg.optimizer.per_layer[layer].lr_scale = 0.1;
                       }});
  } else if (preset == "delay-sweep") {
    const std::string layer = last_layer(layout);
    for (int d = 0; d <= 9; ++d) {
      const double m = optim::momentum_from_delay(static_cast<double>(d));
      arms.push_back(Arm{"delay-" + std::to_string(d), static_cast<double>(d),
                         [layer, m](config::RunConfig& cfg) {
                           cfg.optimizer.per_layer[layer].momentum_override = m;
                         }});
    }
  } else if (preset == "hyperparam-sweep") {
    arms.push_back(baseline);
    for (const double s : {0.5, 2.0}) {
      arms.push_back(Arm{"lr-x" + std::to_string(s).substr(0, 3), s,
                         [s](config::RunConfig& cfg) { cfg.optimizer.lr *= s; }});
    }
    for (const double m : {0.5, 0.95}) {
      arms.push_back(Arm{"momentum-" + std::to_string(m).substr(0, 4), m,
                         [m](config::RunConfig& cfg) { cfg.optimizer.momentum = m; }});
    }
    const std::size_t base_batch = base_optim.batch_size;
    for (const double s : {0.5, 2.0}) {
      const std::size_t b = std::max<std::size_t>(
          1, static_cast<std::size_t>(static_cast<double>(base_batch) * s));
      arms.push_back(Arm{"batch-" + std::to_string(b), static_cast<double>(b),
                         [b](config::RunConfig& cfg) {
                           cfg.optimizer.batch_size = b;
                         }});
    }
  } else {
    throw ConfigError("unknown experiment preset: " + preset);
  }
  return arms;
}

// One train + integrate + summarize cycle. Big artifacts are removed
// afterwards unless keep is set.
SingleRun run_single(config::RunConfig cfg, const LayerLayout& layout,
                     const std::string& target_layer, bool keep) {
  SingleRun out;
  const auto train_res = pipeline::train(cfg);
  out.final_loss = train_res.final_full_loss;

  if (keep) {
    const auto lca_res = pipeline::lca(cfg);
    out.gate_failed = !lca_res.gate_passed;
    auto an_cfg = cfg;
    an_cfg.analysis = config::AnalysisConfig{};
    an_cfg.analysis.zero_tol = cfg.analysis.zero_tol;
    an_cfg.analysis.oscillations = false;
    an_cfg.analysis.sync = false;
    an_cfg.analysis.specialization = false;
    an_cfg.analysis.fanio = false;
    const auto an = pipeline::analyze(an_cfg);
    out.layer_totals = an.layers.totals;
    out.pct_helped = an.help.overall_pct_helped;
    const engine::LcaMatrix m =
        engine::LcaMatrix::load((fs::path(cfg.out_dir) / pipeline::kLcamFile).string());
    out.cumulative_target.resize(m.iterations, 0.0);
    const std::size_t target = layout.group_by_name(target_layer);
    std::vector<std::size_t> group_of(m.param_count);
    for (std::size_t i = 0; i < m.param_count; ++i) {
      group_of[i] = layout.group_of_index(i);
    }
    double cum = 0.0;
    for (std::size_t t = 0; t < m.iterations; ++t) {
      const double* row = m.values.data() + t * m.param_count;
      for (std::size_t i = 0; i < m.param_count; ++i) {
        if (group_of[i] == target) cum += row[i];
      }
      out.cumulative_target[t] = cum;
    }
    return out;
  }

  // fast path: integrate in memory, then drop the trajectory
  const Dataset data = cfg.dataset.load();
  const MlpLoss model(layout, data);
  const traj::TrajectoryReader reader(train_res.trajectory_path);
  engine::LcaOptions opts;
  opts.tol = cfg.lca.tol;
  opts.max_depth = cfg.lca.max_depth;
  opts.enforce_gate = false;
  const engine::LcaResult res = engine::compute_lca(model, layout, reader, opts);
  out.gate_failed = std::abs(res.matrix.cumulative_error_pct) >= 1.0;

  const auto totals = analysis::layer_totals(res.matrix, layout);
  out.layer_totals = totals.totals;
  const auto help = analysis::helping_stats(res.matrix, layout, cfg.analysis.zero_tol);
  out.pct_helped = help.overall_pct_helped;

  const std::size_t target = layout.group_by_name(target_layer);
  out.cumulative_target.resize(res.matrix.iterations, 0.0);
  std::vector<std::size_t> group_of(res.matrix.param_count);
  for (std::size_t i = 0; i < res.matrix.param_count; ++i) {
    group_of[i] = layout.group_of_index(i);
  }
  double cum = 0.0;
  for (std::size_t t = 0; t < res.matrix.iterations; ++t) {
    const double* row = res.matrix.values.data() + t * res.matrix.param_count;
    for (std::size_t i = 0; i < res.matrix.param_count; ++i) {
      if (group_of[i] == target) cum += row[i];
    }
    out.cumulative_target[t] = cum;
  }
  std::error_code ec;
  fs::remove_all(cfg.out_dir, ec);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

ExperimentResult run_experiment(const config::RunConfig& base,
                                const ExperimentOptions& opts) {
  config::RunConfig tmpl = base;
  tmpl.validate();
  const Dataset probe = tmpl.dataset.load();
  const LayerLayout layout = LayerLayout::dense_stack(tmpl.arch);
  (void)probe;

  // freeze-at-argmin pilots watch the first layer (the layer the freeze
  // targets); freeze/delay presets target per arms_for.
  const std::string target_layer = opts.preset == "delay-sweep"
                                       ? last_layer(layout)
                                       : first_layer(layout);
  const std::vector<Arm> arms = arms_for(opts.preset, layout, tmpl.optimizer);
  fs::create_directories(opts.out_dir);

  ExperimentResult result;
  for (std::size_t g = 0; g < layout.group_count(); ++g) {
    result.layer_names.push_back(layout.group_name(g));
  }

  // per-seed baseline pilot argmins, for freeze-at-argmin
  std::vector<long> argmin_iters(opts.runs, 0);
  for (const Arm& arm : arms) {
    ArmResult ar;
    ar.name = arm.name;
    ar.knob = arm.knob;
    for (std::size_t r = 0; r < opts.runs; ++r) {
      const std::uint64_t seed = opts.base_seed + r;
      config::RunConfig cfg = tmpl;
      cfg.seed = seed;
      cfg.out_dir = (fs::path(opts.out_dir) / arm.name /
                     ("seed" + std::to_string(seed)))
                        .string();
      arm.apply(cfg);
      if (arm.freeze_at_argmin) {
        cfg.optimizer.per_layer[first_layer(layout)].freeze_from_iter =
            argmin_iters[r];
      }
      std::cerr << "experiment " << opts.preset << ": arm " << arm.name
                << " seed " << seed << "\n";
      const SingleRun run =
          run_single(cfg, layout, target_layer, opts.keep_artifacts);
      ar.seeds.push_back(seed);
      ar.layer_totals.push_back(run.layer_totals);
      ar.final_loss.push_back(run.final_loss);
      ar.pct_helped.push_back(run.pct_helped);
      ar.gate_failed.push_back(run.gate_failed);
      if (arm.name == "baseline") {
        const auto it = std::min_element(run.cumulative_target.begin(),
                                         run.cumulative_target.end());
        argmin_iters[r] =
            static_cast<long>(it - run.cumulative_target.begin()) + 1;
      }
    }
    result.arms.push_back(std::move(ar));
  }

  // comparison table
  const std::string csv_path = (fs::path(opts.out_dir) / "comparison.csv").string();
  auto csv = report::open_csv(csv_path, opts.preset, tmpl.config_hash(),
                              {{"runs", std::to_string(opts.runs)},
                               {"tol", report::fmt(tmpl.lca.tol)}});
  csv << "arm,knob,seed,gate_failed,final_loss,pct_helped";
  for (const auto& name : result.layer_names) csv << ",total_" << name;
  csv << "\n";
  nlohmann::json jarms = nlohmann::json::array();
  for (const auto& arm : result.arms) {
    std::vector<double> ok_loss, ok_helped;
    std::vector<std::vector<double>> ok_layer(result.layer_names.size());
    for (std::size_t r = 0; r < arm.seeds.size(); ++r) {
      csv << arm.name << "," << report::fmt(arm.knob) << "," << arm.seeds[r]
          << "," << (arm.gate_failed[r] ? 1 : 0) << ","
          << report::fmt(arm.final_loss[r]) << ","
          << report::fmt(arm.pct_helped[r]);
      for (double v : arm.layer_totals[r]) csv << "," << report::fmt(v);
      csv << "\n";
      if (!arm.gate_failed[r]) {
        ok_loss.push_back(arm.final_loss[r]);
        ok_helped.push_back(arm.pct_helped[r]);
        for (std::size_t l = 0; l < arm.layer_totals[r].size(); ++l) {
          ok_layer[l].push_back(arm.layer_totals[r][l]);
        }
      }
    }
    nlohmann::json jl = nlohmann::json::array();
    for (std::size_t l = 0; l < result.layer_names.size(); ++l) {
      jl.push_back({{"layer", result.layer_names[l]},
                    {"mean", mean_of(ok_layer[l])},
                    {"std", std_of(ok_layer[l])}});
    }
    nlohmann::json ja{{"arm", arm.name},
                      {"knob", arm.knob},
                      {"final_loss_mean", mean_of(ok_loss)},
                      {"final_loss_std", std_of(ok_loss)},
                      {"pct_helped_mean", mean_of(ok_helped)},
                      {"pct_helped_std", std_of(ok_helped)},
                      {"layer_totals", jl},
                      {"gate_failures",
                       std::count(arm.gate_failed.begin(), arm.gate_failed.end(),
                                  true)}};
    // significance across runs when there are enough of them
    if (ok_layer.front().size() >= 3) {
      std::vector<std::vector<double>> per_run(ok_layer.front().size());
      for (std::size_t r = 0; r < per_run.size(); ++r) {
        for (std::size_t l = 0; l < ok_layer.size(); ++l) {
          per_run[r].push_back(ok_layer[l][r]);
        }
      }
      const auto sig = analysis::layer_significance(per_run);
      ja["layer_t_p"] = sig.t_p;
      ja["layer_sign_p"] = sig.sign_p;
    }
    jarms.push_back(std::move(ja));
  }
  const std::string json_path =
      (fs::path(opts.out_dir) / "comparison.json").string();
  std::ofstream jout(json_path, std::ios::trunc);
  jout << nlohmann::json{{"preset", opts.preset},
                         {"layer_names", result.layer_names},
                         {"config_hash", tmpl.config_hash()},
                         {"arms", jarms}}
              .dump(2)
       << "\n";

  // raw per-seed values, one object per arm
  nlohmann::json raw = nlohmann::json::object();
  for (const auto& arm : result.arms) {
    raw[arm.name] = {{"knob", arm.knob},
                     {"seeds", arm.seeds},
                     {"layer_totals", arm.layer_totals},
                     {"final_loss", arm.final_loss},
                     {"pct_helped", arm.pct_helped},
                     {"gate_failed", arm.gate_failed}};
  }
  std::ofstream rout((fs::path(opts.out_dir) / "comparison_raw.json").string(),
                     std::ios::trunc);
  rout << raw.dump(2) << "\n";

  result.comparison_csv = csv_path;
  result.comparison_json = json_path;
  return result;
}

}  // namespace lca::experiment
