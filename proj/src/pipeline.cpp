#include "lca/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lca/errors.hpp"
#include "lca/nn.hpp"
#include "lca/report.hpp"

namespace lca::pipeline {
namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

LayerLayout layout_for(const config::RunConfig& cfg, const Dataset& data) {
  if (cfg.arch.front() != data.feature_dim) {
    throw ConfigError("arch input width " + std::to_string(cfg.arch.front()) +
                      " does not match dataset D=" +
                      std::to_string(data.feature_dim));
  }
  if (cfg.arch.back() != data.num_classes) {
    throw ConfigError("arch output width does not match dataset classes");
  }
  return LayerLayout::dense_stack(cfg.arch);
}

std::uint64_t sampler_seed(std::uint64_t seed) {
  return seed ^ 0x9e3779b97f4a7c15ull;
}

}  // namespace

std::string run_id_of(const config::RunConfig& cfg) {
  return fs::path(cfg.out_dir).filename().string() + "-" +
         cfg.config_hash().substr(0, 8);
}

TrainResult train(const config::RunConfig& cfg) {
  cfg.validate();
  const Dataset data = cfg.dataset.load();
  const LayerLayout layout = layout_for(cfg, data);
  fs::create_directories(cfg.out_dir);

  std::vector<double> theta = nn::init_params(layout, cfg.seed);
  optim::OptimState state = optim::OptimState::init(layout, cfg.optimizer);
  optim::MinibatchSampler sampler(data.num_examples, cfg.optimizer.batch_size,
                                  sampler_seed(cfg.seed));

  const std::string traj_path = join(cfg.out_dir, kTrajectoryFile);
  traj::TrajectoryWriter writer(traj_path, layout.param_count(), cfg.iterations);
  writer.append_snapshot(theta);

  auto log = report::open_csv(join(cfg.out_dir, "train_log.csv"),
                              run_id_of(cfg), cfg.config_hash(),
                              {{"tol", report::fmt(cfg.lca.tol)}});
  log << "iteration,minibatch_loss,full_loss\n";

  nlohmann::json batches = nlohmann::json::array();
  nlohmann::json meta{{"seed", cfg.seed},
                      {"arch", cfg.arch},
                      {"optimizer", cfg.optimizer.to_json()},
                      {"dataset_id", data.id},
                      {"config_hash", cfg.config_hash()},
                      {"sampling", "without_replacement_epochs"},
                      {"finalized", true}};

  std::vector<double> grad(layout.param_count());
  double final_full_loss = 0.0;
  std::size_t done = 0;
  try {
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
      const std::vector<int> batch = sampler.next();
      const double batch_loss =
          nn::full_gradient(layout, theta, data, grad, batch);
      optim::step(layout, theta, state, grad, cfg.optimizer,
                  static_cast<long>(t));
      writer.append_snapshot(theta);
      batches.push_back(batch);
      ++done;

      const bool log_full = cfg.full_loss_every > 0 &&
                            ((t + 1) % cfg.full_loss_every == 0 ||
                             t + 1 == cfg.iterations);
      if (log_full) {
        final_full_loss = nn::forward_loss(layout, theta, data);
        log << t << "," << report::fmt(batch_loss) << ","
            << report::fmt(final_full_loss) << "\n";
      } else {
        log << t << "," << report::fmt(batch_loss) << ",\n";
      }
    }
  } catch (const NumericError& e) {
    meta["finalized"] = false;
    meta["failure"] = std::string(e.what()) + " after " + std::to_string(done) +
                      " iterations";
    meta["batch_indices"] = std::move(batches);
    if (writer.snapshots_written() >= 2) writer.finalize(meta);
    throw;
  }
  meta["batch_indices"] = std::move(batches);
  writer.finalize(meta);

  return TrainResult{traj_path, final_full_loss, done};
}

LcaRunResult lca(const config::RunConfig& cfg, const std::string& trajectory_path) {
  cfg.validate();
  const std::string traj_path = trajectory_path.empty()
                                    ? join(cfg.out_dir, kTrajectoryFile)
                                    : trajectory_path;
  const traj::TrajectoryReader reader(traj_path);
  if (reader.metadata().value("finalized", true) == false) {
    std::cerr << "note: trajectory carries a failure marker; integrating the "
                 "recorded prefix\n";
  }
  const Dataset data = cfg.dataset.load();
  const LayerLayout layout = layout_for(cfg, data);
  if (reader.param_count() != layout.param_count()) {
    throw ConfigError("trajectory K does not match config arch");
  }
  fs::create_directories(cfg.out_dir);

  const MlpLoss model(layout, data);
  engine::LcaOptions opts;
  opts.tol = cfg.lca.tol;
  opts.max_depth = cfg.lca.max_depth;
  opts.first_order = cfg.lca.first_order;
  opts.per_class = cfg.lca.per_class;
  opts.aggregate = cfg.lca.aggregate == "none" ? engine::ClassAggregate::None
                                               : engine::ClassAggregate::Layer;
  opts.record_grad_signs = cfg.lca.grad_signs;
  opts.enforce_gate = false;
  if (reader.iterations() >= 200) {
    const std::size_t tick = reader.iterations() / 10;
    opts.progress = [tick](std::size_t t, std::size_t total) {
      if (t % tick == 0 || t == total) {
        std::cerr << "lca: " << t << "/" << total << " iterations\n";
      }
    };
  }

  const engine::LcaResult result = engine::compute_lca(model, layout, reader, opts);

  LcaRunResult out;
  out.lcam_path = join(cfg.out_dir, kLcamFile);
  result.matrix.save(out.lcam_path, layout);
  if (result.per_class) {
    result.per_class->save_json(join(cfg.out_dir, kClassTensorFile));
  }
  if (result.neuron_helped) {
    result.neuron_helped->save_json(join(cfg.out_dir, kNeuronHelpedFile));
  }
  if (result.grad_signs) {
    result.grad_signs->save(join(cfg.out_dir, kGradSignsFile));
  }

  out.cumulative_error_pct = result.matrix.cumulative_error_pct;
  out.depth_histogram.assign(
      static_cast<std::size_t>(cfg.lca.max_depth) + 1, 0);
  nlohmann::json flagged = nlohmann::json::array();
  for (std::size_t t = 0; t < result.matrix.iterations; ++t) {
    ++out.depth_histogram[result.matrix.depth[t]];
    if (result.matrix.flagged(t)) {
      ++out.flagged_iterations;
      flagged.push_back(
          {{"iteration", t}, {"epsilon", result.matrix.iter_error[t]}});
    }
  }
  out.gate_passed = std::abs(out.cumulative_error_pct) < 1.0;

  nlohmann::json err_report{{"cumulative_error_pct", out.cumulative_error_pct},
                            {"total_allocated", result.matrix.total_allocated},
                            {"loss_change", result.matrix.loss_change},
                            {"tol", cfg.lca.tol},
                            {"first_order", cfg.lca.first_order},
                            {"flagged", flagged},
                            {"depth_histogram", out.depth_histogram},
                            {"gate_passed", out.gate_passed},
                            {"config_hash", cfg.config_hash()}};
  std::ofstream rep(join(cfg.out_dir, "lca_error_report.json"), std::ios::trunc);
  rep << err_report.dump(2) << "\n";
  return out;
}

AnalyzeResult analyze(const config::RunConfig& cfg, const std::string& lcam_path,
                      const std::string& trajectory_path) {
  cfg.validate();
  const std::string lcam = lcam_path.empty() ? join(cfg.out_dir, kLcamFile)
                                             : lcam_path;
  const std::string traj_path = trajectory_path.empty()
                                    ? join(cfg.out_dir, kTrajectoryFile)
                                    : trajectory_path;
  const engine::LcaMatrix matrix = engine::LcaMatrix::load(lcam);
  const LayerLayout layout = engine::LcaMatrix::load_layout(lcam);

  const std::string run_id = run_id_of(cfg);
  const std::string hash = cfg.config_hash();
  const std::map<std::string, std::string> settings{
      {"tol", report::fmt(cfg.lca.tol)},
      {"zero_tol", report::fmt(cfg.analysis.zero_tol)}};
  const std::string adir = join(cfg.out_dir, "analysis");
  fs::create_directories(adir);

  AnalyzeResult out;
  nlohmann::json summary{{"run_id", run_id}, {"config_hash", hash}};
  nlohmann::json skipped = nlohmann::json::array();

  const std::size_t groups = layout.group_count();
  const std::size_t k = matrix.param_count;
  const std::size_t t_count = matrix.iterations;

  // instantaneous per-layer series, reused by several passes
  std::vector<std::vector<double>> layer_series(groups,
                                                std::vector<double>(t_count));
  {
    std::vector<std::size_t> group_of(k);
    for (std::size_t i = 0; i < k; ++i) group_of[i] = layout.group_of_index(i);
    for (std::size_t t = 0; t < t_count; ++t) {
      const double* row = matrix.values.data() + t * k;
      for (std::size_t i = 0; i < k; ++i) {
        layer_series[group_of[i]][t] += row[i];
      }
    }
    auto csv = report::open_csv(join(adir, "layer_series.csv"), run_id, hash,
                                settings);
    csv << "iteration";
    for (std::size_t g = 0; g < groups; ++g) csv << "," << layout.group_name(g);
    csv << "\n";
    for (std::size_t t = 0; t < t_count; ++t) {
      csv << t;
      for (std::size_t g = 0; g < groups; ++g) {
        csv << "," << report::fmt(layer_series[g][t]);
      }
      csv << "\n";
    }
  }

  if (cfg.analysis.help) {
    out.help = analysis::helping_stats(matrix, layout, cfg.analysis.zero_tol);
    auto csv = report::open_csv(join(adir, "help_per_iteration.csv"), run_id,
                                hash, settings);
    csv << "iteration,pct_helped,pct_hurt,pct_zero\n";
    for (std::size_t t = 0; t < t_count; ++t) {
      csv << t << "," << report::fmt(out.help.pct_helped[t]) << ","
          << report::fmt(out.help.pct_hurt[t]) << ","
          << report::fmt(out.help.pct_zero[t]) << "\n";
    }
    const analysis::Histogram hist =
        analysis::help_fraction_histogram(out.help, cfg.analysis.histogram_bins);
    auto hcsv = report::open_csv(join(adir, "help_fraction_histogram.csv"),
                                 run_id, hash, settings);
    hcsv << "bin_low,bin_high,count\n";
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
      hcsv << report::fmt(hist.edges[b]) << "," << report::fmt(hist.edges[b + 1])
           << "," << hist.counts[b] << "\n";
    }
    summary["help"] = {{"overall_pct_helped", out.help.overall_pct_helped},
                       {"overall_pct_zero", out.help.overall_pct_zero},
                       {"per_layer_pct_helped", out.help.per_layer_pct_helped},
                       {"all_zero_weights", out.help.all_zero_weights},
                       {"help_fraction_mode", hist.mode_center()}};
  }

  if (cfg.analysis.layers) {
    out.layers = analysis::layer_totals(matrix, layout);
    auto csv =
        report::open_csv(join(adir, "layer_totals.csv"), run_id, hash, settings);
    csv << "layer,total_lca\n";
    for (std::size_t g = 0; g < groups; ++g) {
      csv << out.layers.names[g] << "," << report::fmt(out.layers.totals[g])
          << "\n";
    }
    summary["layer_totals"] = {{"names", out.layers.names},
                               {"totals", out.layers.totals},
                               {"grand_total", out.layers.grand_total}};
  }

  if (cfg.analysis.oscillations) {
    const std::string signs_path = join(cfg.out_dir, kGradSignsFile);
    if (fs::exists(signs_path) && fs::exists(traj_path)) {
      const traj::TrajectoryReader reader(traj_path);
      if (reader.param_count() != k || reader.iterations() != t_count) {
        throw ConfigError("trajectory does not match the LCA matrix (K/T)");
      }
      const engine::GradSigns signs = engine::GradSigns::load(signs_path);
      out.oscillations = analysis::oscillation_counts(reader, signs, layout);
      auto csv = report::open_csv(join(adir, "oscillations.csv"), run_id, hash,
                                  settings);
      csv << "layer,weight_turn_period,grad_cross_period\n";
      for (std::size_t g = 0; g < groups; ++g) {
        csv << layout.group_name(g) << ","
            << report::fmt(out.oscillations->weight_turn_period[g]) << ","
            << report::fmt(out.oscillations->grad_cross_period[g]) << "\n";
      }
      summary["oscillations"] = {
          {"weight_turn_period_overall",
           out.oscillations->weight_turn_period_overall},
          {"grad_cross_period_overall",
           out.oscillations->grad_cross_period_overall}};
    } else {
      skipped.push_back("oscillations: no gradient-sign artifact recorded");
    }
  }

  if (cfg.analysis.tails) {
    std::vector<std::pair<std::size_t, std::size_t>> windows{{0, t_count}};
    for (std::size_t q = 0; q < 4 && t_count >= 8; ++q) {
      windows.push_back({q * t_count / 4, (q + 1) * t_count / 4});
    }
    const auto tails =
        analysis::tail_stats(matrix, windows, cfg.analysis.sigma_cutoff);
    auto csv = report::open_csv(join(adir, "tails.csv"), run_id, hash, settings);
    csv << "begin,end,samples,excess_kurtosis,kurtosis_p,tail_mass_ratio,"
           "degenerate\n";
    for (const auto& w : tails) {
      csv << w.begin << "," << w.end << "," << w.samples << ","
          << report::fmt(w.excess_kurtosis) << "," << report::fmt(w.kurtosis_p)
          << "," << report::fmt(w.tail_mass_ratio) << "," << w.degenerate
          << "\n";
    }
    summary["tails"] = {{"excess_kurtosis", tails.front().excess_kurtosis},
                        {"kurtosis_p", tails.front().kurtosis_p},
                        {"tail_mass_ratio", tails.front().tail_mass_ratio}};
  }

  if (cfg.analysis.sync) {
    // aggregate (per-layer) alignment
    std::vector<std::vector<std::vector<std::size_t>>> sets(1);
    for (std::size_t g = 0; g < groups; ++g) {
      sets[0].push_back(
          analysis::detect_peaks(layer_series[g], cfg.analysis.top_k_peaks));
    }
    out.sync_layers = analysis::alignment_test(
        sets, t_count, cfg.analysis.shift_range, cfg.analysis.sync_trials,
        cfg.analysis.sync_threshold, cfg.analysis.seed);
    summary["sync_layers"] = {
        {"observed", out.sync_layers->observed_aligned},
        {"baseline_mean", out.sync_layers->baseline_mean},
        {"p_value", out.sync_layers->p_value}};

    const std::string tensor_path = join(cfg.out_dir, kClassTensorFile);
    if (fs::exists(tensor_path)) {
      const engine::ClassLcaTensor tensor =
          engine::ClassLcaTensor::load_json(tensor_path);
      if (tensor.aggregate == engine::ClassAggregate::Layer &&
          tensor.iterations == t_count) {
        std::vector<std::vector<std::vector<std::size_t>>> class_sets(
            tensor.classes);
        std::vector<double> series(t_count);
        for (std::size_t c = 0; c < tensor.classes; ++c) {
          for (std::size_t g = 0; g < tensor.columns; ++g) {
            for (std::size_t t = 0; t < t_count; ++t) {
              series[t] = tensor.at(c, t, g);
            }
            class_sets[c].push_back(
                analysis::detect_peaks(series, cfg.analysis.top_k_peaks));
          }
        }
        out.sync = analysis::alignment_test(
            class_sets, t_count, cfg.analysis.shift_range,
            cfg.analysis.sync_trials, cfg.analysis.sync_threshold,
            cfg.analysis.seed + 1);
        summary["sync_per_class"] = {{"observed", out.sync->observed_aligned},
                                     {"baseline_mean", out.sync->baseline_mean},
                                     {"p_value", out.sync->p_value}};
      }
    } else {
      skipped.push_back("sync_per_class: no per-class tensor recorded");
    }
  }

  if (cfg.analysis.specialization) {
    const std::string helped_path = join(cfg.out_dir, kNeuronHelpedFile);
    if (fs::exists(helped_path)) {
      const engine::NeuronClassHelped helped =
          engine::NeuronClassHelped::load_json(helped_path);
      auto csv = report::open_csv(join(adir, "specialization.csv"), run_id, hash,
                                  settings);
      csv << "top_k,layer,fraction,counted,excluded\n";
      nlohmann::json spec = nlohmann::json::array();
      for (int top_k = 1; top_k <= 3; ++top_k) {
        const auto res = analysis::neuron_specialization(
            helped, top_k, cfg.analysis.specialization_threshold);
        for (std::size_t l = 0; l < res.fraction_per_layer.size(); ++l) {
          csv << top_k << "," << layout.group_name(l) << ","
              << report::fmt(res.fraction_per_layer[l]) << ","
              << res.counted_per_layer[l] << "," << res.excluded_per_layer[l]
              << "\n";
        }
        spec.push_back({{"top_k", top_k},
                        {"fraction_per_layer", res.fraction_per_layer}});
      }
      summary["specialization"] = spec;
    } else {
      skipped.push_back("specialization: no per-class neuron artifact recorded");
    }
  }

  if (cfg.analysis.fanio) {
    const auto fanio = analysis::fanio_correlation(
        matrix, layout, cfg.analysis.fanio_baseline_nodes, cfg.analysis.seed);
    auto csv = report::open_csv(join(adir, "fanio.csv"), run_id, hash, settings);
    csv << "layer,same_output_mean,same_input_mean,baseline_mean,"
           "skipped_constant\n";
    nlohmann::json jf = nlohmann::json::array();
    for (const auto& l : fanio) {
      csv << l.name << "," << report::fmt(l.same_output_mean) << ","
          << report::fmt(l.same_input_mean) << ","
          << report::fmt(l.baseline_mean) << "," << l.skipped_constant << "\n";
      jf.push_back({{"layer", l.name},
                    {"same_output_mean", l.same_output_mean},
                    {"same_input_mean", l.same_input_mean},
                    {"baseline_mean", l.baseline_mean}});
    }
    summary["fanio"] = jf;
  }

  for (const auto& s : skipped) std::cerr << "analyze: skipped " << s << "\n";
  summary["skipped"] = skipped;
  summary["cumulative_error_pct"] = matrix.cumulative_error_pct;

  out.summary_path = join(adir, "summary.json");
  std::ofstream sum(out.summary_path, std::ios::trunc);
  sum << summary.dump(2) << "\n";
  if (!sum) throw Error("cannot write " + out.summary_path);
  return out;
}

}  // namespace lca::pipeline
