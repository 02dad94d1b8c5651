// Command-line entry point: train / lca / analyze / experiment / export.
// Exit codes: 0 success, 2 LCA gate breach, 3 numeric failure, 4 bad
// config or input file.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lca/engine.hpp"
#include "lca/errors.hpp"
#include "lca/experiment.hpp"
#include "lca/pipeline.hpp"
#include "lca/report.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // dotted.path=json-value
  std::string out_dir;
  long long seed = -1;
  long long iterations = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "run config JSON file");
  cmd->add_option("--set", args.overrides,
                  "override a config field, e.g. --set lca.tol=0.0005");
  cmd->add_option("--out-dir", args.out_dir, "run output directory");
  cmd->add_option("--seed", args.seed, "run seed");
  cmd->add_option("--iterations", args.iterations, "optimizer steps");
}

json load_config_json(const CommonArgs& args) {
  json j = json::object();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw lca::ConfigError("cannot open config " + args.config_path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw lca::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  for (const std::string& ov : args.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      throw lca::ConfigError("--set expects path=value, got: " + ov);
    }
    std::string pointer = "/" + ov.substr(0, eq);
    for (auto& ch : pointer) {
      if (ch == '.') ch = '/';
    }
    json value;
    try {
      value = json::parse(ov.substr(eq + 1));
    } catch (const json::exception&) {
      value = ov.substr(eq + 1);  // bare strings allowed
    }
    j[json::json_pointer(pointer)] = value;
  }
  if (!args.out_dir.empty()) j["out_dir"] = args.out_dir;
  if (args.seed >= 0) j["seed"] = args.seed;
  if (args.iterations >= 0) j["iterations"] = args.iterations;
  return j;
}

lca::config::RunConfig resolve_config(const CommonArgs& args) {
  return lca::config::RunConfig::from_json(load_config_json(args));
}

int cmd_export(const std::string& lcam, const std::string& what,
               std::size_t begin, long long end_opt, const std::string& layer,
               const std::string& out_path) {
  const lca::engine::LcaMatrix m = lca::engine::LcaMatrix::load(lcam);
  const lca::LayerLayout layout = lca::engine::LcaMatrix::load_layout(lcam);
  const std::size_t end =
      end_opt < 0 ? m.iterations
                  : std::min<std::size_t>(m.iterations,
                                          static_cast<std::size_t>(end_opt));
  if (begin >= end) throw lca::ConfigError("empty iteration range");

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw lca::Error("cannot open " + out_path);

  if (what == "frames") {
    std::size_t lo = 0, hi = m.param_count;
    if (!layer.empty()) {
      const std::size_t g = layout.group_by_name(layer);
      lo = m.param_count;
      hi = 0;
      for (const auto& e : layout.entries()) {
        if (e.group != g) continue;
        lo = std::min(lo, e.offset);
        hi = std::max(hi, e.offset + e.size());
      }
    }
    out << "iteration,index,lca\n";
    for (std::size_t t = begin; t < end; ++t) {
      const auto row = m.row(t);
      for (std::size_t i = lo; i < hi; ++i) {
        out << t << "," << i << "," << lca::report::fmt(row[i]) << "\n";
      }
    }
  } else if (what == "layer-series" || what == "cumulative-layer") {
    const std::size_t groups = layout.group_count();
    std::vector<std::size_t> group_of(m.param_count);
    for (std::size_t i = 0; i < m.param_count; ++i) {
      group_of[i] = layout.group_of_index(i);
    }
    out << "iteration";
    for (std::size_t g = 0; g < groups; ++g) out << "," << layout.group_name(g);
    out << "\n";
    std::vector<double> acc(groups, 0.0);
    for (std::size_t t = 0; t < end; ++t) {
      std::vector<double> inst(groups, 0.0);
      const auto row = m.row(t);
      for (std::size_t i = 0; i < m.param_count; ++i) {
        inst[group_of[i]] += row[i];
      }
      for (std::size_t g = 0; g < groups; ++g) acc[g] += inst[g];
      if (t < begin) continue;
      out << t;
      const auto& vals = what == "layer-series" ? inst : acc;
      for (std::size_t g = 0; g < groups; ++g) {
        out << "," << lca::report::fmt(vals[g]);
      }
      out << "\n";
    }
  } else if (what == "loss") {
    out << "iteration,loss\n";
    for (std::size_t t = 0; t < m.loss.size(); ++t) {
      out << t << "," << lca::report::fmt(m.loss[t]) << "\n";
    }
  } else {
    throw lca::ConfigError("unknown export kind: " + what);
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loss change allocation toolkit"};
  app.require_subcommand(1);

  CommonArgs targs, largs, aargs, eargs;
  std::string traj_path, lcam_path;

  CLI::App* train = app.add_subcommand("train", "train and record a trajectory");
  add_common(train, targs);

  CLI::App* lca_cmd =
      app.add_subcommand("lca", "integrate a trajectory into an LCA matrix");
  add_common(lca_cmd, largs);
  lca_cmd->add_option("--trajectory", traj_path, "trajectory file (LCAT)");

  CLI::App* analyze = app.add_subcommand("analyze", "statistics and reports");
  add_common(analyze, aargs);
  analyze->add_option("--lcam", lcam_path, "LCA matrix file");
  analyze->add_option("--trajectory", traj_path, "trajectory file (LCAT)");

  CLI::App* experiment =
      app.add_subcommand("experiment", "orchestrated multi-run study");
  add_common(experiment, eargs);
  std::string preset = "baseline", exp_dir = "experiments/exp";
  std::size_t runs = 5;
  std::uint64_t base_seed = 1;
  bool keep = false;
  experiment->add_option("--preset", preset, "one of: baseline, freeze-first, "
                                             "freeze-last, freeze-at-argmin, "
                                             "lr10x-last, delay-sweep, "
                                             "hyperparam-sweep");
  experiment->add_option("--runs", runs, "seeds per arm");
  experiment->add_option("--base-seed", base_seed, "first seed");
  experiment->add_option("--exp-dir", exp_dir, "experiment output directory");
  experiment->add_flag("--keep-artifacts", keep, "keep per-run artifacts");

  CLI::App* exp_cmd = app.add_subcommand("export", "dump numeric data as CSV");
  std::string what = "layer-series", layer, out_path = "export.csv";
  std::size_t begin = 0;
  long long end = -1;
  exp_cmd->add_option("--lcam", lcam_path, "LCA matrix file")->required();
  exp_cmd->add_option("--what", what, "frames | layer-series | cumulative-layer | loss");
  exp_cmd->add_option("--begin", begin, "first iteration");
  exp_cmd->add_option("--end", end, "one past the last iteration");
  exp_cmd->add_option("--layer", layer, "restrict frames to one layer");
  exp_cmd->add_option("-o,--out", out_path, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto cfg = resolve_config(targs);
      const auto res = lca::pipeline::train(cfg);
      std::cout << "recorded " << res.trajectory_path << " (" << res.iterations
                << " iterations, final full loss " << res.final_full_loss
                << ")\n";
      return 0;
    }
    if (lca_cmd->parsed()) {
      const auto cfg = resolve_config(largs);
      const auto res = lca::pipeline::lca(cfg, traj_path);
      std::cout << "wrote " << res.lcam_path << "\n"
                << "cumulative error: " << res.cumulative_error_pct << "%\n"
                << "flagged iterations: " << res.flagged_iterations << "\n"
                << "depth histogram:";
      for (std::size_t d = 0; d < res.depth_histogram.size(); ++d) {
        if (res.depth_histogram[d] > 0) {
          std::cout << " depth" << d << "=" << res.depth_histogram[d];
        }
      }
      std::cout << "\n";
      if (!res.gate_passed) {
        std::cerr << "error: cumulative error breaches the 1% gate\n";
        return 2;
      }
      return 0;
    }
    if (analyze->parsed()) {
      const auto cfg = resolve_config(aargs);
      const auto res = lca::pipeline::analyze(cfg, lcam_path, traj_path);
      std::cout << "wrote " << res.summary_path << "\n";
      return 0;
    }
    if (experiment->parsed()) {
      const auto cfg = resolve_config(eargs);
      lca::experiment::ExperimentOptions opts;
      opts.preset = preset;
      opts.runs = runs;
      opts.base_seed = base_seed;
      opts.keep_artifacts = keep;
      opts.out_dir = exp_dir;
      const auto res = lca::experiment::run_experiment(cfg, opts);
      std::cout << "wrote " << res.comparison_csv << "\n";
      return 0;
    }
    if (exp_cmd->parsed()) {
      return cmd_export(lcam_path, what, begin, end, layer, out_path);
    }
  } catch (const lca::GateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lca::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lca::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const lca::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const lca::IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
