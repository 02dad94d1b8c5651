#ifndef LCA_ANALYSIS_HPP
#define LCA_ANALYSIS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lca/engine.hpp"
#include "lca/layout.hpp"
#include "lca/trajectory.hpp"

namespace lca::analysis {

// ---- helping / hurting -----------------------------------------------------

struct HelpStats {
  std::size_t iterations = 0;
  std::size_t param_count = 0;
  double zero_tol = 0.0;
  std::vector<double> pct_helped;  // per iteration, share of all K params
  std::vector<double> pct_hurt;
  std::vector<double> pct_zero;
  double overall_pct_helped = 0.0;  // pooled over (t,i), zeros excluded
  double overall_pct_zero = 0.0;    // pooled share of exact zeros
  std::vector<double> per_layer_pct_helped;  // pooled per group, zeros excluded
  // Per weight: helped iterations / nonzero-LCA iterations. Weights whose
  // LCA is zero at every iteration are excluded (NaN) and counted.
  std::vector<double> per_weight_help_fraction;
  std::size_t all_zero_weights = 0;
};

HelpStats helping_stats(const engine::LcaMatrix& lca, const LayerLayout& layout,
                        double zero_tol = 0.0);

struct Histogram {
  std::vector<double> edges;          // bins + 1
  std::vector<std::size_t> counts;    // bins
  std::size_t excluded = 0;           // all-zero weights
  double mode_center() const;
};

Histogram help_fraction_histogram(const HelpStats& stats, std::size_t bins = 20);

// ---- per-layer totals and significance --------------------------------------

struct LayerTotals {
  std::vector<std::string> names;
  std::vector<double> totals;  // biases folded into their kernel group
  double grand_total = 0.0;
};

LayerTotals layer_totals(const engine::LcaMatrix& lca, const LayerLayout& layout);

struct SignificanceResult {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> t_p;     // two-sided one-sample Student t against 0
  std::vector<double> sign_p;  // two-sided sign test, reported alongside
};

// per_run_totals: one row per run, one column per layer. Needs >= 3 runs.
SignificanceResult layer_significance(
    const std::vector<std::vector<double>>& per_run_totals);

// ---- oscillations ------------------------------------------------------------

struct OscillationStats {
  // "period" = sign changes per transition opportunity, inverted; exact
  // zeros neither count as a change nor break a streak.
  std::vector<double> weight_turn_period;  // per layer group
  std::vector<double> grad_cross_period;
  double weight_turn_period_overall = 0.0;
  double grad_cross_period_overall = 0.0;
};

OscillationStats oscillation_counts(const traj::TrajectoryReader& traj,
                                    const engine::GradSigns& signs,
                                    const LayerLayout& layout);

// ---- heavy tails --------------------------------------------------------------

struct TailWindow {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t samples = 0;
  bool degenerate = false;  // constant window, statistics undefined
  double excess_kurtosis = 0.0;
  double kurtosis_p = 1.0;  // large-sample kurtosis test against Gaussian
  double tail_mass_ratio = 0.0;
};

std::vector<TailWindow> tail_stats(
    const engine::LcaMatrix& lca,
    const std::vector<std::pair<std::size_t, std::size_t>>& windows,
    double sigma_cutoff = 2.0);

// Pooled-sample helpers (exposed for calibration tests).
double excess_kurtosis(std::span<const double> sample);
TailWindow tail_stats_of_sample(std::span<const double> sample,
                                double sigma_cutoff = 2.0);

// ---- synchronized moments of learning -----------------------------------------

// Strict local minima of the series, most negative first, at most k, returned
// in ascending iteration order.
std::vector<std::size_t> detect_peaks(std::span<const double> series,
                                      std::size_t k = 20);

struct SyncReport {
  std::size_t observed_aligned = 0;
  std::vector<std::size_t> aligned_iterations;
  double baseline_mean = 0.0;
  double p_value = 1.0;
  std::size_t trials = 0;
  double threshold = 1.0;
};

// peak_sets[group][layer] = peak iterations (a "group" is a class, or the
// whole run). An iteration is aligned within a group when at least
// ceil(threshold * layers) of its layers peak there. The baseline shifts
// every layer series independently by a uniform integer in
// [-shift_range, shift_range].
SyncReport alignment_test(
    const std::vector<std::vector<std::vector<std::size_t>>>& peak_sets,
    std::size_t series_length, int shift_range = 2, std::size_t trials = 10000,
    double threshold = 1.0, std::uint64_t seed = 0);

// ---- neuron specialization ------------------------------------------------------

struct SpecializationResult {
  int top_k = 1;
  double threshold = 0.8;
  std::vector<double> fraction_per_layer;  // specialized / counted
  std::vector<std::size_t> counted_per_layer;
  std::vector<std::size_t> excluded_per_layer;  // neurons with zero helped
};

SpecializationResult neuron_specialization(const engine::NeuronClassHelped& helped,
                                           int top_k, double threshold = 0.8);

// ---- fan-in / fan-out correlation ------------------------------------------------

struct FanioLayer {
  std::string name;
  double same_output_mean = 0.0;
  double same_input_mean = 0.0;
  double baseline_mean = 0.0;
  std::size_t skipped_constant = 0;
};

// Mean pairwise Pearson correlation of cumulative-LCA time series within
// fan-out (same output unit) and fan-in (same input) groups of each kernel
// layer, against fake nodes whose members share no input or output.
std::vector<FanioLayer> fanio_correlation(const engine::LcaMatrix& lca,
                                          const LayerLayout& layout,
                                          std::size_t baseline_nodes = 50,
                                          std::uint64_t seed = 1);

}  // namespace lca::analysis

#endif
