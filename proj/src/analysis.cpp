#include "lca/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "lca/errors.hpp"

namespace lca::analysis {

HelpStats helping_stats(const engine::LcaMatrix& lca, const LayerLayout& layout,
                        double zero_tol) {
  const std::size_t t_count = lca.iterations;
  const std::size_t k = lca.param_count;
  HelpStats st;
  st.iterations = t_count;
  st.param_count = k;
  st.zero_tol = zero_tol;
  st.pct_helped.resize(t_count);
  st.pct_hurt.resize(t_count);
  st.pct_zero.resize(t_count);

  std::vector<std::size_t> helped_per_weight(k, 0), nonzero_per_weight(k, 0);
  const std::size_t groups = layout.group_count();
  std::vector<std::size_t> layer_helped(groups, 0), layer_nonzero(groups, 0);
  std::vector<std::size_t> group_of(k);
  for (std::size_t i = 0; i < k; ++i) group_of[i] = layout.group_of_index(i);

  std::size_t pooled_helped = 0, pooled_nonzero = 0, pooled_zero = 0;
  for (std::size_t t = 0; t < t_count; ++t) {
    const double* row = lca.values.data() + t * k;
    std::size_t helped = 0, hurt = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double a = row[i];
      if (a < -zero_tol) {
        ++helped;
        ++helped_per_weight[i];
        ++nonzero_per_weight[i];
        ++layer_helped[group_of[i]];
        ++layer_nonzero[group_of[i]];
      } else if (a > zero_tol) {
        ++hurt;
        ++nonzero_per_weight[i];
        ++layer_nonzero[group_of[i]];
      }
    }
    const std::size_t zero = k - helped - hurt;
    st.pct_helped[t] = 100.0 * static_cast<double>(helped) / static_cast<double>(k);
    st.pct_hurt[t] = 100.0 * static_cast<double>(hurt) / static_cast<double>(k);
    st.pct_zero[t] = 100.0 * static_cast<double>(zero) / static_cast<double>(k);
    pooled_helped += helped;
    pooled_nonzero += helped + hurt;
    pooled_zero += zero;
  }

  st.overall_pct_helped =
      pooled_nonzero == 0 ? 0.0
                          : 100.0 * static_cast<double>(pooled_helped) /
                                static_cast<double>(pooled_nonzero);
  st.overall_pct_zero = t_count == 0 ? 0.0
                                     : 100.0 * static_cast<double>(pooled_zero) /
                                           static_cast<double>(t_count * k);
  st.per_layer_pct_helped.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    st.per_layer_pct_helped[g] =
        layer_nonzero[g] == 0 ? 0.0
                              : 100.0 * static_cast<double>(layer_helped[g]) /
                                    static_cast<double>(layer_nonzero[g]);
  }
  st.per_weight_help_fraction.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (nonzero_per_weight[i] == 0) {
      st.per_weight_help_fraction[i] = std::numeric_limits<double>::quiet_NaN();
      ++st.all_zero_weights;
    } else {
      st.per_weight_help_fraction[i] =
          static_cast<double>(helped_per_weight[i]) /
          static_cast<double>(nonzero_per_weight[i]);
    }
  }
  return st;
}

double Histogram::mode_center() const {
  std::size_t best = 0;
  for (std::size_t b = 1; b < counts.size(); ++b) {
    if (counts[b] > counts[best]) best = b;
  }
  return 0.5 * (edges[best] + edges[best + 1]);
}

Histogram help_fraction_histogram(const HelpStats& stats, std::size_t bins) {
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
  }
  h.counts.assign(bins, 0);
  h.excluded = 0;
  for (double f : stats.per_weight_help_fraction) {
    if (std::isnan(f)) {
      ++h.excluded;
      continue;
    }
    std::size_t b = static_cast<std::size_t>(f * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

LayerTotals layer_totals(const engine::LcaMatrix& lca, const LayerLayout& layout) {
  const std::size_t groups = layout.group_count();
  LayerTotals lt;
  lt.totals.assign(groups, 0.0);
  for (std::size_t g = 0; g < groups; ++g) lt.names.push_back(layout.group_name(g));
  const std::size_t k = lca.param_count;
  std::vector<std::size_t> group_of(k);
  for (std::size_t i = 0; i < k; ++i) group_of[i] = layout.group_of_index(i);
  for (std::size_t t = 0; t < lca.iterations; ++t) {
    const double* row = lca.values.data() + t * k;
    for (std::size_t i = 0; i < k; ++i) lt.totals[group_of[i]] += row[i];
  }
  for (double v : lt.totals) lt.grand_total += v;
  return lt;
}

SignificanceResult layer_significance(
    const std::vector<std::vector<double>>& per_run_totals) {
  const std::size_t runs = per_run_totals.size();
  if (runs < 3) throw ConfigError("layer significance needs at least 3 runs");
  const std::size_t layers = per_run_totals.front().size();
  for (const auto& row : per_run_totals) {
    if (row.size() != layers) {
      throw std::invalid_argument("ragged per-run layer totals");
    }
  }
  SignificanceResult res;
  res.mean.resize(layers);
  res.stddev.resize(layers);
  res.t_p.resize(layers);
  res.sign_p.resize(layers);

  const boost::math::students_t t_dist(static_cast<double>(runs - 1));
  for (std::size_t l = 0; l < layers; ++l) {
    double mean = 0.0;
    for (std::size_t r = 0; r < runs; ++r) mean += per_run_totals[r][l];
    mean /= static_cast<double>(runs);
    double var = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      const double d = per_run_totals[r][l] - mean;
      var += d * d;
    }
    var /= static_cast<double>(runs - 1);
    const double sd = std::sqrt(var);
    res.mean[l] = mean;
    res.stddev[l] = sd;

    if (sd == 0.0) {
      res.t_p[l] = mean == 0.0 ? 1.0 : 0.0;
    } else {
      const double t = mean / (sd / std::sqrt(static_cast<double>(runs)));
      res.t_p[l] = 2.0 * boost::math::cdf(t_dist, -std::abs(t));
    }

    std::size_t positive = 0, nonzero = 0;
    for (std::size_t r = 0; r < runs; ++r) {
      const double v = per_run_totals[r][l];
      if (v > 0.0) ++positive;
      if (v != 0.0) ++nonzero;
    }
    if (nonzero == 0) {
      res.sign_p[l] = 1.0;
    } else {
      const boost::math::binomial bin(static_cast<double>(nonzero), 0.5);
      const std::size_t smaller = std::min(positive, nonzero - positive);
      res.sign_p[l] = std::min(
          1.0, 2.0 * boost::math::cdf(bin, static_cast<double>(smaller)));
    }
  }
  return res;
}

namespace {

struct SignWalk {
  std::vector<std::int8_t> last;      // last nonzero sign, 0 = none yet
  std::vector<std::uint32_t> changes;

  explicit SignWalk(std::size_t k) : last(k, 0), changes(k, 0) {}

  void feed(std::size_t i, std::int8_t s) {
    if (s == 0) return;  // exact zeros neither count nor break the streak
    if (last[i] != 0 && s != last[i]) ++changes[i];
    last[i] = s;
  }
};

double period_from(std::uint64_t changes, std::uint64_t opportunities) {
  if (changes == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(opportunities) / static_cast<double>(changes);
}

}  // namespace

OscillationStats oscillation_counts(const traj::TrajectoryReader& traj,
                                    const engine::GradSigns& signs,
                                    const LayerLayout& layout) {
  const std::size_t k = traj.param_count();
  const std::size_t t_count = traj.iterations();
  if (signs.cols != k || signs.rows != t_count + 1) {
    throw std::invalid_argument("gradient sign matrix does not match trajectory");
  }
  if (t_count < 3) throw std::invalid_argument("trajectory too short");

  SignWalk weight_walk(k), grad_walk(k);
  std::vector<float> prev = traj.snapshot_f32(0), cur;
  for (std::size_t t = 0; t < t_count; ++t) {
    cur = traj.snapshot_f32(t + 1);
    for (std::size_t i = 0; i < k; ++i) {
      const double d = static_cast<double>(cur[i]) - static_cast<double>(prev[i]);
      weight_walk.feed(i, d > 0.0 ? 1 : (d < 0.0 ? -1 : 0));
    }
    std::swap(prev, cur);
  }
  for (std::size_t t = 0; t <= t_count; ++t) {
    const std::int8_t* row = signs.signs.data() + t * k;
    for (std::size_t i = 0; i < k; ++i) grad_walk.feed(i, row[i]);
  }

  const std::size_t groups = layout.group_count();
  OscillationStats st;
  st.weight_turn_period.resize(groups);
  st.grad_cross_period.resize(groups);
  std::vector<std::uint64_t> wchg(groups, 0), gchg(groups, 0), count(groups, 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t g = layout.group_of_index(i);
    wchg[g] += weight_walk.changes[i];
    gchg[g] += grad_walk.changes[i];
    ++count[g];
  }
  std::uint64_t wtotal = 0, gtotal = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    st.weight_turn_period[g] = period_from(wchg[g], count[g] * (t_count - 1));
    st.grad_cross_period[g] = period_from(gchg[g], count[g] * t_count);
    wtotal += wchg[g];
    gtotal += gchg[g];
  }
  st.weight_turn_period_overall = period_from(wtotal, k * (t_count - 1));
  st.grad_cross_period_overall = period_from(gtotal, k * t_count);
  return st;
}

double excess_kurtosis(std::span<const double> sample) {
  const std::size_t n = sample.size();
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : sample) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return m4 / (m2 * m2) - 3.0;
}

TailWindow tail_stats_of_sample(std::span<const double> sample,
                                double sigma_cutoff) {
  TailWindow w;
  w.samples = sample.size();
  const std::size_t n = sample.size();
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double v : sample) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 == 0.0) {
    w.degenerate = true;
    return w;
  }
  w.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  const double z = w.excess_kurtosis / std::sqrt(24.0 / static_cast<double>(n));
  w.kurtosis_p = std::erfc(std::abs(z) / std::sqrt(2.0));

  const double sigma = std::sqrt(m2);
  const double cut = sigma_cutoff * sigma;
  double observed = 0.0;
  for (double v : sample) {
    const double d = std::abs(v - mean);
    if (d > cut) observed += d;
  }
  // Gaussian expectation of sum |X - mu| over the same tail:
  // n * sigma * 2 * phi(c) with phi the standard normal density.
  const double phi_c = std::exp(-0.5 * sigma_cutoff * sigma_cutoff) /
                       std::sqrt(2.0 * M_PI);
  const double expected = static_cast<double>(n) * sigma * 2.0 * phi_c;
  w.tail_mass_ratio = expected == 0.0 ? 0.0 : observed / expected;
  return w;
}

std::vector<TailWindow> tail_stats(
    const engine::LcaMatrix& lca,
    const std::vector<std::pair<std::size_t, std::size_t>>& windows,
    double sigma_cutoff) {
  if (windows.empty()) throw std::invalid_argument("tail_stats needs windows");
  std::vector<TailWindow> out;
  for (const auto& [begin, end] : windows) {
    if (begin >= end || end > lca.iterations) {
      throw std::invalid_argument("bad tail window");
    }
    const std::span<const double> flat{
        lca.values.data() + begin * lca.param_count,
        (end - begin) * lca.param_count};
    TailWindow w = tail_stats_of_sample(flat, sigma_cutoff);
    w.begin = begin;
    w.end = end;
    out.push_back(w);
  }
  return out;
}

std::vector<std::size_t> detect_peaks(std::span<const double> series,
                                      std::size_t k) {
  if (series.size() < 3) throw std::invalid_argument("series too short");
  std::vector<std::size_t> minima;
  for (std::size_t t = 1; t + 1 < series.size(); ++t) {
    if (series[t] < series[t - 1] && series[t] < series[t + 1]) {
      minima.push_back(t);
    }
  }
  std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) {
    if (series[a] != series[b]) return series[a] < series[b];
    return a < b;
  });
  if (minima.size() > k) minima.resize(k);
  std::sort(minima.begin(), minima.end());
  return minima;
}

namespace {

std::size_t count_aligned(
    const std::vector<std::vector<std::vector<std::size_t>>>& peak_sets,
    std::size_t series_length, double threshold,
    std::vector<std::size_t>* aligned_out) {
  std::size_t total = 0;
  std::vector<int> hits(series_length);
  for (const auto& layers : peak_sets) {
    std::fill(hits.begin(), hits.end(), 0);
    const std::size_t need = static_cast<std::size_t>(
        std::ceil(threshold * static_cast<double>(layers.size()) - 1e-12));
    for (const auto& peaks : layers) {
      for (std::size_t t : peaks) {
        if (t < series_length) ++hits[t];
      }
    }
    for (std::size_t t = 0; t < series_length; ++t) {
      if (static_cast<std::size_t>(hits[t]) >= need && hits[t] > 0) {
        ++total;
        if (aligned_out) aligned_out->push_back(t);
      }
    }
  }
  return total;
}

}  // namespace

SyncReport alignment_test(
    const std::vector<std::vector<std::vector<std::size_t>>>& peak_sets,
    std::size_t series_length, int shift_range, std::size_t trials,
    double threshold, std::uint64_t seed) {
  if (peak_sets.empty()) throw std::invalid_argument("no peak sets");
  for (const auto& layers : peak_sets) {
    if (layers.size() < 2) {
      throw std::invalid_argument("alignment needs at least 2 layers");
    }
  }
  SyncReport report;
  report.trials = trials;
  report.threshold = threshold;
  report.observed_aligned = count_aligned(peak_sets, series_length, threshold,
                                          &report.aligned_iterations);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(-shift_range, shift_range);
  auto shifted = peak_sets;
  std::size_t at_least = 0;
  double baseline_sum = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (std::size_t g = 0; g < peak_sets.size(); ++g) {
      for (std::size_t l = 0; l < peak_sets[g].size(); ++l) {
        const int d = shift(rng);
        auto& dst = shifted[g][l];
        dst.clear();
        for (std::size_t t : peak_sets[g][l]) {
          const long long moved = static_cast<long long>(t) + d;
          if (moved >= 0 && moved < static_cast<long long>(series_length)) {
            dst.push_back(static_cast<std::size_t>(moved));
          }
        }
      }
    }
    const std::size_t count =
        count_aligned(shifted, series_length, threshold, nullptr);
    baseline_sum += static_cast<double>(count);
    if (count >= report.observed_aligned) ++at_least;
  }
  report.baseline_mean = baseline_sum / static_cast<double>(trials);
  report.p_value = static_cast<double>(1 + at_least) /
                   static_cast<double>(1 + trials);
  return report;
}

SpecializationResult neuron_specialization(const engine::NeuronClassHelped& helped,
                                           int top_k, double threshold) {
  if (top_k < 1 || top_k > 3) throw std::invalid_argument("top_k must be 1..3");
  const std::size_t layers = helped.neuron_base.size() - 1;
  SpecializationResult res;
  res.top_k = top_k;
  res.threshold = threshold;
  res.fraction_per_layer.assign(layers, 0.0);
  res.counted_per_layer.assign(layers, 0);
  res.excluded_per_layer.assign(layers, 0);

  std::vector<double> amounts(helped.classes);
  for (std::size_t layer = 0; layer < layers; ++layer) {
    std::size_t specialized = 0;
    for (std::size_t n = helped.neuron_base[layer];
         n < helped.neuron_base[layer + 1]; ++n) {
      double total = 0.0;
      for (std::size_t c = 0; c < helped.classes; ++c) {
        amounts[c] = helped.at(c, n);
        total += amounts[c];
      }
      if (total <= 0.0) {
        ++res.excluded_per_layer[layer];
        continue;
      }
      std::sort(amounts.begin(), amounts.end(), std::greater<>());
      double top = 0.0;
      for (int j = 0; j < top_k && j < static_cast<int>(amounts.size()); ++j) {
        top += amounts[static_cast<std::size_t>(j)];
      }
      ++res.counted_per_layer[layer];
      if (top / total > threshold) ++specialized;
    }
    res.fraction_per_layer[layer] =
        res.counted_per_layer[layer] == 0
            ? 0.0
            : static_cast<double>(specialized) /
                  static_cast<double>(res.counted_per_layer[layer]);
  }
  return res;
}

namespace {

// Mean pairwise correlation of standardized series via group sums:
// mean = (sum_t S(t)^2 - n*T) / (n*(n-1)*T) for n standardized members.
struct GroupAccum {
  double sum_sq = 0.0;  // sum over t of (sum_i z_i(t))^2
  std::size_t members = 0;

  double mean_corr(std::size_t t_count) const {
    if (members < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(members);
    const double t = static_cast<double>(t_count);
    return (sum_sq - n * t) / (n * (n - 1.0) * t);
  }
};

}  // namespace

std::vector<FanioLayer> fanio_correlation(const engine::LcaMatrix& lca,
                                          const LayerLayout& layout,
                                          std::size_t baseline_nodes,
                                          std::uint64_t seed) {
  const std::size_t t_count = lca.iterations;
  const std::size_t k = lca.param_count;
  std::vector<FanioLayer> out;

  for (const auto& e : layout.entries()) {
    if (e.kind != ParamKind::DenseKernel) continue;
    const std::size_t rows = e.rows, cols = e.cols, sz = e.size();

    // per-parameter mean/std of the cumulative series
    std::vector<double> cum(sz, 0.0), mean(sz, 0.0), sq(sz, 0.0);
    for (std::size_t t = 0; t < t_count; ++t) {
      const double* row = lca.values.data() + t * k + e.offset;
      for (std::size_t i = 0; i < sz; ++i) {
        cum[i] += row[i];
        mean[i] += cum[i];
        sq[i] += cum[i] * cum[i];
      }
    }
    std::vector<double> inv_std(sz, 0.0);
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < sz; ++i) {
      mean[i] /= static_cast<double>(t_count);
      const double var = sq[i] / static_cast<double>(t_count) - mean[i] * mean[i];
      if (var > 0.0) {
        inv_std[i] = 1.0 / std::sqrt(var);
      } else {
        ++skipped;  // constant trajectory, excluded from every group
      }
    }

    // fake nodes: same size as the smaller fan, no shared row or column
    const std::size_t fake_size = std::min(rows, cols);
    std::mt19937_64 rng(seed + e.offset);
    std::vector<std::vector<std::size_t>> fake_members(baseline_nodes);
    std::vector<std::size_t> rperm(rows), cperm(cols);
    for (auto& node : fake_members) {
      for (std::size_t r = 0; r < rows; ++r) rperm[r] = r;
      for (std::size_t c = 0; c < cols; ++c) cperm[c] = c;
      std::shuffle(rperm.begin(), rperm.end(), rng);
      std::shuffle(cperm.begin(), cperm.end(), rng);
      for (std::size_t m = 0; m < fake_size; ++m) {
        node.push_back(rperm[m] * cols + cperm[m]);
      }
    }

    std::vector<GroupAccum> out_groups(cols), in_groups(rows),
        fake_groups(baseline_nodes);
    for (std::size_t i = 0; i < sz; ++i) {
      if (inv_std[i] == 0.0) continue;
      ++out_groups[i % cols].members;
      ++in_groups[i / cols].members;
    }
    for (std::size_t f = 0; f < baseline_nodes; ++f) {
      for (std::size_t m : fake_members[f]) {
        if (inv_std[m] != 0.0) ++fake_groups[f].members;
      }
    }

    std::vector<double> z(sz), col_sum(cols), row_sum(rows);
    std::fill(cum.begin(), cum.end(), 0.0);
    for (std::size_t t = 0; t < t_count; ++t) {
      const double* row = lca.values.data() + t * k + e.offset;
      std::fill(col_sum.begin(), col_sum.end(), 0.0);
      std::fill(row_sum.begin(), row_sum.end(), 0.0);
      for (std::size_t i = 0; i < sz; ++i) {
        cum[i] += row[i];
        const double zi = inv_std[i] == 0.0 ? 0.0 : (cum[i] - mean[i]) * inv_std[i];
        z[i] = zi;
        col_sum[i % cols] += zi;
        row_sum[i / cols] += zi;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        out_groups[c].sum_sq += col_sum[c] * col_sum[c];
      }
      for (std::size_t r = 0; r < rows; ++r) {
        in_groups[r].sum_sq += row_sum[r] * row_sum[r];
      }
      for (std::size_t f = 0; f < baseline_nodes; ++f) {
        double s = 0.0;
        for (std::size_t m : fake_members[f]) s += z[m];
        fake_groups[f].sum_sq += s * s;
      }
    }

    auto mean_of = [&](const std::vector<GroupAccum>& groups) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& g : groups) {
        const double c = g.mean_corr(t_count);
        if (!std::isnan(c)) {
          sum += c;
          ++n;
        }
      }
      return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : sum / static_cast<double>(n);
    };

    FanioLayer layer;
    layer.name = e.name;
    layer.same_output_mean = mean_of(out_groups);
    layer.same_input_mean = mean_of(in_groups);
    layer.baseline_mean = mean_of(fake_groups);
    layer.skipped_constant = skipped;
    out.push_back(std::move(layer));
  }
  return out;
}

}  // namespace lca::analysis
