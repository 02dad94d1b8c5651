#include "lca/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lca/errors.hpp"

namespace lca::synth {

Dataset gen_synthetic(const ClusterSpec& spec) {
  if (spec.num_examples < spec.num_classes || spec.num_classes < 2) {
    throw ConfigError("synthetic spec needs N >= C >= 2");
  }
  if (spec.feature_dim == 0) throw ConfigError("synthetic spec needs D >= 1");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  // unit direction per class
  std::vector<double> means(spec.num_classes * spec.feature_dim);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    double norm = 0.0;
    for (std::size_t d = 0; d < spec.feature_dim; ++d) {
      const double v = unit(rng);
      means[c * spec.feature_dim + d] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < spec.feature_dim; ++d) {
      means[c * spec.feature_dim + d] *= spec.separation / norm;
    }
  }

  Dataset data;
  data.num_examples = spec.num_examples;
  data.feature_dim = spec.feature_dim;
  data.num_classes = spec.num_classes;
  data.features.resize(spec.num_examples * spec.feature_dim);
  data.labels.resize(spec.num_examples);
  for (std::size_t n = 0; n < spec.num_examples; ++n) {
    const std::size_t c = n % spec.num_classes;
    data.labels[n] = static_cast<int>(c);
    float* row = data.features.data() + n * spec.feature_dim;
    for (std::size_t d = 0; d < spec.feature_dim; ++d) {
      const double raw = means[c * spec.feature_dim + d] + unit(rng);
      row[d] = static_cast<float>(std::clamp(0.5 + 0.15 * raw, 0.0, 1.0));
    }
  }
  data.id = "synthetic-clusters:N" + std::to_string(spec.num_examples) + ":C" +
            std::to_string(spec.num_classes) + ":sep" +
            std::to_string(spec.separation) + ":seed" + std::to_string(spec.seed);
  data.build_class_index();
  return data;
}

namespace {

constexpr std::size_t kSide = 28;
constexpr std::size_t kBorder = 1;
constexpr std::size_t kClasses = 10;
constexpr std::size_t kStrokePool = 16;
constexpr std::size_t kStylesPerClass = 3;
constexpr std::size_t kStrokesPerGlyph = 5;
constexpr std::size_t kTwinStride = 4;

struct Stroke {
  double cx, cy, sigma, amp;
};

}  // namespace

// Classes draw their strokes from one shared pool, in three style variants
// per class, with per-example stroke jitter on top: within-class variation is
// wide and between-class templates overlap, which keeps mini-batch gradients
// noisy the way heterogeneous real digits do. Every fourth example is a twin
// of its predecessor (same glyph realization, fresh pixel noise, its own
// label): twin pairs mostly cancel in the full-set gradient and act as an
// irreducible noise floor. The outer 1-pixel border is never written and
// gives a structurally dead input population.
Dataset gen_digits_corpus(std::size_t num_examples, std::uint64_t seed) {
  if (num_examples < kClasses) throw ConfigError("digits corpus needs N >= 10");

  std::mt19937_64 template_rng(seed * 2654435761u + 17);
  std::uniform_real_distribution<double> pos(kBorder + 4.0, kSide - kBorder - 5.0);
  std::uniform_real_distribution<double> sig(1.4, 2.4);
  std::uniform_real_distribution<double> weight(0.6, 1.2);
  std::uniform_int_distribution<std::size_t> pick(0, kStrokePool - 1);

  std::vector<Stroke> pool(kStrokePool);
  for (auto& s : pool) {
    s = Stroke{pos(template_rng), pos(template_rng), sig(template_rng), 0.0};
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> templates(
      kClasses * kStylesPerClass);
  for (auto& t : templates) {
    for (std::size_t b = 0; b < kStrokesPerGlyph; ++b) {
      t.push_back({pick(template_rng), weight(template_rng)});
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(-4, 4);
  std::uniform_real_distribution<double> stroke_jitter(0.65, 1.35);
  std::normal_distribution<double> center_jitter(0.0, 1.0);
  std::normal_distribution<double> pixel_noise(0.0, 0.05);

  Dataset data;
  data.num_examples = num_examples;
  data.feature_dim = kSide * kSide;
  data.num_classes = kClasses;
  data.features.assign(num_examples * data.feature_dim, 0.0f);
  data.labels.resize(num_examples);

  std::vector<Stroke> glyph(kStrokesPerGlyph), prev_glyph(kStrokesPerGlyph);
  for (std::size_t n = 0; n < num_examples; ++n) {
    const std::size_t cls = n % kClasses;
    data.labels[n] = static_cast<int>(cls);
    const bool twin = n > 0 && n % kTwinStride == 1;
    if (twin) {
      glyph = prev_glyph;  // same image content, own (usually different) label
    } else {
      const auto& tmpl = templates[cls * kStylesPerClass + (n / kClasses) % kStylesPerClass];
      const int dx = shift(rng);
      const int dy = shift(rng);
      for (std::size_t b = 0; b < kStrokesPerGlyph; ++b) {
        const Stroke& base = pool[tmpl[b].first];
        glyph[b] = Stroke{base.cx + dx + center_jitter(rng),
                          base.cy + dy + center_jitter(rng), base.sigma,
                          tmpl[b].second * stroke_jitter(rng)};
      }
    }
    prev_glyph = glyph;

    float* img = data.features.data() + n * data.feature_dim;
    for (std::size_t y = kBorder; y < kSide - kBorder; ++y) {
      for (std::size_t x = kBorder; x < kSide - kBorder; ++x) {
        double v = 0.0;
        for (const Stroke& s : glyph) {
          const double ddx = static_cast<double>(x) - s.cx;
          const double ddy = static_cast<double>(y) - s.cy;
          v += s.amp * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * s.sigma * s.sigma));
        }
        v += pixel_noise(rng);
        // quantize like an 8-bit image; faint values drop to exact zero
        const double q =
            std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5) / 255.0;
        img[y * kSide + x] = static_cast<float>(q);
      }
    }
  }
  data.id = "digits:N" + std::to_string(num_examples) + ":seed" + std::to_string(seed);
  data.build_class_index();
  return data;
}

}  // namespace lca::synth
