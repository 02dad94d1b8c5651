#ifndef LCA_ENGINE_HPP
#define LCA_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lca/layout.hpp"
#include "lca/model.hpp"
#include "lca/trajectory.hpp"

namespace lca::engine {

enum class ClassAggregate { None, Layer };

struct LcaOptions {
  double tol = 1e-3;   // per-iteration absolute error gate, nats
  int max_depth = 6;   // panel doubling cap: 2^max_depth Simpson panels
  bool first_order = false;  // diagnostic: endpoint-gradient allocation
  bool per_class = false;
  ClassAggregate aggregate = ClassAggregate::Layer;
  bool record_grad_signs = false;
  bool enforce_gate = true;  // throw GateError if cumulative error >= 1%
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// The T x K allocation matrix. Values are kept in double in memory; the LCAM
// file stores them as f32 (error accounting always runs on the doubles).
struct LcaMatrix {
  std::size_t iterations = 0;
  std::size_t param_count = 0;
  double tol = 1e-3;
  std::vector<double> values;        // T x K row-major
  std::vector<double> iter_error;    // eps_t = dL_t - sum_i A[t,i]
  std::vector<std::uint8_t> depth;   // Simpson refinement level used
  std::vector<double> loss;          // T+1 full-set losses along the path
  double total_allocated = 0.0;      // sum of all A values (64-bit running)
  double loss_change = 0.0;          // L(theta_T) - L(theta_0)
  double cumulative_error_pct = 0.0;  // signed: 100*(sumA - dL)/|dL|

  std::span<const double> row(std::size_t t) const {
    return {values.data() + t * param_count, param_count};
  }
  bool flagged(std::size_t t) const;

  // LCAM, little-endian: "LCAM" | version u16 | T u64 | K u64 | tol f64 |
  // A rows f32 | iter_error f64 | depth u8 | CRC64. The sidecar
  // "<path>.meta.json" carries the layout, loss curve and totals.
  void save(const std::string& path, const LayerLayout& layout) const;
  static LcaMatrix load(const std::string& path);
  static LayerLayout load_layout(const std::string& path);
};

// Per-class allocations sharing the total run's panels. aggregate == Layer
// stores per-layer sums (C x T x L); None stores the full C x T x K tensor
// and is intended for small networks.
struct ClassLcaTensor {
  std::size_t classes = 0;
  std::size_t iterations = 0;
  std::size_t columns = 0;
  ClassAggregate aggregate = ClassAggregate::Layer;
  std::vector<double> values;  // C x T x columns

  double at(std::size_t c, std::size_t t, std::size_t j) const {
    return values[(c * iterations + t) * columns + j];
  }
  std::span<const double> series(std::size_t c, std::size_t t) const {
    return {values.data() + (c * iterations + t) * columns, columns};
  }

  void save_json(const std::string& path) const;
  static ClassLcaTensor load_json(const std::string& path);
};

// Cumulative helped amount (magnitude of negative LCA, parameter
// granularity) per class and output unit; drives the specialization stats.
struct NeuronClassHelped {
  std::size_t classes = 0;
  std::size_t neurons = 0;
  std::vector<std::size_t> neuron_base;  // per layer group, plus total
  std::vector<double> helped;            // C x neurons, >= 0

  double at(std::size_t c, std::size_t n) const { return helped[c * neurons + n]; }

  void save_json(const std::string& path) const;
  static NeuronClassHelped load_json(const std::string& path);
};

// Signs of the full-set gradient at every recorded iterate, for oscillation
// statistics. (T+1) x K of {-1, 0, +1}.
struct GradSigns {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> signs;

  std::span<const std::int8_t> row(std::size_t t) const {
    return {signs.data() + t * cols, cols};
  }

  void save(const std::string& path) const;
  static GradSigns load(const std::string& path);
};

struct LcaResult {
  LcaMatrix matrix;
  std::optional<ClassLcaTensor> per_class;
  std::optional<NeuronClassHelped> neuron_helped;
  std::optional<GradSigns> grad_signs;
};

// First-order allocation: A[i] = g[i] * dtheta[i].
std::vector<double> lca_first_order(std::span<const double> grad,
                                    std::span<const double> dtheta);

// Single-panel (1,4,1)/6 effective gradient between two parameter vectors.
std::vector<double> simpson_gradient(const LossModel& model,
                                     std::span<const double> theta_a,
                                     std::span<const double> theta_b);

struct StepResult {
  std::vector<double> row;
  double epsilon = 0.0;
  int depth = 0;
  double loss_a = 0.0;
  double loss_b = 0.0;
};

// Adaptive composite Simpson along the straight segment theta_a -> theta_b:
// panels double until |dL - sum_i row[i]| < tol or depth == max_depth.
StepResult adaptive_lca_step(const LossModel& model,
                             std::span<const double> theta_a,
                             std::span<const double> theta_b, double tol = 1e-3,
                             int max_depth = 6);

LcaResult compute_lca(const LossModel& model, const LayerLayout& layout,
                      const traj::TrajectoryReader& traj,
                      const LcaOptions& opts = {});

// Throws GateError (listing the worst iterations) when the cumulative error
// breaches 1%.
void check_gate(const LcaMatrix& matrix);

}  // namespace lca::engine

#endif
