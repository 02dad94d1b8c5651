#ifndef LCA_TESTS_FIXTURES_HPP
#define LCA_TESTS_FIXTURES_HPP

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lca/model.hpp"
#include "lca/trajectory.hpp"

namespace lca::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("lca_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Writes snapshots out as a finalized trajectory file and returns its path.
inline std::string make_trajectory(const TempDir& dir, const std::string& name,
                                   const std::vector<std::vector<double>>& snaps) {
  const std::string path = dir.file(name);
  traj::TrajectoryWriter writer(path, snaps.front().size(), snaps.size() - 1);
  for (const auto& s : snaps) writer.append_snapshot(s);
  writer.finalize({{"fixture", true}});
  return path;
}

// L(theta) = 1/2 (theta - c)^T H (theta - c) with symmetric PSD H. Simpson
// integration is exact on this landscape, which is what the integrator
// oracles lean on.
class QuadraticModel final : public LossModel {
 public:
  QuadraticModel(std::vector<double> hessian, std::vector<double> center)
      : h_(std::move(hessian)), center_(std::move(center)), k_(center_.size()) {}

  static QuadraticModel random_psd(std::size_t k, std::uint64_t seed,
                                   double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> a(k * k);
    for (auto& v : a) v = unit(rng);
    std::vector<double> h(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t m = 0; m < k; ++m) s += a[m * k + i] * a[m * k + j];
        h[i * k + j] = scale * s / static_cast<double>(k);
      }
    }
    std::vector<double> center(k);
    for (auto& v : center) v = unit(rng);
    return QuadraticModel(std::move(h), std::move(center));
  }

  std::size_t param_count() const override { return k_; }

  double loss(std::span<const double> theta) const override {
    std::vector<double> hd(k_, 0.0);
    double val = 0.0;
    for (std::size_t i = 0; i < k_; ++i) {
      const double di = theta[i] - center_[i];
      for (std::size_t j = 0; j < k_; ++j) {
        hd[i] += h_[i * k_ + j] * (theta[j] - center_[j]);
      }
      val += di * hd[i];
    }
    return 0.5 * val;
  }

  double gradient(std::span<const double> theta,
                  std::span<double> grad) const override {
    for (std::size_t i = 0; i < k_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        s += h_[i * k_ + j] * (theta[j] - center_[j]);
      }
      grad[i] = s;
    }
    return loss(theta);
  }

  const std::vector<double>& hessian() const { return h_; }
  const std::vector<double>& center() const { return center_; }

 private:
  std::vector<double> h_;
  std::vector<double> center_;
  std::size_t k_;
};

// Separable smooth non-polynomial landscape, for convergence-order checks:
// L = sum_i c_i (1 - cos theta_i).
class CosineModel final : public LossModel {
 public:
  explicit CosineModel(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

  std::size_t param_count() const override { return c_.size(); }

  double loss(std::span<const double> theta) const override {
    double v = 0.0;
    for (std::size_t i = 0; i < c_.size(); ++i) {
      v += c_[i] * (1.0 - std::cos(theta[i]));
    }
    return v;
  }

  double gradient(std::span<const double> theta,
                  std::span<double> grad) const override {
    for (std::size_t i = 0; i < c_.size(); ++i) {
      grad[i] = c_[i] * std::sin(theta[i]);
    }
    return loss(theta);
  }

 private:
  std::vector<double> c_;
};

// Central finite differences of a model's loss.
inline double finite_difference(const LossModel& model,
                                std::span<const double> theta, std::size_t i,
                                double h = 1e-4) {
  std::vector<double> plus(theta.begin(), theta.end());
  std::vector<double> minus(theta.begin(), theta.end());
  plus[i] += h;
  minus[i] -= h;
  return (model.loss(plus) - model.loss(minus)) / (2.0 * h);
}

}  // namespace lca::testing

#endif
