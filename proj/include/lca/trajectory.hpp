#ifndef LCA_TRAJECTORY_HPP
#define LCA_TRAJECTORY_HPP

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace lca::traj {

// LCAT trajectory file, little-endian:
//   "LCAT" | version u16 | K u64 | T u64 | precision u8 (0 = f32)
//   (T+1) snapshot blocks of K values
//   metadata length u64 | metadata (UTF-8 JSON)
//   CRC64 (CRC-64/XZ over every preceding byte)
// The writer streams into "<path>.partial" and renames on finalize, so a
// crash leaves a visibly partial file.
inline constexpr std::uint16_t kTrajectoryVersion = 1;

class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& path, std::size_t param_count,
                   std::size_t planned_iterations);
  ~TrajectoryWriter();

  TrajectoryWriter(const TrajectoryWriter&) = delete;
  TrajectoryWriter& operator=(const TrajectoryWriter&) = delete;

  // Rounds to f32 and appends. The first call records theta_0.
  void append_snapshot(std::span<const double> theta);

  std::size_t snapshots_written() const { return snapshots_; }

  // Patches the header with the actual iteration count, writes metadata and
  // the checksum, renames into place.
  void finalize(const nlohmann::json& metadata);

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  std::size_t k_;
  std::size_t snapshots_ = 0;
  bool finalized_ = false;
  std::vector<float> scratch_;
};

class TrajectoryReader {
 public:
  // Verifies the checksum (one streaming pass) and parses metadata.
  explicit TrajectoryReader(const std::string& path);

  std::size_t param_count() const { return k_; }
  // Number of optimizer steps T; snapshots run 0..T.
  std::size_t iterations() const { return t_; }
  const nlohmann::json& metadata() const { return metadata_; }

  std::vector<float> snapshot_f32(std::size_t t) const;
  std::vector<double> snapshot(std::size_t t) const;

  // theta_{t+1} - theta_t elementwise in double; 0 <= t < T.
  std::vector<double> delta(std::size_t t) const;

 private:
  void read_snapshot_raw(std::size_t t, float* out) const;

  std::string path_;
  mutable std::ifstream in_;
  std::size_t k_ = 0;
  std::size_t t_ = 0;
  std::uint64_t data_offset_ = 0;
  nlohmann::json metadata_;
};

}  // namespace lca::traj

#endif
