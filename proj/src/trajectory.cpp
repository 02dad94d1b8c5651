#include "lca/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "lca/crc64.hpp"
#include "lca/errors.hpp"

namespace lca::traj {
namespace {

constexpr char kMagic[4] = {'L', 'C', 'A', 'T'};
constexpr std::size_t kHeaderSize = 4 + 2 + 8 + 8 + 1;

void put_u16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::ifstream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

// Streaming CRC over [0, len) of a file.
std::uint64_t crc_of_range(const std::string& path, std::uint64_t len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot reopen " + path + " for checksum");
  Crc64 crc;
  std::vector<char> buf(1 << 20);
  std::uint64_t remaining = len;
  while (remaining > 0) {
    const std::size_t chunk =
        static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), remaining));
    in.read(buf.data(), static_cast<std::streamsize>(chunk));
    if (in.gcount() != static_cast<std::streamsize>(chunk)) {
      throw IntegrityError("short read while checksumming " + path);
    }
    crc.update(buf.data(), chunk);
    remaining -= chunk;
  }
  return crc.value();
}

}  // namespace

TrajectoryWriter::TrajectoryWriter(const std::string& path,
                                   std::size_t param_count,
                                   std::size_t planned_iterations)
    : path_(path), tmp_path_(path + ".partial"), k_(param_count) {
  out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot open " + tmp_path_ + " for writing");
  out_.write(kMagic, 4);
  put_u16(out_, kTrajectoryVersion);
  put_u64(out_, k_);
  put_u64(out_, planned_iterations);
  out_.put(static_cast<char>(0));  // precision: f32
  scratch_.resize(k_);
}

TrajectoryWriter::~TrajectoryWriter() {
  if (!finalized_) {
    out_.close();  // leave the .partial file as the failure marker
  }
}

void TrajectoryWriter::append_snapshot(std::span<const double> theta) {
  if (theta.size() != k_) throw std::invalid_argument("snapshot length mismatch");
  for (std::size_t i = 0; i < k_; ++i) {
    const double v = theta[i];
    if (!std::isfinite(v)) {
      throw NumericError("non-finite parameter in snapshot " +
                         std::to_string(snapshots_));
    }
    scratch_[i] = static_cast<float>(v);
  }
  out_.write(reinterpret_cast<const char*>(scratch_.data()),
             static_cast<std::streamsize>(k_ * sizeof(float)));
  if (!out_) throw Error("write failure on " + tmp_path_);
  ++snapshots_;
}

void TrajectoryWriter::finalize(const nlohmann::json& metadata) {
  if (finalized_) throw std::logic_error("trajectory already finalized");
  if (snapshots_ < 2) throw Error("trajectory needs at least 2 snapshots");
  const std::string meta = metadata.dump();
  put_u64(out_, meta.size());
  out_.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  out_.flush();
  if (!out_) throw Error("write failure on " + tmp_path_);

  // Patch T = actual step count, then checksum the whole body.
  out_.seekp(4 + 2 + 8);
  put_u64(out_, snapshots_ - 1);
  out_.flush();
  out_.close();

  const std::uint64_t body_len = std::filesystem::file_size(tmp_path_);
  const std::uint64_t crc = crc_of_range(tmp_path_, body_len);
  {
    std::ofstream app(tmp_path_, std::ios::binary | std::ios::app);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(crc >> (8 * i));
    app.write(reinterpret_cast<const char*>(b), 8);
    if (!app) throw Error("write failure on " + tmp_path_);
  }
  std::filesystem::rename(tmp_path_, path_);
  finalized_ = true;
}

TrajectoryReader::TrajectoryReader(const std::string& path) : path_(path) {
  in_.open(path_, std::ios::binary);
  if (!in_) throw IntegrityError("cannot open trajectory " + path_);
  const std::uint64_t file_len = std::filesystem::file_size(path_);
  if (file_len < kHeaderSize + 8) throw IntegrityError("trajectory too short");

  char magic[4];
  in_.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad trajectory magic in " + path_);
  }
  const std::uint16_t version = get_u16(in_);
  if (version != kTrajectoryVersion) {
    throw FormatError("unsupported trajectory version " + std::to_string(version));
  }
  k_ = get_u64(in_);
  t_ = get_u64(in_);
  const int precision = in_.get();
  if (precision != 0) throw FormatError("unsupported snapshot precision");
  if (k_ == 0 || t_ == 0) throw IntegrityError("degenerate trajectory header");

  data_offset_ = kHeaderSize;
  const std::uint64_t snaps_len = (t_ + 1) * k_ * sizeof(float);
  if (file_len < data_offset_ + snaps_len + 8 + 8) {
    throw IntegrityError("trajectory truncated: " + path_);
  }
  in_.seekg(static_cast<std::streamoff>(data_offset_ + snaps_len));
  const std::uint64_t meta_len = get_u64(in_);
  if (file_len != data_offset_ + snaps_len + 8 + meta_len + 8) {
    throw IntegrityError("trajectory length inconsistent: " + path_);
  }
  std::string meta(meta_len, '\0');
  in_.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in_) throw IntegrityError("metadata read failed");

  const std::uint64_t stored_crc = get_u64(in_);
  const std::uint64_t actual_crc = crc_of_range(path_, file_len - 8);
  if (stored_crc != actual_crc) {
    throw IntegrityError("trajectory checksum mismatch: " + path_);
  }
  try {
    metadata_ = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trajectory metadata is not JSON: ") + e.what());
  }
}

void TrajectoryReader::read_snapshot_raw(std::size_t t, float* out) const {
  if (t > t_) throw std::out_of_range("snapshot index exceeds T");
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(data_offset_ + t * k_ * sizeof(float)));
  in_.read(reinterpret_cast<char*>(out),
           static_cast<std::streamsize>(k_ * sizeof(float)));
  if (!in_) throw IntegrityError("snapshot read failed");
}

std::vector<float> TrajectoryReader::snapshot_f32(std::size_t t) const {
  std::vector<float> v(k_);
  read_snapshot_raw(t, v.data());
  return v;
}

std::vector<double> TrajectoryReader::snapshot(std::size_t t) const {
  std::vector<float> raw(k_);
  read_snapshot_raw(t, raw.data());
  return std::vector<double>(raw.begin(), raw.end());
}

std::vector<double> TrajectoryReader::delta(std::size_t t) const {
  if (t >= t_) throw std::out_of_range("delta index must satisfy t < T");
  std::vector<float> a(k_), b(k_);
  read_snapshot_raw(t, a.data());
  read_snapshot_raw(t + 1, b.data());
  std::vector<double> d(k_);
  for (std::size_t i = 0; i < k_; ++i) {
    d[i] = static_cast<double>(b[i]) - static_cast<double>(a[i]);
  }
  return d;
}

}  // namespace lca::traj
