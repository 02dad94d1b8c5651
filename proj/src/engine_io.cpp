#include <cstring>
#include <filesystem>
#include <fstream>

#include "lca/crc64.hpp"
#include "lca/engine.hpp"
#include "lca/errors.hpp"

namespace lca::engine {
namespace {

constexpr char kLcamMagic[4] = {'L', 'C', 'A', 'M'};
constexpr char kSignMagic[4] = {'L', 'C', 'G', 'S'};
constexpr std::uint16_t kVersion = 1;

class CrcWriter {
 public:
  explicit CrcWriter(const std::string& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw Error("cannot open " + path + " for writing");
  }

  void write(const void* data, std::size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out_) throw Error("write failure on " + path_);
    crc_.update(data, len);
  }
  void u16(std::uint16_t v) { le(v, 2); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits, 8);
  }
  void finish() {
    const std::uint64_t crc = crc_.value();
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(crc >> (8 * i));
    out_.write(reinterpret_cast<const char*>(b), 8);
    if (!out_) throw Error("write failure on " + path_);
  }

 private:
  void le(std::uint64_t v, int n) {
    unsigned char b[8];
    for (int i = 0; i < n; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    write(b, static_cast<std::size_t>(n));
  }
  std::ofstream out_;
  std::string path_;
  Crc64 crc_;
};

class CrcReader {
 public:
  explicit CrcReader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IntegrityError("cannot open " + path);
    file_len_ = std::filesystem::file_size(path);
    if (file_len_ < 8) throw IntegrityError(path + " too short");
  }

  void read(void* data, std::size_t len) {
    if (consumed_ + len > file_len_ - 8) {
      throw IntegrityError(path_ + " truncated");
    }
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (in_.gcount() != static_cast<std::streamsize>(len)) {
      throw IntegrityError(path_ + " truncated");
    }
    crc_.update(data, len);
    consumed_ += len;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint64_t u64() { return le(8); }
  double f64() {
    const std::uint64_t bits = le(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::uint64_t remaining() const { return file_len_ - 8 - consumed_; }
  void verify() {
    unsigned char b[8];
    in_.read(reinterpret_cast<char*>(b), 8);
    if (in_.gcount() != 8) throw IntegrityError(path_ + " truncated");
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= std::uint64_t{b[i]} << (8 * i);
    if (stored != crc_.value()) {
      throw IntegrityError(path_ + " checksum mismatch");
    }
  }

 private:
  std::uint64_t le(int n) {
    unsigned char b[8] = {};
    read(b, static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }
  std::ifstream in_;
  std::string path_;
  std::uint64_t file_len_ = 0;
  std::uint64_t consumed_ = 0;
  Crc64 crc_;
};

}  // namespace

void LcaMatrix::save(const std::string& path, const LayerLayout& layout) const {
  CrcWriter w(path);
  w.write(kLcamMagic, 4);
  w.u16(kVersion);
  w.u64(iterations);
  w.u64(param_count);
  w.f64(tol);
  std::vector<float> rowbuf(param_count);
  for (std::size_t t = 0; t < iterations; ++t) {
    const double* src = values.data() + t * param_count;
    for (std::size_t i = 0; i < param_count; ++i) {
      rowbuf[i] = static_cast<float>(src[i]);
    }
    w.write(rowbuf.data(), param_count * sizeof(float));
  }
  for (double e : iter_error) w.f64(e);
  w.write(depth.data(), depth.size());
  w.finish();

  nlohmann::json side{{"layout", layout.to_json()},
                      {"loss", loss},
                      {"total_allocated", total_allocated},
                      {"loss_change", loss_change},
                      {"cumulative_error_pct", cumulative_error_pct},
                      {"tol", tol}};
  std::ofstream meta(path + ".meta.json", std::ios::trunc);
  meta << side.dump(2) << "\n";
  if (!meta) throw Error("cannot write " + path + ".meta.json");
}

LcaMatrix LcaMatrix::load(const std::string& path) {
  CrcReader r(path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kLcamMagic, 4) != 0) {
    throw FormatError("bad LCAM magic in " + path);
  }
  if (r.u16() != kVersion) throw FormatError("unsupported LCAM version");
  LcaMatrix m;
  m.iterations = r.u64();
  m.param_count = r.u64();
  m.tol = r.f64();
  m.values.resize(m.iterations * m.param_count);
  std::vector<float> rowbuf(m.param_count);
  for (std::size_t t = 0; t < m.iterations; ++t) {
    r.read(rowbuf.data(), m.param_count * sizeof(float));
    double* dst = m.values.data() + t * m.param_count;
    for (std::size_t i = 0; i < m.param_count; ++i) {
      dst[i] = static_cast<double>(rowbuf[i]);
    }
  }
  m.iter_error.resize(m.iterations);
  for (std::size_t t = 0; t < m.iterations; ++t) m.iter_error[t] = r.f64();
  m.depth.resize(m.iterations);
  r.read(m.depth.data(), m.depth.size());
  r.verify();

  const std::string meta_path = path + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream meta(meta_path);
    nlohmann::json side = nlohmann::json::parse(meta);
    m.loss = side.value("loss", std::vector<double>{});
    m.total_allocated = side.value("total_allocated", 0.0);
    m.loss_change = side.value("loss_change", 0.0);
    m.cumulative_error_pct = side.value("cumulative_error_pct", 0.0);
  }
  return m;
}

LayerLayout LcaMatrix::load_layout(const std::string& path) {
  std::ifstream meta(path + ".meta.json");
  if (!meta) throw IntegrityError("missing sidecar " + path + ".meta.json");
  nlohmann::json side = nlohmann::json::parse(meta);
  return LayerLayout::from_json(side.at("layout"));
}

void ClassLcaTensor::save_json(const std::string& path) const {
  nlohmann::json j{{"classes", classes},
                   {"iterations", iterations},
                   {"columns", columns},
                   {"aggregate", aggregate == ClassAggregate::Layer ? "layer" : "none"},
                   {"values", values}};
  std::ofstream out(path, std::ios::trunc);
  out << j.dump() << "\n";
  if (!out) throw Error("cannot write " + path);
}

ClassLcaTensor ClassLcaTensor::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  ClassLcaTensor t;
  t.classes = j.at("classes").get<std::size_t>();
  t.iterations = j.at("iterations").get<std::size_t>();
  t.columns = j.at("columns").get<std::size_t>();
  t.aggregate = j.at("aggregate").get<std::string>() == "layer"
                    ? ClassAggregate::Layer
                    : ClassAggregate::None;
  t.values = j.at("values").get<std::vector<double>>();
  if (t.values.size() != t.classes * t.iterations * t.columns) {
    throw FormatError("class tensor size mismatch in " + path);
  }
  return t;
}

void NeuronClassHelped::save_json(const std::string& path) const {
  nlohmann::json j{{"classes", classes},
                   {"neurons", neurons},
                   {"neuron_base", neuron_base},
                   {"helped", helped}};
  std::ofstream out(path, std::ios::trunc);
  out << j.dump() << "\n";
  if (!out) throw Error("cannot write " + path);
}

NeuronClassHelped NeuronClassHelped::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  NeuronClassHelped h;
  h.classes = j.at("classes").get<std::size_t>();
  h.neurons = j.at("neurons").get<std::size_t>();
  h.neuron_base = j.at("neuron_base").get<std::vector<std::size_t>>();
  h.helped = j.at("helped").get<std::vector<double>>();
  if (h.helped.size() != h.classes * h.neurons) {
    throw FormatError("neuron helped matrix size mismatch in " + path);
  }
  return h;
}

void GradSigns::save(const std::string& path) const {
  CrcWriter w(path);
  w.write(kSignMagic, 4);
  w.u16(kVersion);
  w.u64(rows);
  w.u64(cols);
  w.write(signs.data(), signs.size());
  w.finish();
}

GradSigns GradSigns::load(const std::string& path) {
  CrcReader r(path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kSignMagic, 4) != 0) {
    throw FormatError("bad LCGS magic in " + path);
  }
  if (r.u16() != kVersion) throw FormatError("unsupported LCGS version");
  GradSigns g;
  g.rows = r.u64();
  g.cols = r.u64();
  g.signs.resize(g.rows * g.cols);
  r.read(g.signs.data(), g.signs.size());
  r.verify();
  return g;
}

}  // namespace lca::engine
