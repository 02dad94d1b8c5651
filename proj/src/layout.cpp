#include "lca/layout.hpp"

#include <algorithm>
#include <stdexcept>

#include "lca/errors.hpp"

namespace lca {

LayerLayout LayerLayout::dense_stack(std::span<const std::size_t> widths) {
  if (widths.size() < 2) {
    throw ConfigError("architecture needs at least an input and an output width");
  }
  for (std::size_t w : widths) {
    if (w < 1) throw ConfigError("layer widths must be >= 1");
  }
  LayerLayout layout;
  layout.widths_.assign(widths.begin(), widths.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    const std::string base = "dense" + std::to_string(l);
    LayerEntry kernel{base + ".kernel", ParamKind::DenseKernel,
                      fan_in, fan_out, offset, fan_in, fan_out, l};
    offset += kernel.size();
    LayerEntry bias{base + ".bias", ParamKind::DenseBias,
                    1, fan_out, offset, fan_in, fan_out, l};
    offset += bias.size();
    layout.entries_.push_back(std::move(kernel));
    layout.entries_.push_back(std::move(bias));
  }
  layout.finish();
  return layout;
}

LayerLayout LayerLayout::flat(std::size_t n) {
  if (n == 0) throw ConfigError("flat layout needs at least one parameter");
  LayerLayout layout;
  layout.entries_.push_back(
      LayerEntry{"theta", ParamKind::DenseKernel, 1, n, 0, n, n, 0});
  layout.finish();
  return layout;
}

void LayerLayout::finish() {
  total_ = 0;
  group_count_ = 0;
  for (const auto& e : entries_) {
    if (e.offset != total_) {
      throw std::logic_error("layout blocks must be contiguous");
    }
    total_ += e.size();
    group_count_ = std::max(group_count_, e.group + 1);
  }
  neuron_bases_.assign(group_count_ + 1, 0);
  for (std::size_t g = 0; g < group_count_; ++g) {
    std::size_t units = 0;
    for (const auto& e : entries_) {
      if (e.group == g) units = std::max(units, e.fan_out);
    }
    neuron_bases_[g + 1] = neuron_bases_[g] + units;
  }
}

std::string LayerLayout::group_name(std::size_t group) const {
  for (const auto& e : entries_) {
    if (e.group == group) {
      auto dot = e.name.find('.');
      return dot == std::string::npos ? e.name : e.name.substr(0, dot);
    }
  }
  throw std::out_of_range("no such layer group");
}

const LayerEntry& LayerLayout::entry_of_index(std::size_t flat_index) const {
  for (const auto& e : entries_) {
    if (flat_index >= e.offset && flat_index < e.offset + e.size()) return e;
  }
  throw std::out_of_range("flat index outside parameter vector");
}

std::size_t LayerLayout::group_of_index(std::size_t flat_index) const {
  return entry_of_index(flat_index).group;
}

bool LayerLayout::has_group(const std::string& name) const {
  for (std::size_t g = 0; g < group_count_; ++g) {
    if (group_name(g) == name) return true;
  }
  return false;
}

std::size_t LayerLayout::group_by_name(const std::string& name) const {
  for (std::size_t g = 0; g < group_count_; ++g) {
    if (group_name(g) == name) return g;
  }
  throw ConfigError("unknown layer name: " + name);
}

std::size_t LayerLayout::neuron_count() const { return neuron_bases_.back(); }

std::size_t LayerLayout::neuron_base(std::size_t group) const {
  return neuron_bases_.at(group);
}

std::size_t LayerLayout::neuron_of_index(std::size_t flat_index) const {
  const LayerEntry& e = entry_of_index(flat_index);
  const std::size_t within = flat_index - e.offset;
  const std::size_t unit =
      e.kind == ParamKind::DenseKernel ? within % e.cols : within;
  return neuron_bases_[e.group] + unit;
}

nlohmann::json LayerLayout::to_json() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    entries.push_back({{"name", e.name},
                       {"kind", e.kind == ParamKind::DenseKernel ? "dense-kernel"
                                                                 : "dense-bias"},
                       {"rows", e.rows},
                       {"cols", e.cols},
                       {"offset", e.offset},
                       {"fan_in", e.fan_in},
                       {"fan_out", e.fan_out},
                       {"group", e.group}});
  }
  return {{"entries", entries}, {"widths", widths_}, {"param_count", total_}};
}

LayerLayout LayerLayout::from_json(const nlohmann::json& j) {
  LayerLayout layout;
  layout.widths_ = j.value("widths", std::vector<std::size_t>{});
  for (const auto& je : j.at("entries")) {
    LayerEntry e;
    e.name = je.at("name").get<std::string>();
    e.kind = je.at("kind").get<std::string>() == "dense-kernel"
                 ? ParamKind::DenseKernel
                 : ParamKind::DenseBias;
    e.rows = je.at("rows").get<std::size_t>();
    e.cols = je.at("cols").get<std::size_t>();
    e.offset = je.at("offset").get<std::size_t>();
    e.fan_in = je.at("fan_in").get<std::size_t>();
    e.fan_out = je.at("fan_out").get<std::size_t>();
    e.group = je.at("group").get<std::size_t>();
    layout.entries_.push_back(std::move(e));
  }
  layout.finish();
  if (j.contains("param_count") &&
      j.at("param_count").get<std::size_t>() != layout.total_) {
    throw FormatError("layout param_count does not match entries");
  }
  return layout;
}

bool LayerLayout::operator==(const LayerLayout& other) const {
  if (total_ != other.total_ || entries_.size() != other.entries_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.kind != b.kind || a.rows != b.rows ||
        a.cols != b.cols || a.offset != b.offset || a.group != b.group) {
      return false;
    }
  }
  return true;
}

}  // namespace lca
