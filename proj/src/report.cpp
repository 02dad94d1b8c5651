#include "lca/report.hpp"

#include <cstdio>

#include "lca/errors.hpp"

namespace lca::report {

std::ofstream open_csv(const std::string& path, const std::string& run_id,
                       const std::string& config_hash,
                       const std::map<std::string, std::string>& settings) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "# run_id=" << run_id << ",config_hash=" << config_hash;
  for (const auto& [key, value] : settings) out << "," << key << "=" << value;
  out << "\n";
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

}  // namespace lca::report
