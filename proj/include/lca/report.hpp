#ifndef LCA_REPORT_HPP
#define LCA_REPORT_HPP

#include <fstream>
#include <map>
#include <string>

namespace lca::report {

// Every CSV starts with a '#' provenance line carrying the run id, config
// hash and tolerance settings, then a normal column header row.
std::ofstream open_csv(const std::string& path, const std::string& run_id,
                       const std::string& config_hash,
                       const std::map<std::string, std::string>& settings);

std::string fmt(double v);

}  // namespace lca::report

#endif
