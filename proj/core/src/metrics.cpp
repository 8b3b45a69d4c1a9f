#include "composenet/metrics.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "composenet/errors.hpp"

namespace composenet {

MetricsWriter::MetricsWriter(const std::string& path, const std::string& config_hash,
                             uint64_t seed)
    : path_(path), seed_(seed) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path_, std::ios::trunc);
  if (!f) throw ConfigError("MetricsWriter: cannot write " + path_);
  f << "# config_hash=" << config_hash << "\n";
  f << "steps,mean_return,mean_length,entropy,seed,wall_seconds\n";
}

void MetricsWriter::append(const MetricsRow& row) {
  if (row.steps <= last_steps_)
    throw UsageError("MetricsWriter: rows must be appended in increasing step order");
  last_steps_ = row.steps;
  std::ofstream f(path_, std::ios::app);
  if (!f) throw ConfigError("MetricsWriter: cannot append to " + path_);
  f << row.steps << ',' << row.mean_return << ',' << row.mean_length << ',' << row.entropy
    << ',' << row.seed << ',' << row.wall_seconds << "\n";
}

MetricsFile read_metrics(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingPrerequisiteError("metrics file not found: " + path);
  MetricsFile out;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config_hash=", 0) == 0) {
      out.config_hash = line.substr(std::string("# config_hash=").size());
      continue;
    }
    if (line.rfind("steps,", 0) == 0) {
      header_seen = true;
      continue;
    }
    std::istringstream is(line);
    MetricsRow row;
    char comma;
    if (!(is >> row.steps >> comma >> row.mean_return >> comma >> row.mean_length >> comma >>
          row.entropy >> comma >> row.seed >> comma >> row.wall_seconds))
      throw MissingPrerequisiteError("metrics file " + path + ": bad row '" + line + "'");
    out.rows.push_back(row);
  }
  if (!header_seen)
    throw MissingPrerequisiteError("metrics file " + path + ": missing header");
  return out;
}

}  // namespace composenet
