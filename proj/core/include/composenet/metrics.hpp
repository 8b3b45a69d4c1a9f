#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace composenet {

struct MetricsRow {
  long long steps = 0;
  float mean_return = 0.0f;
  float mean_length = 0.0f;
  float entropy = 0.0f;
  uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Appends rows to a CSV file: a `# config_hash=...` comment, a header line,
// then one row per evaluation point in increasing step order. One file per
// (experiment, seed).
class MetricsWriter {
public:
  MetricsWriter(const std::string& path, const std::string& config_hash, uint64_t seed);
  void append(const MetricsRow& row);
  const std::string& path() const { return path_; }

private:
  std::string path_;
  uint64_t seed_;
  long long last_steps_ = -1;
};

struct MetricsFile {
  std::string config_hash;
  std::vector<MetricsRow> rows;
};

MetricsFile read_metrics(const std::string& path);

}  // namespace composenet
