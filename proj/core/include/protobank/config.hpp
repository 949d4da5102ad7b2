#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "protobank/metrics.hpp"
#include "protobank/synthesis.hpp"
#include "protobank/trainer.hpp"

namespace protobank {

struct DataGenConfig {
  std::size_t n_ids = 50;
  std::size_t per_id = 8;
  std::size_t dim = 64;
  double jitter = 0.1;
  double concentration = 0.0;  // 0 = id means uniform on the sphere
  std::uint64_t seed = 1;

  friend bool operator==(const DataGenConfig&, const DataGenConfig&) = default;
};

struct MetricsParams {
  std::size_t bins = 64;
  std::size_t max_pairs_per_class = 10000;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricsParams&, const MetricsParams&) = default;
};

struct AuditParams {
  std::size_t top_j = 1;
  double quantile = 1.0;
  std::size_t bins = 64;
  std::size_t block = kDefaultBlock;

  friend bool operator==(const AuditParams&, const AuditParams&) = default;
};

// Everything a pipeline run needs, one section per stage. The text form is
// "[section]" headers over "key = value" lines; '#' starts a comment.
// Unknown sections or keys are rejected, and parse(serialize(c)) == c.
struct RunConfig {
  DataGenConfig data;
  TrainRunConfig train;
  SurrogateConfig surrogate;
  Partition surrogate_partition = Partition::kVirtual;
  MetricsParams metrics;
  AuditParams audit;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_run_config(const std::string& text);
std::string serialize_run_config(const RunConfig& config);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

std::string partition_name(Partition p);
Partition parse_partition(const std::string& name);  // ConfigInvalid on anything else

}  // namespace protobank
