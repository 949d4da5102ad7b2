#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "protobank/embedding.hpp"
#include "protobank/trainer.hpp"

namespace protobank {

enum class Partition { kReal, kVirtual, kBoth };

// Surrogate dataset sampler: per selected prototype w, draws
// normalize(tightness * w + noise * spread) with noise ~ N(0, 1) per
// dimension. `spread` is one value broadcast or one per dimension.
struct SurrogateConfig {
  std::size_t samples_per_class = 1;
  std::vector<double> spread = {0.0};  // all entries >= 0
  double tightness = 1.0;              // in (0, 1]
  std::uint64_t seed = 0;

  void validate(std::size_t dim) const;

  friend bool operator==(const SurrogateConfig&, const SurrogateConfig&) = default;
};

// Samples a labeled, unit-normalized dataset from the chosen bank partition.
// Labels are partition-relative (0-based within the selection); per-class
// sample streams are seeded independently from config.seed.
LabeledEmbeddingSet sample_surrogate_dataset(const PrototypeBank& bank, Partition partition,
                                             const SurrogateConfig& config);

}  // namespace protobank
