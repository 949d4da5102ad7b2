#include "protobank/synthesis.hpp"

#include <cmath>
#include <random>

#include "detail/dot_kernel.hpp"
#include "protobank/errors.hpp"
#include "protobank/rng.hpp"

namespace protobank {

void SurrogateConfig::validate(std::size_t dim) const {
  if (samples_per_class < 1) throw ConfigInvalid("samples_per_class must be >= 1");
  if (!(tightness > 0.0 && tightness <= 1.0)) throw ConfigInvalid("tightness must be in (0, 1]");
  if (spread.size() != 1 && spread.size() != dim)
    throw LengthMismatch("spread", spread.size(), dim);
  for (double s : spread)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigInvalid("spread entries must be >= 0");
}

LabeledEmbeddingSet sample_surrogate_dataset(const PrototypeBank& bank, Partition partition,
                                             const SurrogateConfig& config) {
  config.validate(bank.dim());
  std::size_t begin = 0, count = 0;
  switch (partition) {
    case Partition::kReal: begin = 0; count = bank.n_real(); break;
    case Partition::kVirtual: begin = bank.n_real(); count = bank.k_virtual(); break;
    case Partition::kBoth: begin = 0; count = bank.rows(); break;
  }
  if (count == 0)
    throw EmptyPartition(partition == Partition::kVirtual ? "virtual" : "real");

  std::size_t dim = bank.dim();
  std::vector<double> spread(dim);
  for (std::size_t d = 0; d < dim; ++d)
    spread[d] = config.spread.size() == 1 ? config.spread[0] : config.spread[d];

  Matrix rows(count * config.samples_per_class, dim);
  std::vector<std::int64_t> labels(rows.rows());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t c = 0; c < count; ++c) {
    const double* w = bank.matrix().row(begin + c);
    auto eng = make_engine(derive_seed(config.seed, c));
    for (std::size_t s = 0; s < config.samples_per_class; ++s) {
      std::size_t r = c * config.samples_per_class + s;
      double* dst = rows.row(r);
      for (std::size_t d = 0; d < dim; ++d)
        dst[d] = config.tightness * w[d] + normal(eng) * spread[d];
      double n = std::sqrt(detail::dot_pair(dst, dst, dim));
      if (n <= 1e-12) throw ZeroNormRow(r, "surrogate sample");
      for (std::size_t d = 0; d < dim; ++d) dst[d] /= n;
      labels[r] = static_cast<std::int64_t>(c);
    }
  }
  return LabeledEmbeddingSet(std::move(rows), std::move(labels),
                             static_cast<std::int64_t>(count), true);
}

}  // namespace protobank
