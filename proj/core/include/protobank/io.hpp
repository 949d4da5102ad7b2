#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "protobank/embedding.hpp"
#include "protobank/leakage.hpp"
#include "protobank/metrics.hpp"
#include "protobank/trainer.hpp"

namespace protobank {

// Embedding corpus format: magic "VIGE", version u16, dim u32, count u64,
// flags u32 (bit0 = rows unit-normalized), then count*dim little-endian
// float32 row-major. Labels live in a text sidecar at "<path>.labels", one
// decimal class id per line.
void write_embeddings(const LabeledEmbeddingSet& set, const std::string& path);
LabeledEmbeddingSet read_embeddings(const std::string& path);

// Training state format: magic "VIGP", version u16, dim u32, n_real u64,
// k_virtual u64, prototype rows as float64, then alpha f64, iteration u64,
// sigma f64 vector. Roundtrips bit-exactly.
struct Checkpoint {
  PrototypeBank bank;
  SigmaTracker tracker;
};
void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// Desk-scale stand-in for a real embedding corpus: per-id mean on the unit
// sphere, members = normalize(mean + N(0,1) * jitter). With concentration 0
// the means are uniform on the sphere; with concentration c > 0 they are
// normalize(c * axis + N(0,1)) around a seed-derived shared axis, i.e. the
// corpus occupies a cap of the sphere the way face embeddings do. Pairwise
// mean cosine is about c^2 / (c^2 + dim).
LabeledEmbeddingSet generate_synthetic_clusters(std::size_t n_ids, std::size_t per_id,
                                                std::size_t dim, double jitter,
                                                std::uint64_t seed,
                                                double concentration = 0.0);

// One score per line, aligned with an embedding set of expected_count rows.
QualityScoreSet read_quality_scores(const std::string& path, std::size_t expected_count);

// All CSV numbers use %.17g so text roundtrips are exact for doubles.
std::string format_double(double v);
double parse_double(const std::string& text);

void write_property_report_csv(const PropertyReport& report, const std::string& path);
PropertyReport read_property_report_csv(const std::string& path);

void write_histogram_csv(const Histogram& hist, const std::string& path);
Histogram read_histogram_csv(const std::string& path);

// query_id,rank,ref_id,cosine rows; rank is 1-based.
void write_leakage_csv(const LeakageReport& report, const std::string& path);
struct LeakageCsvRow {
  std::int64_t query_id = 0;
  std::size_t rank = 0;
  std::int64_t ref_id = 0;
  double cosine = 0.0;
};
std::vector<LeakageCsvRow> read_leakage_csv(const std::string& path);

void write_train_report_csv(const TrainReport& report, const std::string& path);
std::vector<CheckpointStats> read_train_report_csv(const std::string& path);
void write_train_report_text(const TrainReport& report, const TrainRunConfig& config,
                             const std::string& path);

// label,e0..e{D-1} rows for external plotting.
void write_tsne_csv(const LabeledEmbeddingSet& set, const std::string& path);

}  // namespace protobank
