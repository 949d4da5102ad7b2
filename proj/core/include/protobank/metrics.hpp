#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protobank/embedding.hpp"
#include "protobank/matrix.hpp"
#include "protobank/trainer.hpp"

namespace protobank {

// Per-embedding quality scores in [0, 1].
class QualityScoreSet {
 public:
  explicit QualityScoreSet(std::vector<double> scores);
  const std::vector<double>& scores() const { return scores_; }
  std::size_t size() const { return scores_.size(); }

 private:
  std::vector<double> scores_;
};

// Mean pairwise cosine among a class's unit-normalized members, self-pairs
// included: (1/N^2) sum_ij cos(x_i, x_j) = ||mean x_hat||^2.
double class_consistency(const LabeledEmbeddingSet& set, std::int64_t cls);

// Mean cosine distance from class k's center to every other center:
// (1/(K-1)) sum_{i != k} (1 - cos(c_k, c_i)). Needs K >= 2.
double class_separability(const ClassCenterSet& centers, std::int64_t cls);

// Mean and population variance of the quality scores of class k's members.
struct DiversityResult {
  double quality_mean = 0.0;
  double quality_variance = 0.0;  // 1/N normalization
};
DiversityResult class_diversity(const QualityScoreSet& scores, const LabeledEmbeddingSet& set,
                                std::int64_t cls);

struct ClassPropertyRow {
  std::int64_t class_id = 0;
  std::size_t member_count = 0;
  double consistency = 0.0;
  double separability = 0.0;
  std::optional<double> quality_mean;
  std::optional<double> diversity;
};

struct PropertyReport {
  std::vector<ClassPropertyRow> rows;  // one per class, ascending id
  double avg_consistency = 0.0;
  double avg_separability = 0.0;
  std::optional<double> avg_quality_mean;
  std::optional<double> avg_diversity;
  // Filled when a baseline is attached: this report's averages divided by
  // the baseline's (quality ratios only when both sides carry scores).
  std::optional<std::string> baseline_id;
  std::optional<double> rel_consistency;
  std::optional<double> rel_separability;
  std::optional<double> rel_quality_mean;
  std::optional<double> rel_diversity;
};

// Per-class consistency/separability (plus quality stats when scores are
// given) and unweighted dataset averages. Needs K >= 2.
PropertyReport property_report(const LabeledEmbeddingSet& set,
                               const QualityScoreSet* scores = nullptr);

void attach_baseline(PropertyReport& report, const PropertyReport& baseline,
                     const std::string& baseline_id);

// Full pairwise cosine matrix of the bank rows. With minmax_normalize the
// entries are mapped through (v - min) / (max - min); a constant matrix maps
// to all zeros.
Matrix prototype_similarity_matrix(const PrototypeBank& bank, bool minmax_normalize);

// Fixed-width histogram over [lo, hi]; out-of-range values clamp to the edge
// bins so no mass is dropped.
struct Histogram {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<std::uint64_t> counts;

  Histogram(double lo_, double hi_, std::size_t bins);
  void add(double v);
  std::uint64_t total() const;
  double bin_left(std::size_t i) const;
  double bin_right(std::size_t i) const;
};

struct SimilarityDistributions {
  Histogram positive;          // same-class member pairs
  Histogram negative_centers;  // class-center pairs
  Histogram negative_members;  // cross-class member pairs
};

// Cosine histograms over [-1, 1]. Same-class and cross-class member pair
// streams enumerate exactly when the pair count fits under
// max_pairs_per_class, otherwise draw that many pairs with replacement,
// seeded per class (pair) via the run seed. Needs K >= 2 and bins >= 2.
SimilarityDistributions similarity_distributions(const LabeledEmbeddingSet& set,
                                                 std::size_t bins,
                                                 std::size_t max_pairs_per_class,
                                                 std::uint64_t seed);

// Expected near-orthogonality level for n unit vectors in dimension d:
// sqrt(ln(n) / d). Needs n >= 1 (n may be fractional, e.g. scaling sweeps)
// and d >= 1.
double orthogonality_expectation(double n, double d);

}  // namespace protobank
