#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "protobank/matrix.hpp"

namespace protobank {

inline constexpr std::size_t kDefaultBlock = 256;

// Worker threads used by the blocked kernels: PROTOBANK_WORKERS if set to a
// positive integer, otherwise std::thread::hardware_concurrency().
std::size_t worker_count();

// One embedding; `unit` promises ||values|| == 1 within 1e-9.
struct EmbeddingVector {
  std::vector<double> values;
  bool unit = false;
};

double vector_norm(const std::vector<double>& v);
EmbeddingVector normalized(const EmbeddingVector& v);  // ZeroNormRow on norm <= 1e-12

// M x D embedding rows with per-row integer class labels in [0, class_count).
class LabeledEmbeddingSet {
 public:
  // Validates: labels.size() == matrix.rows(), every label in range,
  // class_count >= 1, all values finite. `unit` additionally asserts every
  // row norm within 1e-6 of 1.
  LabeledEmbeddingSet(Matrix matrix, std::vector<std::int64_t> labels,
                      std::int64_t class_count, bool unit = false);

  const Matrix& matrix() const { return matrix_; }
  const std::vector<std::int64_t>& labels() const { return labels_; }
  std::int64_t class_count() const { return class_count_; }
  bool unit() const { return unit_; }
  std::size_t size() const { return matrix_.rows(); }
  std::size_t dim() const { return matrix_.cols(); }

  std::vector<std::size_t> class_members(std::int64_t cls) const;

 private:
  Matrix matrix_;
  std::vector<std::int64_t> labels_;
  std::int64_t class_count_ = 0;
  bool unit_ = false;
};

// Per-class mean vectors; counts[k] >= 1 for every class.
struct ClassCenterSet {
  Matrix centers;                    // K x D
  std::vector<std::size_t> counts;   // K
};

// Euclidean norm of each row.
std::vector<double> row_norms(const Matrix& m);

// Rows scaled to unit norm; ZeroNormRow if any row norm <= 1e-12.
Matrix normalize_rows(const Matrix& m);

// All pairwise cosines, a.rows() x b.rows(), computed in `block`-row tiles.
// The result is bit-identical for every block >= 1 and worker count.
Matrix cosine_block(const Matrix& a, const Matrix& b, std::size_t block = kDefaultBlock);

// Mean embedding per class. EmptyClass if some class id has no member.
ClassCenterSet class_centers(const LabeledEmbeddingSet& set);

// Largest off-diagonal pairwise cosine of m's rows, streamed so the full
// similarity matrix is never materialized. Requires m.rows() >= 2.
double max_offdiag_cosine(const Matrix& m, std::size_t block = kDefaultBlock);

// Mean and max over a set of cosines.
struct CosineStats {
  double mean = 0.0;
  double max = 0.0;
};

// Stats over all (i, j) pairs between rows of a and b; when `offdiag` is set
// (for a == b uses) pairs with equal index are skipped.
CosineStats cosine_stats(const Matrix& a, const Matrix& b, bool offdiag);

}  // namespace protobank
