#include "protobank/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "detail/dot_kernel.hpp"
#include "detail/parallel.hpp"
#include "protobank/errors.hpp"

namespace protobank {

std::size_t worker_count() {
  if (const char* env = std::getenv("PROTOBANK_WORKERS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

double vector_norm(const std::vector<double>& v) {
  return std::sqrt(detail::dot_pair(v.data(), v.data(), v.size()));
}

EmbeddingVector normalized(const EmbeddingVector& v) {
  double n = vector_norm(v.values);
  if (n <= 1e-12) throw ZeroNormRow(0, "embedding vector");
  EmbeddingVector out{v.values, true};
  for (double& x : out.values) x /= n;
  return out;
}

LabeledEmbeddingSet::LabeledEmbeddingSet(Matrix matrix, std::vector<std::int64_t> labels,
                                         std::int64_t class_count, bool unit)
    : matrix_(std::move(matrix)), labels_(std::move(labels)), class_count_(class_count),
      unit_(unit) {
  if (labels_.size() != matrix_.rows())
    throw LengthMismatch("labels", labels_.size(), matrix_.rows());
  if (class_count_ < 1) throw ValidationError("class_count must be >= 1");
  for (std::size_t i = 0; i < matrix_.rows() * matrix_.cols(); ++i)
    if (!std::isfinite(matrix_.data()[i])) throw NonFiniteInput("embedding matrix");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] < 0 || labels_[i] >= class_count_)
      throw LabelOutOfRange(labels_[i], class_count_);
  if (unit_) {
    for (std::size_t i = 0; i < matrix_.rows(); ++i) {
      double n = std::sqrt(detail::dot_pair(matrix_.row(i), matrix_.row(i), matrix_.cols()));
      if (std::abs(n - 1.0) > 1e-6)
        throw ValidationError("unit flag set but row " + std::to_string(i) + " has norm " +
                              std::to_string(n));
    }
  }
}

std::vector<std::size_t> LabeledEmbeddingSet::class_members(std::int64_t cls) const {
  if (cls < 0 || cls >= class_count_) throw LabelOutOfRange(cls, class_count_);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == cls) out.push_back(i);
  return out;
}

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    out[i] = std::sqrt(detail::dot_pair(m.row(i), m.row(i), m.cols()));
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double n = std::sqrt(detail::dot_pair(m.row(i), m.row(i), m.cols()));
    if (n <= 1e-12) throw ZeroNormRow(i);
    const double* src = m.row(i);
    double* dst = out.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j] / n;
  }
  return out;
}

namespace {

void check_norms(const std::vector<double>& norms, const char* side) {
  for (std::size_t i = 0; i < norms.size(); ++i)
    if (norms[i] <= 1e-12) throw ZeroNormRow(i, side);
}

}  // namespace

Matrix cosine_block(const Matrix& a, const Matrix& b, std::size_t block) {
  if (a.cols() != b.cols()) throw DimensionMismatch(b.cols(), a.cols());
  if (block < 1) throw ValidationError("block must be >= 1");
  std::vector<double> na = row_norms(a), nb = row_norms(b);
  check_norms(na, "left operand");
  check_norms(nb, "right operand");

  Matrix out(a.rows(), b.rows());
  std::size_t d = a.cols();
  detail::parallel_ranges(a.rows(), worker_count(), [&](std::size_t, std::size_t lo,
                                                        std::size_t hi) {
    for (std::size_t i0 = lo; i0 < hi; i0 += block) {
      std::size_t in = std::min(block, hi - i0);
      for (std::size_t j0 = 0; j0 < b.rows(); j0 += block) {
        std::size_t jn = std::min(block, b.rows() - j0);
        detail::dot_block(a.row(i0), in, b.row(j0), jn, d, &out(i0, j0), out.cols());
      }
    }
  });
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* r = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] /= na[i] * nb[j];
  }
  return out;
}

ClassCenterSet class_centers(const LabeledEmbeddingSet& set) {
  std::size_t k = static_cast<std::size_t>(set.class_count());
  ClassCenterSet out{Matrix(k, set.dim()), std::vector<std::size_t>(k, 0)};
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::size_t cls = static_cast<std::size_t>(set.labels()[i]);
    out.counts[cls]++;
    const double* src = set.matrix().row(i);
    double* dst = out.centers.row(cls);
    for (std::size_t j = 0; j < set.dim(); ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (out.counts[c] == 0) throw EmptyClass(static_cast<long long>(c));
    double* dst = out.centers.row(c);
    for (std::size_t j = 0; j < set.dim(); ++j) dst[j] /= static_cast<double>(out.counts[c]);
  }
  return out;
}

double max_offdiag_cosine(const Matrix& m, std::size_t block) {
  if (m.rows() < 2) throw ValidationError("max_offdiag_cosine needs >= 2 rows");
  if (block < 1) throw ValidationError("block must be >= 1");
  Matrix unit = normalize_rows(m);
  std::size_t n = unit.rows(), d = unit.cols();
  std::size_t workers = worker_count();
  std::vector<double> partial(workers, -2.0);

  // Upper triangle only, streamed block-row by block-row. Each worker owns a
  // contiguous range of block-rows and a private max.
  std::vector<std::size_t> starts;
  for (std::size_t i0 = 0; i0 < n; i0 += block) starts.push_back(i0);
  detail::parallel_ranges(starts.size(), workers, [&](std::size_t w, std::size_t lo,
                                                      std::size_t hi) {
    std::vector<double> buf(block * block);
    double best = -2.0;
    for (std::size_t s = lo; s < hi; ++s) {
      std::size_t i0 = starts[s], in = std::min(block, n - i0);
      for (std::size_t j0 = i0; j0 < n; j0 += block) {
        std::size_t jn = std::min(block, n - j0);
        detail::dot_block(unit.row(i0), in, unit.row(j0), jn, d, buf.data(), block);
        for (std::size_t i = 0; i < in; ++i)
          for (std::size_t j = 0; j < jn; ++j)
            if (i0 + i < j0 + j) best = std::max(best, buf[i * block + j]);
      }
    }
    partial[w] = best;
  });
  double best = -2.0;
  for (double v : partial) best = std::max(best, v);
  return best;
}

CosineStats cosine_stats(const Matrix& a, const Matrix& b, bool offdiag) {
  Matrix c = cosine_block(a, b);
  double sum = 0.0, mx = -2.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) {
      if (offdiag && i == j) continue;
      sum += c(i, j);
      mx = std::max(mx, c(i, j));
      ++count;
    }
  if (count == 0) {
    double nan = std::nan("");
    return {nan, nan};
  }
  return {sum / static_cast<double>(count), mx};
}

}  // namespace protobank
