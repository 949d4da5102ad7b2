#include "protobank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "detail/dot_kernel.hpp"
#include "protobank/errors.hpp"
#include "protobank/rng.hpp"

namespace protobank {

QualityScoreSet::QualityScoreSet(std::vector<double> scores) : scores_(std::move(scores)) {
  for (std::size_t i = 0; i < scores_.size(); ++i)
    if (!(scores_[i] >= 0.0 && scores_[i] <= 1.0))
      throw ValidationError("quality score at index " + std::to_string(i) +
                            " outside [0, 1]");
}

namespace {

std::vector<std::size_t> members_or_throw(const LabeledEmbeddingSet& set, std::int64_t cls) {
  if (cls < 0 || cls >= set.class_count())
    throw LabelOutOfRange(cls, set.class_count());
  std::vector<std::size_t> m = set.class_members(cls);
  if (m.empty()) throw EmptyClass(cls);
  return m;
}

}  // namespace

double class_consistency(const LabeledEmbeddingSet& set, std::int64_t cls) {
  std::vector<std::size_t> members = members_or_throw(set, cls);
  std::size_t dim = set.dim();
  std::vector<double> mean(dim, 0.0);
  for (std::size_t idx : members) {
    const double* row = set.matrix().row(idx);
    double n = std::sqrt(detail::dot_pair(row, row, dim));
    if (n <= 1e-12) throw ZeroNormRow(idx);
    for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d] / n;
  }
  double inv = 1.0 / static_cast<double>(members.size());
  for (std::size_t d = 0; d < dim; ++d) mean[d] *= inv;
  return detail::dot_pair(mean.data(), mean.data(), dim);
}

double class_separability(const ClassCenterSet& centers, std::int64_t cls) {
  std::size_t k = centers.centers.rows();
  if (k < 2) throw SingleClass();
  if (cls < 0 || static_cast<std::size_t>(cls) >= k)
    throw LabelOutOfRange(cls, static_cast<long long>(k));
  Matrix unit = normalize_rows(centers.centers);
  const double* ck = unit.row(static_cast<std::size_t>(cls));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == static_cast<std::size_t>(cls)) continue;
    sum += 1.0 - detail::dot_pair(ck, unit.row(i), unit.cols());
  }
  return sum / static_cast<double>(k - 1);
}

DiversityResult class_diversity(const QualityScoreSet& scores, const LabeledEmbeddingSet& set,
                                std::int64_t cls) {
  if (scores.size() != set.size())
    throw LengthMismatch("quality scores", scores.size(), set.size());
  std::vector<std::size_t> members = members_or_throw(set, cls);
  double mean = 0.0;
  for (std::size_t idx : members) mean += scores.scores()[idx];
  mean /= static_cast<double>(members.size());
  double var = 0.0;
  for (std::size_t idx : members) {
    double d = scores.scores()[idx] - mean;
    var += d * d;
  }
  var /= static_cast<double>(members.size());
  return {mean, var};
}

PropertyReport property_report(const LabeledEmbeddingSet& set, const QualityScoreSet* scores) {
  if (set.class_count() < 2) throw SingleClass();
  ClassCenterSet centers = class_centers(set);  // also proves no class is empty
  PropertyReport report;
  report.rows.reserve(static_cast<std::size_t>(set.class_count()));
  double csum = 0.0, ssum = 0.0, qsum = 0.0, dsum = 0.0;
  for (std::int64_t cls = 0; cls < set.class_count(); ++cls) {
    ClassPropertyRow row;
    row.class_id = cls;
    row.member_count = centers.counts[static_cast<std::size_t>(cls)];
    row.consistency = class_consistency(set, cls);
    row.separability = class_separability(centers, cls);
    if (scores) {
      DiversityResult div = class_diversity(*scores, set, cls);
      row.quality_mean = div.quality_mean;
      row.diversity = div.quality_variance;
      qsum += div.quality_mean;
      dsum += div.quality_variance;
    }
    csum += row.consistency;
    ssum += row.separability;
    report.rows.push_back(row);
  }
  double k = static_cast<double>(set.class_count());
  report.avg_consistency = csum / k;
  report.avg_separability = ssum / k;
  if (scores) {
    report.avg_quality_mean = qsum / k;
    report.avg_diversity = dsum / k;
  }
  return report;
}

void attach_baseline(PropertyReport& report, const PropertyReport& baseline,
                     const std::string& baseline_id) {
  auto ratio = [](double a, double b) {
    return b == 0.0 ? std::nan("") : a / b;
  };
  report.baseline_id = baseline_id;
  report.rel_consistency = ratio(report.avg_consistency, baseline.avg_consistency);
  report.rel_separability = ratio(report.avg_separability, baseline.avg_separability);
  if (report.avg_quality_mean && baseline.avg_quality_mean)
    report.rel_quality_mean = ratio(*report.avg_quality_mean, *baseline.avg_quality_mean);
  if (report.avg_diversity && baseline.avg_diversity)
    report.rel_diversity = ratio(*report.avg_diversity, *baseline.avg_diversity);
}

Matrix prototype_similarity_matrix(const PrototypeBank& bank, bool minmax_normalize) {
  Matrix sim = cosine_block(bank.matrix(), bank.matrix());
  if (!minmax_normalize) return sim;
  double lo = sim.data()[0], hi = sim.data()[0];
  for (std::size_t i = 0; i < sim.rows() * sim.cols(); ++i) {
    lo = std::min(lo, sim.data()[i]);
    hi = std::max(hi, sim.data()[i]);
  }
  double span = hi - lo;
  for (std::size_t i = 0; i < sim.rows() * sim.cols(); ++i)
    sim.data()[i] = span > 0.0 ? (sim.data()[i] - lo) / span : 0.0;
  return sim;
}

Histogram::Histogram(double lo_, double hi_, std::size_t bins) : lo(lo_), hi(hi_) {
  if (bins < 2) throw ValidationError("histogram needs >= 2 bins");
  if (!(lo < hi)) throw ValidationError("histogram needs lo < hi");
  counts.assign(bins, 0);
}

void Histogram::add(double v) {
  double t = (v - lo) / (hi - lo) * static_cast<double>(counts.size());
  auto bin = static_cast<long long>(std::floor(t));
  if (bin < 0) bin = 0;
  if (bin >= static_cast<long long>(counts.size()))
    bin = static_cast<long long>(counts.size()) - 1;
  counts[static_cast<std::size_t>(bin)]++;
}

std::uint64_t Histogram::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts) t += c;
  return t;
}

double Histogram::bin_left(std::size_t i) const {
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(counts.size());
}

double Histogram::bin_right(std::size_t i) const {
  return lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(counts.size());
}

namespace {

double row_cosine(const Matrix& m, std::size_t a, std::size_t b) {
  std::size_t d = m.cols();
  double num = detail::dot_pair(m.row(a), m.row(b), d);
  double na = std::sqrt(detail::dot_pair(m.row(a), m.row(a), d));
  double nb = std::sqrt(detail::dot_pair(m.row(b), m.row(b), d));
  if (na <= 1e-12) throw ZeroNormRow(a);
  if (nb <= 1e-12) throw ZeroNormRow(b);
  return num / (na * nb);
}

}  // namespace

SimilarityDistributions similarity_distributions(const LabeledEmbeddingSet& set,
                                                 std::size_t bins,
                                                 std::size_t max_pairs_per_class,
                                                 std::uint64_t seed) {
  if (set.class_count() < 2) throw SingleClass();
  if (max_pairs_per_class < 1) throw ValidationError("max_pairs_per_class must be >= 1");
  SimilarityDistributions out{Histogram(-1.0, 1.0, bins), Histogram(-1.0, 1.0, bins),
                              Histogram(-1.0, 1.0, bins)};
  std::size_t kc = static_cast<std::size_t>(set.class_count());
  std::vector<std::vector<std::size_t>> members(kc);
  for (std::size_t i = 0; i < set.size(); ++i)
    members[static_cast<std::size_t>(set.labels()[i])].push_back(i);
  for (std::size_t c = 0; c < kc; ++c)
    if (members[c].empty()) throw EmptyClass(static_cast<long long>(c));

  const Matrix& m = set.matrix();

  // same-class pairs
  for (std::size_t c = 0; c < kc; ++c) {
    const auto& mem = members[c];
    std::size_t n = mem.size();
    if (n < 2) continue;
    std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (total <= max_pairs_per_class) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          out.positive.add(row_cosine(m, mem[i], mem[j]));
    } else {
      auto eng = make_engine(derive_seed(seed, c));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t s = 0; s < max_pairs_per_class; ++s) {
        std::size_t i = pick(eng), j = pick(eng);
        while (j == i) j = pick(eng);
        out.positive.add(row_cosine(m, mem[i], mem[j]));
      }
    }
  }

  // center pairs
  ClassCenterSet centers = class_centers(set);
  Matrix unit_centers = normalize_rows(centers.centers);
  for (std::size_t a = 0; a < kc; ++a)
    for (std::size_t b = a + 1; b < kc; ++b)
      out.negative_centers.add(
          detail::dot_pair(unit_centers.row(a), unit_centers.row(b), unit_centers.cols()));

  // cross-class member pairs
  for (std::size_t a = 0; a < kc; ++a) {
    for (std::size_t b = a + 1; b < kc; ++b) {
      const auto& ma = members[a];
      const auto& mb = members[b];
      std::uint64_t total = static_cast<std::uint64_t>(ma.size()) * mb.size();
      if (total <= max_pairs_per_class) {
        for (std::size_t i : ma)
          for (std::size_t j : mb) out.negative_members.add(row_cosine(m, i, j));
      } else {
        auto eng = make_engine(derive_seed(seed, kc + a * kc + b));
        std::uniform_int_distribution<std::size_t> pa(0, ma.size() - 1);
        std::uniform_int_distribution<std::size_t> pb(0, mb.size() - 1);
        for (std::size_t s = 0; s < max_pairs_per_class; ++s)
          out.negative_members.add(row_cosine(m, ma[pa(eng)], mb[pb(eng)]));
      }
    }
  }
  return out;
}

double orthogonality_expectation(double n, double d) {
  if (!(n >= 1.0) || !std::isfinite(n))
    throw ValidationError("orthogonality_expectation needs n >= 1");
  if (!(d >= 1.0) || !std::isfinite(d))
    throw ValidationError("orthogonality_expectation needs d >= 1");
  return std::sqrt(std::log(n) / d);
}

}  // namespace protobank
