#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "protobank/errors.hpp"
#include "protobank/metrics.hpp"

using namespace protobank;
using testutil::random_matrix;
using testutil::random_unit_matrix;

namespace {

LabeledEmbeddingSet single_class(Matrix m) {
  std::vector<std::int64_t> labels(m.rows(), 0);
  return LabeledEmbeddingSet(std::move(m), std::move(labels), 1);
}

double naive_consistency(const Matrix& members) {
  Matrix unit = normalize_rows(members);
  double acc = 0.0;
  for (std::size_t i = 0; i < unit.rows(); ++i)
    for (std::size_t j = 0; j < unit.rows(); ++j)
      acc += testutil::naive_dot(unit.row(i), unit.row(j), unit.cols());
  return acc / double(unit.rows() * unit.rows());
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("consistency of identical members is one") {
  Matrix m(4, 3);
  for (std::size_t i = 0; i < 4; ++i) m.at(i, 1) = 2.5;  // same direction, any norm
  double c = class_consistency(single_class(std::move(m)), 0);
  CHECK(std::abs(c - 1.0) < 1e-12);
}

TEST_CASE("consistency of two orthogonal members is exactly one half") {
  Matrix m(2, 2);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = 1.0;
  CHECK(class_consistency(single_class(std::move(m)), 0) == 0.5);
}

TEST_CASE("consistency matches the mean-pairwise-cosine definition") {
  Matrix m = random_matrix(7, 5, 404, 2.0);
  double naive = naive_consistency(m);
  double got = class_consistency(single_class(Matrix(m)), 0);
  CHECK(std::abs(got - naive) <= 1e-12);

  // Row norms cancel: rescaling members changes nothing.
  Matrix scaled = m;
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (std::size_t t = 0; t < scaled.cols(); ++t) scaled.at(i, t) *= double(i + 1) * 0.7;
  double got2 = class_consistency(single_class(std::move(scaled)), 0);
  CHECK(std::abs(got2 - naive) < 1e-12);
}

TEST_CASE("consistency addresses the requested class only") {
  Matrix m(3, 2);
  m.at(0, 0) = 1.0;  // class 0
  m.at(1, 1) = 1.0;  // class 1
  m.at(2, 1) = 3.0;  // class 1, same direction
  LabeledEmbeddingSet set(std::move(m), {0, 1, 1}, 2);
  CHECK(std::abs(class_consistency(set, 0) - 1.0) < 1e-12);
  CHECK(std::abs(class_consistency(set, 1) - 1.0) < 1e-12);
  CHECK_THROWS_AS(class_consistency(set, 2), LabelOutOfRange);
}

TEST_CASE("separability on axis-aligned centers") {
  Matrix centers(3, 3);
  centers.at(0, 0) = 1.0;
  centers.at(1, 1) = 1.0;
  centers.at(2, 2) = 1.0;
  ClassCenterSet set{std::move(centers), {1, 1, 1}};
  // All other centers orthogonal: mean (1 - 0) = 1.
  CHECK(std::abs(class_separability(set, 0) - 1.0) < 1e-12);
  CHECK(std::abs(class_separability(set, 2) - 1.0) < 1e-12);

  Matrix same(2, 2);
  same.at(0, 0) = 1.0;
  same.at(1, 0) = 5.0;  // same direction, different norm
  ClassCenterSet dup{std::move(same), {1, 1}};
  CHECK(std::abs(class_separability(dup, 0) - 0.0) < 1e-12);
}

TEST_CASE("separability matches a naive loop") {
  Matrix centers = random_matrix(6, 9, 505);
  ClassCenterSet set{Matrix(centers), {2, 2, 2, 2, 2, 2}};
  for (std::int64_t k = 0; k < 6; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      if (j == std::size_t(k)) continue;
      acc += 1.0 - testutil::naive_cosine(centers, std::size_t(k), centers, j);
    }
    CHECK(std::abs(class_separability(set, k) - acc / 5.0) <= 1e-12);
  }
  ClassCenterSet one{random_matrix(1, 4, 3), {5}};
  CHECK_THROWS_AS(class_separability(one, 0), SingleClass);
  CHECK_THROWS_AS(class_separability(set, 6), LabelOutOfRange);
}

TEST_CASE("diversity is the population variance of member scores") {
  Matrix m = random_matrix(4, 2, 606);
  LabeledEmbeddingSet set(std::move(m), {0, 0, 1, 1}, 2);

  QualityScoreSet scores({0.0, 1.0, 0.7, 0.7});
  DiversityResult d0 = class_diversity(scores, set, 0);
  CHECK(d0.quality_mean == 0.5);
  CHECK(d0.quality_variance == 0.25);
  DiversityResult d1 = class_diversity(scores, set, 1);
  CHECK(d1.quality_mean == doctest::Approx(0.7));
  CHECK(d1.quality_variance == doctest::Approx(0.0).epsilon(1e-15));

  CHECK_THROWS_AS(class_diversity(QualityScoreSet({0.1, 0.2}), set, 0), LengthMismatch);
  CHECK_THROWS_AS(QualityScoreSet({0.5, 1.2}), ValidationError);
  CHECK_THROWS_AS(QualityScoreSet({-0.1}), ValidationError);
}

TEST_CASE("diversity matches a naive loop on random scores") {
  const std::size_t n = 30;
  Matrix m = random_matrix(n, 2, 707);
  std::vector<std::int64_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = std::int64_t(i % 3);
  std::vector<double> s(n);
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : s) v = uni(eng);
  LabeledEmbeddingSet set(std::move(m), labels, 3);
  QualityScoreSet scores(s);
  for (std::int64_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == c) {
        mean += s[i];
        ++count;
      }
    mean /= double(count);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == c) var += (s[i] - mean) * (s[i] - mean);
    var /= double(count);
    DiversityResult d = class_diversity(scores, set, c);
    CHECK(std::abs(d.quality_mean - mean) <= 1e-15);
    CHECK(std::abs(d.quality_variance - var) <= 1e-15);
  }
}

TEST_CASE("property_report aggregates per-class rows") {
  // Two tight clusters along different axes plus quality scores.
  Matrix m(4, 3);
  m.at(0, 0) = 1.0;
  m.at(1, 0) = 1.0;
  m.at(2, 1) = 1.0;
  m.at(3, 1) = 1.0;
  LabeledEmbeddingSet set(std::move(m), {0, 0, 1, 1}, 2, true);
  QualityScoreSet scores({0.2, 0.4, 0.6, 0.8});
  PropertyReport rep = property_report(set, &scores);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].class_id == 0);
  CHECK(rep.rows[0].member_count == 2);
  CHECK(std::abs(rep.rows[0].consistency - 1.0) < 1e-12);
  CHECK(std::abs(rep.rows[0].separability - 1.0) < 1e-12);
  CHECK(rep.rows[0].quality_mean.value() == doctest::Approx(0.3));
  CHECK(rep.rows[1].quality_mean.value() == doctest::Approx(0.7));
  CHECK(std::abs(rep.avg_consistency - 1.0) < 1e-12);
  CHECK(std::abs(rep.avg_separability - 1.0) < 1e-12);
  CHECK(rep.avg_quality_mean.value() == doctest::Approx(0.5));
  CHECK(rep.avg_diversity.value() == doctest::Approx(0.01));
  CHECK_FALSE(rep.baseline_id.has_value());

  PropertyReport plain = property_report(set);
  CHECK_FALSE(plain.avg_quality_mean.has_value());
  CHECK_FALSE(plain.rows[0].quality_mean.has_value());

  // Average is the unweighted mean of the per-class rows.
  double c_mean = 0.0, s_mean = 0.0;
  for (const auto& row : rep.rows) {
    c_mean += row.consistency;
    s_mean += row.separability;
  }
  CHECK(rep.avg_consistency == doctest::Approx(c_mean / 2.0));
  CHECK(rep.avg_separability == doctest::Approx(s_mean / 2.0));
}

TEST_CASE("attach_baseline stores ratios of averages") {
  Matrix m = random_unit_matrix(12, 8, 808);
  std::vector<std::int64_t> labels;
  for (std::size_t i = 0; i < 12; ++i) labels.push_back(std::int64_t(i % 3));
  LabeledEmbeddingSet set(std::move(m), labels, 3, true);
  PropertyReport rep = property_report(set);
  PropertyReport base = rep;
  attach_baseline(rep, base, "real-v1");
  CHECK(rep.baseline_id.value() == "real-v1");
  CHECK(rep.rel_consistency.value() == doctest::Approx(1.0));
  CHECK(rep.rel_separability.value() == doctest::Approx(1.0));
  CHECK_FALSE(rep.rel_quality_mean.has_value());  // no scores on either side
}

TEST_CASE("property_report needs at least two classes") {
  Matrix m = random_unit_matrix(5, 4, 909);
  LabeledEmbeddingSet set(std::move(m), {0, 0, 0, 0, 0}, 1, true);
  CHECK_THROWS_AS(property_report(set), SingleClass);
}

TEST_CASE("prototype_similarity_matrix raw and minmax forms") {
  Matrix m(3, 2);
  m.at(0, 0) = 1.0;
  m.at(1, 1) = 1.0;
  m.at(2, 0) = -1.0;
  PrototypeBank bank(std::move(m), 2, 1);

  Matrix raw = prototype_similarity_matrix(bank, false);
  REQUIRE(raw.rows() == 3);
  CHECK(std::abs(raw.at(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(raw.at(0, 1) - 0.0) < 1e-12);
  CHECK(std::abs(raw.at(0, 2) + 1.0) < 1e-12);

  // minmax maps [-1, 1] onto [0, 1] here and preserves order.
  Matrix norm = prototype_similarity_matrix(bank, true);
  CHECK(norm.at(0, 0) == doctest::Approx(1.0));
  CHECK(norm.at(0, 1) == doctest::Approx(0.5));
  CHECK(norm.at(0, 2) == doctest::Approx(0.0));
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(norm.data()[i] >= 0.0);
    CHECK(norm.data()[i] <= 1.0);
  }
  for (std::size_t a = 0; a < 9; ++a)
    for (std::size_t b = 0; b < 9; ++b)
      if (raw.data()[a] < raw.data()[b]) CHECK(norm.data()[a] <= norm.data()[b]);

  // Constant similarity (single row) maps to zero.
  PrototypeBank single(random_matrix(1, 4, 17), 1, 0);
  Matrix z = prototype_similarity_matrix(single, true);
  CHECK(z.at(0, 0) == 0.0);
}

TEST_CASE("histogram clamps out-of-range values into edge bins") {
  Histogram h(-1.0, 1.0, 4);
  h.add(-0.9);
  h.add(-2.0);  // clamps low
  h.add(0.1);
  h.add(0.9);
  h.add(1.0);  // upper edge stays in the last bin
  h.add(5.0);  // clamps high
  CHECK(h.counts[0] == 2);
  CHECK(h.counts[2] == 1);
  CHECK(h.counts[3] == 3);
  CHECK(h.total() == 6);
  CHECK(h.bin_left(0) == -1.0);
  CHECK(h.bin_right(3) == 1.0);
  CHECK(h.bin_left(2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(Histogram(-1.0, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(Histogram(1.0, -1.0, 4), ValidationError);
}

TEST_CASE("similarity_distributions splits pair populations") {
  // Class 0: two copies of e_x. Class 1: two copies of e_y.
  Matrix m(4, 2);
  m.at(0, 0) = 1.0;
  m.at(1, 0) = 1.0;
  m.at(2, 1) = 1.0;
  m.at(3, 1) = 1.0;
  LabeledEmbeddingSet set(std::move(m), {0, 0, 1, 1}, 2, true);
  SimilarityDistributions dist = similarity_distributions(set, 8, 1000, 0);

  // Positive pairs: one per class, both at cos = 1 -> last bin.
  CHECK(dist.positive.total() == 2);
  CHECK(dist.positive.counts[7] == 2);
  // Center pairs: single (0, 1) pair at cos = 0.
  CHECK(dist.negative_centers.total() == 1);
  CHECK(dist.negative_centers.counts[4] == 1);
  // Cross-class member pairs: 2 x 2 at cos = 0.
  CHECK(dist.negative_members.total() == 4);
  CHECK(dist.negative_members.counts[4] == 4);
}

TEST_CASE("similarity_distributions enumerates exactly under the cap") {
  const std::size_t per = 6, classes = 4;
  Matrix m = random_unit_matrix(per * classes, 10, 1010);
  std::vector<std::int64_t> labels(per * classes);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = std::int64_t(i / per);
  LabeledEmbeddingSet set(std::move(m), labels, classes, true);

  SimilarityDistributions dist = similarity_distributions(set, 16, 100000, 3);
  // Same-class unordered pairs: C(6,2) = 15 per class.
  CHECK(dist.positive.total() == 15 * classes);
  // Center pairs: C(4,2) = 6.
  CHECK(dist.negative_centers.total() == 6);
  // Cross-class member pairs: 6 * 6 per class pair.
  CHECK(dist.negative_members.total() == 36 * 6);

  // Exact enumeration ignores the seed.
  SimilarityDistributions dist2 = similarity_distributions(set, 16, 100000, 99);
  CHECK(dist.positive.counts == dist2.positive.counts);
  CHECK(dist.negative_members.counts == dist2.negative_members.counts);
}

TEST_CASE("similarity_distributions samples with replacement over the cap") {
  const std::size_t per = 40, classes = 3;
  Matrix m = random_unit_matrix(per * classes, 6, 1111);
  std::vector<std::int64_t> labels(per * classes);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = std::int64_t(i / per);
  LabeledEmbeddingSet set(std::move(m), labels, classes, true);

  // C(40,2) = 780 and 40*40 = 1600 both exceed the cap of 50.
  SimilarityDistributions dist = similarity_distributions(set, 16, 50, 5);
  CHECK(dist.positive.total() == 50 * classes);
  CHECK(dist.negative_members.total() == 50 * 3);  // 3 class pairs
  CHECK(dist.negative_centers.total() == 3);       // centers never capped

  SimilarityDistributions same = similarity_distributions(set, 16, 50, 5);
  CHECK(dist.positive.counts == same.positive.counts);
  SimilarityDistributions other = similarity_distributions(set, 16, 50, 6);
  CHECK(dist.positive.counts != other.positive.counts);

  CHECK_THROWS_AS(similarity_distributions(set, 1, 50, 5), ValidationError);
  Matrix m1 = random_unit_matrix(3, 6, 1);
  LabeledEmbeddingSet one(std::move(m1), {0, 0, 0}, 1, true);
  CHECK_THROWS_AS(similarity_distributions(one, 16, 50, 5), SingleClass);
}

TEST_CASE("orthogonality_expectation closed form") {
  CHECK(orthogonality_expectation(1.0, 64.0) == 0.0);
  CHECK(std::abs(orthogonality_expectation(std::exp(16.0), 16.0) - 1.0) < 1e-12);
  CHECK(std::abs(orthogonality_expectation(100.0, 512.0) -
                 std::sqrt(std::log(100.0) / 512.0)) < 1e-15);
  // Monotone: more vectors -> higher floor; more dimensions -> lower.
  CHECK(orthogonality_expectation(1000.0, 64.0) > orthogonality_expectation(100.0, 64.0));
  CHECK(orthogonality_expectation(1000.0, 128.0) < orthogonality_expectation(1000.0, 64.0));
  CHECK_THROWS_AS(orthogonality_expectation(0.5, 64.0), ValidationError);
  CHECK_THROWS_AS(orthogonality_expectation(10.0, 0.0), ValidationError);
}

TEST_SUITE_END();
