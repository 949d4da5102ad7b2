#include "protobank/leakage.hpp"

#include <algorithm>
#include <cmath>

#include "detail/dot_kernel.hpp"
#include "detail/parallel.hpp"
#include "protobank/errors.hpp"

namespace protobank {

namespace {

// Keeps the j best hits in descending cosine order. Strictly-greater
// displacement plus ascending-id scan order implements the tie rule (equal
// cosine -> lower ref id ranks first) without comparing ids.
struct TopJ {
  explicit TopJ(std::size_t j) : limit(j) { hits.reserve(j); }

  void offer(std::int64_t id, double cosine) {
    if (hits.size() == limit && cosine <= hits.back().cosine) return;
    std::size_t pos = hits.size();
    while (pos > 0 && hits[pos - 1].cosine < cosine) --pos;
    hits.insert(hits.begin() + static_cast<std::ptrdiff_t>(pos), NeighborHit{id, cosine});
    if (hits.size() > limit) hits.pop_back();
  }

  std::size_t limit;
  std::vector<NeighborHit> hits;
};

// Streaming top-j of ref rows against each query row. skip_equal_index drops
// the (i, i) pair, which turns the scan into the self-baseline.
std::vector<std::vector<NeighborHit>> scan_top(const Matrix& queries_unit,
                                               const Matrix& refs_unit, std::size_t top_j,
                                               std::size_t block, bool skip_equal_index) {
  std::size_t nq = queries_unit.rows(), nr = refs_unit.rows(), d = queries_unit.cols();
  std::vector<std::vector<NeighborHit>> result(nq);
  detail::parallel_ranges(nq, worker_count(), [&](std::size_t, std::size_t lo, std::size_t hi) {
    if (lo == hi) return;
    std::vector<TopJ> best;
    best.reserve(hi - lo);
    for (std::size_t q = lo; q < hi; ++q) best.emplace_back(top_j);
    // Reference blocks stay L2-resident while query rows stream past in
    // 6-row tiles (the register-tile height of dot_block).
    std::vector<double> buf(6 * block);
    for (std::size_t r0 = 0; r0 < nr; r0 += block) {
      std::size_t rn = std::min(block, nr - r0);
      for (std::size_t q0 = lo; q0 < hi; q0 += 6) {
        std::size_t qn = std::min<std::size_t>(6, hi - q0);
        detail::dot_block(queries_unit.row(q0), qn, refs_unit.row(r0), rn, d, buf.data(),
                          block);
        for (std::size_t qi = 0; qi < qn; ++qi) {
          TopJ& tj = best[q0 - lo + qi];
          const double* row = buf.data() + qi * block;
          for (std::size_t ri = 0; ri < rn; ++ri) {
            if (skip_equal_index && q0 + qi == r0 + ri) continue;
            tj.offer(static_cast<std::int64_t>(r0 + ri), row[ri]);
          }
        }
      }
    }
    for (std::size_t q = lo; q < hi; ++q) result[q] = std::move(best[q - lo].hits);
  });
  return result;
}

double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty set");
  std::sort(values.begin(), values.end());
  if (q >= 1.0) return values.back();
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(i);
  if (i + 1 >= values.size()) return values.back();
  return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

}  // namespace

LeakageReport leakage_audit(const ClassCenterSet& queries, const ClassCenterSet& reference,
                            std::size_t top_j, std::size_t hist_bins, std::size_t block) {
  if (reference.centers.rows() == 0) throw EmptyReference();
  if (queries.centers.rows() == 0) throw ValidationError("query set has no classes");
  if (queries.centers.cols() != reference.centers.cols())
    throw DimensionMismatch(queries.centers.cols(), reference.centers.cols());
  if (top_j < 1) throw ValidationError("top_j must be >= 1");
  if (block < 1) throw ValidationError("block must be >= 1");

  Matrix q_unit = normalize_rows(queries.centers);
  Matrix r_unit = normalize_rows(reference.centers);
  std::size_t j = std::min(top_j, r_unit.rows());  // effective neighbor count

  LeakageReport report{j,
                       {},
                       Histogram(-1.0, 1.0, hist_bins),
                       {},
                       Histogram(-1.0, 1.0, hist_bins)};
  auto hits = scan_top(q_unit, r_unit, j, block, false);
  report.queries.resize(hits.size());
  for (std::size_t q = 0; q < hits.size(); ++q) {
    report.queries[q].query_id = static_cast<std::int64_t>(q);
    report.queries[q].top = std::move(hits[q]);
    report.top1_histogram.add(report.queries[q].top.front().cosine);
  }
  return report;
}

std::vector<double> reference_self_baseline(const ClassCenterSet& reference,
                                            std::size_t block) {
  if (reference.centers.rows() == 0) throw EmptyReference();
  if (reference.centers.rows() < 2)
    throw SingleClass("SingleClass: self-baseline needs >= 2 reference classes");
  Matrix unit = normalize_rows(reference.centers);
  auto hits = scan_top(unit, unit, 1, block, true);
  std::vector<double> out(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) out[i] = hits[i].front().cosine;
  return out;
}

LeakageReport leakage_audit_with_baseline(const ClassCenterSet& queries,
                                          const ClassCenterSet& reference, std::size_t top_j,
                                          std::size_t hist_bins, std::size_t block) {
  LeakageReport report = leakage_audit(queries, reference, top_j, hist_bins, block);
  report.baseline_nearest = reference_self_baseline(reference, block);
  for (double v : report.baseline_nearest) report.baseline_histogram.add(v);
  return report;
}

LeakageVerdict leakage_verdict(const LeakageReport& report, double quantile) {
  if (!(quantile > 0.0 && quantile <= 1.0))
    throw ValidationError("quantile must be in (0, 1]");
  if (report.queries.empty()) throw ValidationError("report has no queries");
  if (!report.has_baseline()) throw ValidationError("report has no baseline");
  std::vector<double> top1(report.queries.size());
  for (std::size_t i = 0; i < top1.size(); ++i) top1[i] = report.queries[i].top.front().cosine;
  LeakageVerdict v;
  v.quantile = quantile;
  v.query_quantile = quantile_of(std::move(top1), quantile);
  v.baseline_quantile = quantile_of(report.baseline_nearest, quantile);
  v.margin = v.baseline_quantile - v.query_quantile;
  v.clean = v.query_quantile < v.baseline_quantile;
  return v;
}

}  // namespace protobank
