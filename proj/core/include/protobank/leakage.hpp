#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "protobank/embedding.hpp"
#include "protobank/metrics.hpp"

namespace protobank {

struct NeighborHit {
  std::int64_t ref_id = -1;
  double cosine = -2.0;
};

struct QueryTopMatches {
  std::int64_t query_id = 0;
  std::vector<NeighborHit> top;  // descending cosine; equal cosines keep the lower ref id first
};

struct LeakageReport {
  std::size_t top_j = 0;
  std::vector<QueryTopMatches> queries;
  Histogram top1_histogram;               // query top-1 cosines
  std::vector<double> baseline_nearest;   // per reference class: nearest other-class cosine
  Histogram baseline_histogram;

  bool has_baseline() const { return !baseline_nearest.empty(); }
};

// For every query class center, its top_j nearest reference class centers by
// cosine, streamed over reference blocks so the full similarity matrix is
// never materialized. Workers split the query rows; each (query, ref) pair
// is scored by exactly one worker in a fixed scan order, so results do not
// depend on the worker count or block size.
LeakageReport leakage_audit(const ClassCenterSet& queries, const ClassCenterSet& reference,
                            std::size_t top_j, std::size_t hist_bins = 64,
                            std::size_t block = kDefaultBlock);

// Nearest other-class cosine for every class within the reference corpus
// itself; the self pair is excluded. Needs >= 2 reference classes.
std::vector<double> reference_self_baseline(const ClassCenterSet& reference,
                                            std::size_t block = kDefaultBlock);

// Computes the audit and attaches the self-baseline in one call.
LeakageReport leakage_audit_with_baseline(const ClassCenterSet& queries,
                                          const ClassCenterSet& reference, std::size_t top_j,
                                          std::size_t hist_bins = 64,
                                          std::size_t block = kDefaultBlock);

struct LeakageVerdict {
  bool clean = false;       // true when the query quantile sits below the baseline quantile
  double query_quantile = 0.0;
  double baseline_quantile = 0.0;
  double margin = 0.0;      // baseline_quantile - query_quantile; positive is clean
  double quantile = 1.0;
};

// Compares the `quantile` (default 1.0 = max) of query top-1 cosines against
// the same quantile of the reference self-baseline. A synthetic corpus
// leaks identities when its centers sit closer to the reference corpus than
// the reference classes sit to each other; `clean` is the negation of that.
LeakageVerdict leakage_verdict(const LeakageReport& report, double quantile = 1.0);

}  // namespace protobank
