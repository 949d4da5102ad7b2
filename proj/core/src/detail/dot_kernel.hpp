#pragma once

#include <cstddef>
#include <cstring>

// Row-dot kernel shared by every pairwise-similarity path. The contract that
// everything downstream leans on: the accumulation order for one (a, b) row
// pair is a function of the dimension only — 8-wide chunks in index order,
// one fixed horizontal-sum tree, then the scalar tail in index order. Tile
// shape, cache blocking, and worker partitioning therefore cannot change any
// result bit.

namespace protobank::detail {

typedef double v8df __attribute__((vector_size(64)));

inline v8df load8(const double* p) {
  v8df v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

inline double hsum8(v8df v) {
  return ((v[0] + v[4]) + (v[1] + v[5])) + ((v[2] + v[6]) + (v[3] + v[7]));
}

inline double dot_pair(const double* a, const double* b, std::size_t d) {
  v8df acc = {};
  std::size_t t = 0;
  for (; t + 8 <= d; t += 8) acc += load8(a + t) * load8(b + t);
  double s = hsum8(acc);
  for (; t < d; ++t) s += a[t] * b[t];
  return s;
}

// 6x4 register tile: 24 vector accumulators plus loads fit in 32 zmm names.
inline void dot_tile_6x4(const double* const* q, const double* const* r, std::size_t d,
                         double* out, std::size_t out_stride) {
  v8df acc[6][4] = {};
  std::size_t t = 0;
  for (; t + 8 <= d; t += 8) {
    v8df vr0 = load8(r[0] + t), vr1 = load8(r[1] + t);
    v8df vr2 = load8(r[2] + t), vr3 = load8(r[3] + t);
    for (int i = 0; i < 6; ++i) {
      v8df vq = load8(q[i] + t);
      acc[i][0] += vq * vr0;
      acc[i][1] += vq * vr1;
      acc[i][2] += vq * vr2;
      acc[i][3] += vq * vr3;
    }
  }
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = hsum8(acc[i][j]);
      for (std::size_t u = t; u < d; ++u) s += q[i][u] * r[j][u];
      out[i * out_stride + j] = s;
    }
  }
}

// Ragged edge tiles (qt <= 6, rt <= 4). Same per-pair order as above.
inline void dot_tile_edge(const double* const* q, int qt, const double* const* r, int rt,
                          std::size_t d, double* out, std::size_t out_stride) {
  for (int i = 0; i < qt; ++i)
    for (int j = 0; j < rt; ++j) out[i * out_stride + j] = dot_pair(q[i], r[j], d);
}

// out[i * out_stride + j] = dot(a_rows[i], b_rows[j]) for i < an, j < bn.
// b rows should already be L2-resident when this is called in a hot loop;
// callers block b themselves.
inline void dot_block(const double* a_base, std::size_t an, const double* b_base, std::size_t bn,
                      std::size_t d, double* out, std::size_t out_stride) {
  std::size_t i = 0;
  for (; i + 6 <= an; i += 6) {
    const double* q[6];
    for (int u = 0; u < 6; ++u) q[u] = a_base + (i + u) * d;
    std::size_t j = 0;
    for (; j + 4 <= bn; j += 4) {
      const double* r[4] = {b_base + j * d, b_base + (j + 1) * d, b_base + (j + 2) * d,
                            b_base + (j + 3) * d};
      dot_tile_6x4(q, r, d, out + i * out_stride + j, out_stride);
    }
    if (j < bn) {
      const double* r[4];
      int rt = static_cast<int>(bn - j);
      for (int u = 0; u < rt; ++u) r[u] = b_base + (j + u) * d;
      dot_tile_edge(q, 6, r, rt, d, out + i * out_stride + j, out_stride);
    }
  }
  if (i < an) {
    const double* q[6];
    int qt = static_cast<int>(an - i);
    for (int u = 0; u < qt; ++u) q[u] = a_base + (i + u) * d;
    for (std::size_t j = 0; j < bn; j += 4) {
      const double* r[4];
      int rt = static_cast<int>(bn - j < 4 ? bn - j : 4);
      for (int u = 0; u < rt; ++u) r[u] = b_base + (j + u) * d;
      dot_tile_edge(q, qt, r, rt, d, out + i * out_stride + j, out_stride);
    }
  }
}

}  // namespace protobank::detail
