#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "nzp/errors.hpp"
#include "nzp/sparse.hpp"

namespace nzp {

// Splits Z nonzeros into P contiguous chunks in storage order: the first
// (Z mod P) chunks hold ceil(Z/P) nonzeros, the rest floor(Z/P), so sizes
// differ by at most one regardless of the sparsity pattern.
struct ChunkBounds {
  index_t P = 0;
  std::vector<index_t> offsets;  // P + 1, offsets[0] == 0, offsets[P] == Z

  index_t begin(index_t rank) const { return offsets[rank]; }
  index_t end(index_t rank) const { return offsets[rank + 1]; }
  index_t size(index_t rank) const { return end(rank) - begin(rank); }
};

inline ChunkBounds chunk_bounds(index_t Z, index_t P) {
  if (P < 1) throw input_error("rank count must be >= 1");
  if (Z < 0) throw input_error("nonzero count must be >= 0");
  ChunkBounds b;
  b.P = P;
  b.offsets.resize(static_cast<std::size_t>(P) + 1);
  const index_t base = Z / P;
  const index_t extra = Z % P;
  for (index_t r = 0; r <= P; ++r)
    b.offsets[static_cast<std::size_t>(r)] = r * base + std::min(r, extra);
  return b;
}

// Per-rank column cover {J_i}: the global columns with at least one nonzero
// in rank i's chunk. Adjacent covers may share a boundary column; the union
// is the set of nonempty columns, so this is a cover, not a partition.
struct Cover {
  index_t n = 0;
  std::vector<std::vector<index_t>> columns;

  index_t ranks() const { return static_cast<index_t>(columns.size()); }
  bool chunk_empty(index_t rank) const {
    return columns[static_cast<std::size_t>(rank)].empty();
  }
  // Pre: chunk nonempty.
  index_t first_col(index_t rank) const {
    return columns[static_cast<std::size_t>(rank)].front();
  }
  index_t last_col(index_t rank) const {
    return columns[static_cast<std::size_t>(rank)].back();
  }
};

inline Cover build_cover(const CooMatrix& A, const ChunkBounds& bounds) {
  Cover cover;
  cover.n = A.n;
  cover.columns.resize(static_cast<std::size_t>(bounds.P));
  for (index_t r = 0; r < bounds.P; ++r) {
    auto& cols = cover.columns[static_cast<std::size_t>(r)];
    for (index_t k = bounds.begin(r); k < bounds.end(r); ++k) {
      const index_t c = A.triples[static_cast<std::size_t>(k)].col;
      if (cols.empty() || cols.back() != c) cols.push_back(c);
    }
  }
  return cover;
}

// A column whose nonzeros are split across >= 2 consecutive ranks, together
// with its member rank range. Zone ranks are assigned left to right by
// ascending column index.
struct OverlapZone {
  index_t zone_rank = 0;
  index_t column = 0;
  int lo = 0;  // inclusive member range [lo, hi]
  int hi = 0;

  friend bool operator==(const OverlapZone&, const OverlapZone&) = default;
};

// Sequential reference for the overlap-zone structure. The distributed setup
// must reproduce exactly this on every rank.
inline std::vector<OverlapZone> zones_oracle(const Cover& cover) {
  for (index_t r = 0; r < cover.ranks(); ++r)
    if (cover.chunk_empty(r))
      throw config_error("rank " + std::to_string(r) +
                         " has an empty nonzero chunk; overlap zones require "
                         "Z >= P");
  std::vector<OverlapZone> zones;
  for (index_t r = 1; r < cover.ranks(); ++r) {
    if (cover.first_col(r) != cover.last_col(r - 1)) continue;
    const index_t c = cover.first_col(r);
    if (!zones.empty() && zones.back().column == c) {
      zones.back().hi = static_cast<int>(r);
    } else {
      zones.push_back({static_cast<index_t>(zones.size()), c,
                       static_cast<int>(r - 1), static_cast<int>(r)});
    }
  }
  return zones;
}

// Contiguous column range owned by one rank under column partitioning,
// with its nonzero count (the quantity that becomes unbalanced when some
// columns are dense).
struct ColumnRange {
  index_t col_begin = 0;
  index_t col_end = 0;  // half-open
  index_t nnz = 0;
};

inline std::vector<ColumnRange> column_partition(const CooMatrix& A,
                                                 index_t P) {
  if (P < 1) throw input_error("rank count must be >= 1");
  if (P > A.n)
    throw input_error("column partitioning needs P <= n, got P = " +
                      std::to_string(P) + ", n = " + std::to_string(A.n));
  std::vector<ColumnRange> ranges(static_cast<std::size_t>(P));
  const index_t base = A.n / P;
  const index_t extra = A.n % P;
  index_t col = 0;
  for (index_t r = 0; r < P; ++r) {
    auto& rr = ranges[static_cast<std::size_t>(r)];
    rr.col_begin = col;
    col += base + (r < extra ? 1 : 0);
    rr.col_end = col;
    const auto lo = std::lower_bound(
        A.triples.begin(), A.triples.end(), rr.col_begin,
        [](const Triple& t, index_t c) { return t.col < c; });
    const auto hi = std::lower_bound(
        lo, A.triples.end(), rr.col_end,
        [](const Triple& t, index_t c) { return t.col < c; });
    rr.nnz = static_cast<index_t>(hi - lo);
  }
  return ranges;
}

// Cover view of a column partition (nonempty columns only). Disjoint by
// construction, which makes the overlapped-vector machinery shared between
// the two distribution modes.
inline Cover colp_cover(const CooMatrix& A,
                        const std::vector<ColumnRange>& ranges) {
  Cover cover;
  cover.n = A.n;
  cover.columns.resize(ranges.size());
  std::size_t k = 0;
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    auto& cols = cover.columns[r];
    while (k < A.triples.size() && A.triples[k].col < ranges[r].col_end) {
      if (cols.empty() || cols.back() != A.triples[k].col)
        cols.push_back(A.triples[k].col);
      ++k;
    }
  }
  return cover;
}

// Load imbalance Delta = P * (max - min) / Z, i.e. the max-minus-min rank
// load normalized by the mean. Zero iff all ranks hold the same count.
struct ImbalanceReport {
  index_t max_nnz = 0;
  index_t min_nnz = 0;
  index_t Z = 0;
  index_t P = 0;
  double delta = 0.0;

  double percent() const { return 100.0 * delta; }
};

inline ImbalanceReport imbalance(std::span<const index_t> per_rank_nnz) {
  if (per_rank_nnz.empty()) throw input_error("imbalance of empty count list");
  ImbalanceReport rep;
  rep.P = static_cast<index_t>(per_rank_nnz.size());
  rep.max_nnz = *std::max_element(per_rank_nnz.begin(), per_rank_nnz.end());
  rep.min_nnz = *std::min_element(per_rank_nnz.begin(), per_rank_nnz.end());
  for (index_t c : per_rank_nnz) rep.Z += c;
  rep.delta = rep.Z == 0 ? 0.0
                         : static_cast<double>(rep.P) *
                               static_cast<double>(rep.max_nnz - rep.min_nnz) /
                               static_cast<double>(rep.Z);
  return rep;
}

}  // namespace nzp
