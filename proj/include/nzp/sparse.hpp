#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nzp/errors.hpp"

namespace nzp {

using index_t = std::int64_t;
using DenseVector = std::vector<double>;

// One stored coefficient of a sparse matrix. Indices are 0-based.
struct Triple {
  index_t row = 0;
  index_t col = 0;
  double value = 0.0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

// A sparse matrix held as triples in column-major order: strictly increasing
// (col, row) pairs, so a column's entries are contiguous and row-sorted.
// Explicit zero values are legal; generators never produce them.
struct CooMatrix {
  index_t m = 0;
  index_t n = 0;
  std::vector<Triple> triples;

  index_t nnz() const { return static_cast<index_t>(triples.size()); }

  void validate() const {
    for (std::size_t k = 0; k < triples.size(); ++k) {
      const Triple& t = triples[k];
      if (t.row < 0 || t.row >= m || t.col < 0 || t.col >= n)
        throw input_error("triple " + std::to_string(k) +
                          " out of bounds for " + std::to_string(m) + "x" +
                          std::to_string(n));
      if (k > 0) {
        const Triple& p = triples[k - 1];
        if (p.col > t.col || (p.col == t.col && p.row >= t.row))
          throw input_error("triples not strictly (col,row)-sorted at index " +
                            std::to_string(k));
      }
    }
  }
};

// Compressed sparse column storage of a contiguous nonzero chunk. Only the
// columns touched by the chunk are materialized; col_ids maps each local
// column back to its global index (strictly increasing).
struct CscMatrix {
  index_t m = 0;
  std::vector<index_t> col_ptr;  // n_local + 1 offsets, col_ptr[0] == 0
  std::vector<index_t> row_idx;  // row-sorted within each column
  std::vector<double> values;
  std::vector<index_t> col_ids;

  index_t n_local() const { return static_cast<index_t>(col_ids.size()); }
  index_t nnz() const { return static_cast<index_t>(row_idx.size()); }

  // Global index of the first / last local column. Pre: n_local() > 0.
  index_t first_col() const { return col_ids.front(); }
  index_t last_col() const { return col_ids.back(); }

  // Flattens back to (col,row)-ordered triples with global column indices.
  std::vector<Triple> to_triples() const {
    std::vector<Triple> out;
    out.reserve(values.size());
    for (index_t c = 0; c < n_local(); ++c)
      for (index_t k = col_ptr[c]; k < col_ptr[c + 1]; ++k)
        out.push_back({row_idx[k], col_ids[c], values[k]});
    return out;
  }
};

// Builds local CSC storage from (col,row)-sorted triples.
inline CscMatrix csc_from_triples(index_t m, std::span<const Triple> triples) {
  CscMatrix A;
  A.m = m;
  A.col_ptr.push_back(0);
  for (const Triple& t : triples) {
    if (A.col_ids.empty() || A.col_ids.back() != t.col) {
      A.col_ids.push_back(t.col);
      A.col_ptr.push_back(A.col_ptr.back());
    }
    ++A.col_ptr.back();
    A.row_idx.push_back(t.row);
    A.values.push_back(t.value);
  }
  return A;
}

// Materializes the local matrix for the triple range [begin, end).
inline CscMatrix coo_to_csc(const CooMatrix& A, index_t begin, index_t end) {
  if (begin < 0 || end < begin || end > A.nnz())
    throw input_error("triple range [" + std::to_string(begin) + ", " +
                      std::to_string(end) + ") out of [0, " +
                      std::to_string(A.nnz()) + "]");
  return csc_from_triples(
      A.m, std::span<const Triple>(A.triples).subspan(
               static_cast<std::size_t>(begin),
               static_cast<std::size_t>(end - begin)));
}

// y = A_local * x_local. x_local is indexed like col_ids. Accumulation order
// is fixed (column-major, rows ascending) for run-to-run reproducibility.
inline DenseVector local_spmv(const CscMatrix& A,
                              std::span<const double> x_local) {
  if (static_cast<index_t>(x_local.size()) != A.n_local())
    throw input_error("local vector length " + std::to_string(x_local.size()) +
                      " != n_local " + std::to_string(A.n_local()));
  DenseVector y(static_cast<std::size_t>(A.m), 0.0);
  for (index_t c = 0; c < A.n_local(); ++c) {
    const double xc = x_local[static_cast<std::size_t>(c)];
    for (index_t k = A.col_ptr[c]; k < A.col_ptr[c + 1]; ++k)
      y[static_cast<std::size_t>(A.row_idx[k])] += A.values[k] * xc;
  }
  return y;
}

// u_local = v^T * A_local, one partial scalar per local column.
inline DenseVector local_spvtm(std::span<const double> v, const CscMatrix& A) {
  if (static_cast<index_t>(v.size()) != A.m)
    throw input_error("vector length " + std::to_string(v.size()) +
                      " != row count " + std::to_string(A.m));
  DenseVector u(static_cast<std::size_t>(A.n_local()), 0.0);
  for (index_t c = 0; c < A.n_local(); ++c) {
    double acc = 0.0;
    for (index_t k = A.col_ptr[c]; k < A.col_ptr[c + 1]; ++k)
      acc += A.values[k] * v[static_cast<std::size_t>(A.row_idx[k])];
    u[static_cast<std::size_t>(c)] = acc;
  }
  return u;
}

// Reference products by direct accumulation over the global triple sequence,
// in the fixed (col, row) traversal order. Also provides the element-wise
// |A| |x| accumulations used to scale relative-error comparisons.
class DenseOracle {
 public:
  explicit DenseOracle(const CooMatrix& A) : A_(A) {}

  DenseVector spmv(std::span<const double> x) const {
    check(x.size(), A_.n, "x");
    DenseVector y(static_cast<std::size_t>(A_.m), 0.0);
    for (const Triple& t : A_.triples)
      y[static_cast<std::size_t>(t.row)] +=
          t.value * x[static_cast<std::size_t>(t.col)];
    return y;
  }

  DenseVector spvtm(std::span<const double> v) const {
    check(v.size(), A_.m, "v");
    DenseVector u(static_cast<std::size_t>(A_.n), 0.0);
    for (const Triple& t : A_.triples)
      u[static_cast<std::size_t>(t.col)] +=
          t.value * v[static_cast<std::size_t>(t.row)];
    return u;
  }

  DenseVector spmv_abs(std::span<const double> x) const {
    check(x.size(), A_.n, "x");
    DenseVector y(static_cast<std::size_t>(A_.m), 0.0);
    for (const Triple& t : A_.triples)
      y[static_cast<std::size_t>(t.row)] +=
          std::abs(t.value * x[static_cast<std::size_t>(t.col)]);
    return y;
  }

  DenseVector spvtm_abs(std::span<const double> v) const {
    check(v.size(), A_.m, "v");
    DenseVector u(static_cast<std::size_t>(A_.n), 0.0);
    for (const Triple& t : A_.triples)
      u[static_cast<std::size_t>(t.col)] +=
          std::abs(t.value * v[static_cast<std::size_t>(t.row)]);
    return u;
  }

 private:
  static void check(std::size_t got, index_t want, const char* name) {
    if (static_cast<index_t>(got) != want)
      throw input_error(std::string(name) + " has length " +
                        std::to_string(got) + ", expected " +
                        std::to_string(want));
  }

  const CooMatrix& A_;
};

}  // namespace nzp
