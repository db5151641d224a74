#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "porogen/sparse.hpp"

namespace porogen {

// Factor of a symmetric positive definite C in the form P C P^T = L L^T,
// i.e. C = B B^T with B = P^T L. L is stored row-wise with the diagonal as
// the last entry of every row. An empty permutation means identity
// (perm[new] = old otherwise).
struct LowerTriangularFactor {
  SparseMatrix lower;
  std::vector<std::size_t> permutation;
  // Diagonal shift added before factorization (IC(0) breakdown fallback).
  double shift = 0.0;

  std::size_t size() const { return lower.rows(); }
  // log det(C) = 2 sum log L_ii (shift excluded).
  double log_determinant() const;
  double diagonal(std::size_t i) const;
};

// Minimum-degree fill-reducing ordering on the graph of a symmetric pattern.
std::vector<std::size_t> minimum_degree_ordering(SparseMatrix const& m);

// Exact sparse Cholesky (up-looking, elimination-tree driven).
// Throws NotPositiveDefinite on a non-positive pivot.
LowerTriangularFactor sparse_cholesky(SparseMatrix const& m, bool reorder);
LowerTriangularFactor sparse_cholesky(SparseMatrix const& m, std::span<std::size_t const> ordering);

// Zero-fill incomplete Cholesky. On breakdown the factorization is retried on
// m + eps * max|diag| * I with eps doubling from 1e-8; the applied absolute
// shift is reported in the result.
LowerTriangularFactor ichol0(SparseMatrix const& m);

// Solves B x = b (transposed = false) or B^T x = b (transposed = true), with
// B = P^T L. Chaining both solves applies C^{-1}.
std::vector<double> tri_solve(LowerTriangularFactor const& f, std::span<double const> b,
                              bool transposed);
void tri_solve_inplace(LowerTriangularFactor const& f, std::span<double> x, bool transposed);

// x <- C^{-1} x
void cholesky_solve_inplace(LowerTriangularFactor const& f, std::span<double> x);
// x <- B x (transposed = false) or B^T x
void factor_multiply_inplace(LowerTriangularFactor const& f, std::span<double> x, bool transposed);

// Raw triangular kernels on a row-stored lower matrix (diagonal last).
void lower_solve(SparseMatrix const& l, std::span<double> x);
void lower_transpose_solve(SparseMatrix const& l, std::span<double> x);

}  // namespace porogen
