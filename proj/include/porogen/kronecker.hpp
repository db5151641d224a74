#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "porogen/cholesky.hpp"
#include "porogen/sparse.hpp"

namespace porogen {

// scale * (left ⊗ right), never expanded. A vector v of length n1*n2 is read
// as the n2 x n1 column-major matrix V with V(i, j) = v[j * n2 + i]; then
// (left ⊗ right) v = vec(right * V * left^T).
struct KroneckerOperator {
  SparseMatrix left;
  SparseMatrix right;
  double scale = 1.0;

  std::size_t size() const { return left.rows() * right.rows(); }
};

// Applies (left_op ⊗ right_op) in place. right_op is called on each of the n1
// contiguous columns of V (length n2), left_op on each of the n2 rows of V
// (length n1, gathered into contiguous storage).
template <class LeftOp, class RightOp>
void kron_apply_inplace(std::span<double> v, std::size_t n1, std::size_t n2, LeftOp&& left_op,
                        RightOp&& right_op) {
  for (std::size_t j = 0; j < n1; ++j) right_op(v.subspan(j * n2, n2));
  std::vector<double> t(n1 * n2);
  for (std::size_t j = 0; j < n1; ++j) {
    for (std::size_t i = 0; i < n2; ++i) t[i * n1 + j] = v[j * n2 + i];
  }
  for (std::size_t i = 0; i < n2; ++i) left_op(std::span<double>(t).subspan(i * n1, n1));
  for (std::size_t j = 0; j < n1; ++j) {
    for (std::size_t i = 0; i < n2; ++i) v[j * n2 + i] = t[i * n1 + j];
  }
}

std::vector<double> kron_matvec(KroneckerOperator const& op, std::span<double const> v);
void kron_matvec(KroneckerOperator const& op, std::span<double const> v, std::span<double> out);

// (C1^{-1} ⊗ C2^{-1}) v from factors of C1 (left) and C2 (right).
std::vector<double> kron_solve(LowerTriangularFactor const& left_f,
                               LowerTriangularFactor const& right_f, std::span<double const> v);
void kron_solve_inplace(LowerTriangularFactor const& left_f, LowerTriangularFactor const& right_f,
                        std::span<double> v);

// (B1 ⊗ B2) v or (B1 ⊗ B2)^T v with B = P^T L for each factor.
void kron_factor_multiply_inplace(LowerTriangularFactor const& left_f,
                                  LowerTriangularFactor const& right_f, std::span<double> v,
                                  bool transposed);
// (B1 ⊗ B2)^{-T} v: maps white noise to a draw with covariance (C1 ⊗ C2)^{-1}.
void kron_factor_transpose_solve_inplace(LowerTriangularFactor const& left_f,
                                         LowerTriangularFactor const& right_f,
                                         std::span<double> v);

// Dense Kronecker product, row-major. Test and debugging aid only.
std::vector<double> dense_kron(std::span<double const> a, std::size_t na,
                               std::span<double const> b, std::size_t nb);

}  // namespace porogen
