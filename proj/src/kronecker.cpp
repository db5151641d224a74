#include "porogen/kronecker.hpp"

#include <algorithm>

#include <Eigen/Dense>

#include "porogen/error.hpp"

namespace porogen {

namespace {

// Right factors up to this size are applied as dense matrices to all columns
// at once; larger ones column by column.
constexpr std::size_t kDenseRightLimit = 128;

using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using ColMap = Eigen::Map<ColMat>;

void check_kron_dims(std::size_t n1, std::size_t n2, std::size_t len) {
  if (n1 * n2 != len) throw DimensionError("kronecker: vector length must equal n1 * n2");
}

ColMat to_eigen(SparseMatrix const& m) {
  ColMat d = ColMat::Zero(Eigen::Index(m.rows()), Eigen::Index(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto const cols = m.row_cols(r);
    auto const vals = m.row_values(r);
    for (std::size_t p = 0; p < cols.size(); ++p) d(Eigen::Index(r), Eigen::Index(cols[p])) = vals[p];
  }
  return d;
}

// The vector is a sequence of n1 blocks of length b; the left operator acts on
// block indices.
void block_permute(std::span<std::size_t const> perm, std::span<double> x, std::size_t b,
                   bool inverse) {
  if (perm.empty()) return;
  std::vector<double> old(x.begin(), x.end());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::size_t const dst = inverse ? perm[i] : i;
    std::size_t const src = inverse ? i : perm[i];
    std::copy_n(old.begin() + std::ptrdiff_t(src * b), b, x.begin() + std::ptrdiff_t(dst * b));
  }
}

void block_multiply(SparseMatrix const& m, std::span<double const> in, std::span<double> out,
                    std::size_t b) {
  auto const rp = m.row_ptr();
  auto const ci = m.col_index();
  auto const v = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* o = out.data() + r * b;
    std::fill_n(o, b, 0.0);
    for (std::size_t p = rp[r]; p < rp[r + 1]; ++p) {
      double const a = v[p];
      double const* src = in.data() + ci[p] * b;
      for (std::size_t k = 0; k < b; ++k) o[k] += a * src[k];
    }
  }
}

void block_lower_solve(SparseMatrix const& l, std::span<double> x, std::size_t b) {
  auto const rp = l.row_ptr();
  auto const ci = l.col_index();
  auto const v = l.values();
  for (std::size_t i = 0; i < l.rows(); ++i) {
    double* xi = x.data() + i * b;
    std::size_t const end = rp[i + 1] - 1;
    for (std::size_t p = rp[i]; p < end; ++p) {
      double const a = v[p];
      double const* xj = x.data() + ci[p] * b;
      for (std::size_t k = 0; k < b; ++k) xi[k] -= a * xj[k];
    }
    double const inv = 1.0 / v[end];
    for (std::size_t k = 0; k < b; ++k) xi[k] *= inv;
  }
}

void block_lower_transpose_solve(SparseMatrix const& l, std::span<double> x, std::size_t b) {
  auto const rp = l.row_ptr();
  auto const ci = l.col_index();
  auto const v = l.values();
  for (std::size_t i = l.rows(); i-- > 0;) {
    double* xi = x.data() + i * b;
    std::size_t const end = rp[i + 1] - 1;
    double const inv = 1.0 / v[end];
    for (std::size_t k = 0; k < b; ++k) xi[k] *= inv;
    for (std::size_t p = rp[i]; p < end; ++p) {
      double const a = v[p];
      double* xj = x.data() + ci[p] * b;
      for (std::size_t k = 0; k < b; ++k) xj[k] -= a * xi[k];
    }
  }
}

// B x with B = P^T L, or B^T x = L^T P x.
void block_factor_multiply(LowerTriangularFactor const& f, std::span<double> x, std::size_t b,
                           bool transposed) {
  auto const& l = f.lower;
  std::vector<double> y(x.size(), 0.0);
  auto const rp = l.row_ptr();
  auto const ci = l.col_index();
  auto const v = l.values();
  if (!transposed) {
    block_multiply(l, x, y, b);
    std::copy(y.begin(), y.end(), x.begin());
    block_permute(f.permutation, x, b, true);
  } else {
    block_permute(f.permutation, x, b, false);
    for (std::size_t i = 0; i < l.rows(); ++i) {
      double const* xi = x.data() + i * b;
      for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
        double const a = v[p];
        double* yj = y.data() + ci[p] * b;
        for (std::size_t k = 0; k < b; ++k) yj[k] += a * xi[k];
      }
    }
    std::copy(y.begin(), y.end(), x.begin());
  }
}

enum class FactorOp { Solve, TransposeSolve, Multiply, TransposeMultiply };

void left_factor_op(LowerTriangularFactor const& f, std::span<double> x, std::size_t b, FactorOp op) {
  switch (op) {
    case FactorOp::Solve:
      block_permute(f.permutation, x, b, false);
      block_lower_solve(f.lower, x, b);
      break;
    case FactorOp::TransposeSolve:
      block_lower_transpose_solve(f.lower, x, b);
      block_permute(f.permutation, x, b, true);
      break;
    case FactorOp::Multiply:
      block_factor_multiply(f, x, b, false);
      break;
    case FactorOp::TransposeMultiply:
      block_factor_multiply(f, x, b, true);
      break;
  }
}

void permute_rows(std::span<std::size_t const> perm, ColMap& v, bool inverse) {
  if (perm.empty()) return;
  ColMat const old = v;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    auto const dst = Eigen::Index(inverse ? perm[i] : i);
    auto const src = Eigen::Index(inverse ? i : perm[i]);
    v.row(dst) = old.row(src);
  }
}

void right_factor_op(LowerTriangularFactor const& f, std::span<double> x, std::size_t n1,
                     FactorOp op) {
  std::size_t const n2 = f.size();
  if (n2 > kDenseRightLimit) {
    for (std::size_t j = 0; j < n1; ++j) {
      auto col = x.subspan(j * n2, n2);
      switch (op) {
        case FactorOp::Solve: tri_solve_inplace(f, col, false); break;
        case FactorOp::TransposeSolve: tri_solve_inplace(f, col, true); break;
        case FactorOp::Multiply: factor_multiply_inplace(f, col, false); break;
        case FactorOp::TransposeMultiply: factor_multiply_inplace(f, col, true); break;
      }
    }
    return;
  }
  ColMat const l = to_eigen(f.lower);
  ColMap v(x.data(), Eigen::Index(n2), Eigen::Index(n1));
  switch (op) {
    case FactorOp::Solve:
      permute_rows(f.permutation, v, false);
      l.triangularView<Eigen::Lower>().solveInPlace(v);
      break;
    case FactorOp::TransposeSolve:
      l.transpose().triangularView<Eigen::Upper>().solveInPlace(v);
      permute_rows(f.permutation, v, true);
      break;
    case FactorOp::Multiply:
      v = l.triangularView<Eigen::Lower>() * v;
      permute_rows(f.permutation, v, true);
      break;
    case FactorOp::TransposeMultiply:
      permute_rows(f.permutation, v, false);
      v = l.transpose().triangularView<Eigen::Upper>() * v;
      break;
  }
}

void kron_factor_apply(LowerTriangularFactor const& left_f, LowerTriangularFactor const& right_f,
                       std::span<double> v, FactorOp op) {
  check_kron_dims(left_f.size(), right_f.size(), v.size());
  right_factor_op(right_f, v, left_f.size(), op);
  left_factor_op(left_f, v, right_f.size(), op);
}

}  // namespace

void kron_matvec(KroneckerOperator const& op, std::span<double const> v, std::span<double> out) {
  std::size_t const n1 = op.left.rows();
  std::size_t const n2 = op.right.rows();
  if (op.left.cols() != n1 || op.right.cols() != n2) throw DimensionError("kron_matvec: factors must be square");
  check_kron_dims(n1, n2, v.size());
  check_kron_dims(n1, n2, out.size());
  std::vector<double> tmp(v.size());
  if (n2 <= kDenseRightLimit) {
    ColMat const r = to_eigen(op.right);
    Eigen::Map<ColMat const> in(v.data(), Eigen::Index(n2), Eigen::Index(n1));
    ColMap t(tmp.data(), Eigen::Index(n2), Eigen::Index(n1));
    t.noalias() = r * in;
  } else {
    for (std::size_t j = 0; j < n1; ++j) op.right.multiply(v.subspan(j * n2, n2), std::span(tmp).subspan(j * n2, n2));
  }
  block_multiply(op.left, tmp, out, n2);
  if (op.scale != 1.0) {
    for (auto& x : out) x *= op.scale;
  }
}

std::vector<double> kron_matvec(KroneckerOperator const& op, std::span<double const> v) {
  std::vector<double> out(v.size());
  kron_matvec(op, v, out);
  return out;
}

void kron_solve_inplace(LowerTriangularFactor const& left_f, LowerTriangularFactor const& right_f,
                        std::span<double> v) {
  kron_factor_apply(left_f, right_f, v, FactorOp::Solve);
  kron_factor_apply(left_f, right_f, v, FactorOp::TransposeSolve);
}

std::vector<double> kron_solve(LowerTriangularFactor const& left_f,
                               LowerTriangularFactor const& right_f, std::span<double const> v) {
  std::vector<double> out(v.begin(), v.end());
  kron_solve_inplace(left_f, right_f, out);
  return out;
}

void kron_factor_multiply_inplace(LowerTriangularFactor const& left_f,
                                  LowerTriangularFactor const& right_f, std::span<double> v,
                                  bool transposed) {
  kron_factor_apply(left_f, right_f, v, transposed ? FactorOp::TransposeMultiply : FactorOp::Multiply);
}

void kron_factor_transpose_solve_inplace(LowerTriangularFactor const& left_f,
                                         LowerTriangularFactor const& right_f,
                                         std::span<double> v) {
  kron_factor_apply(left_f, right_f, v, FactorOp::TransposeSolve);
}

std::vector<double> dense_kron(std::span<double const> a, std::size_t na,
                               std::span<double const> b, std::size_t nb) {
  std::size_t const n = na * nb;
  std::vector<double> k(n * n);
  for (std::size_t i1 = 0; i1 < na; ++i1)
    for (std::size_t j1 = 0; j1 < na; ++j1)
      for (std::size_t i2 = 0; i2 < nb; ++i2)
        for (std::size_t j2 = 0; j2 < nb; ++j2)
          k[(i1 * nb + i2) * n + (j1 * nb + j2)] = a[i1 * na + j1] * b[i2 * nb + j2];
  return k;
}

}  // namespace porogen
