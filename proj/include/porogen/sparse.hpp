#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace porogen {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

// Compressed sparse row matrix. Column indices are sorted within each row and
// unique. Symmetric matrices store the full pattern.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
               std::vector<std::size_t> col_index, std::vector<double> values);

  // Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::span<Triplet const> triplets);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(std::span<double const> d);
  // Row-major dense input; exact zeros are dropped.
  static SparseMatrix from_dense(std::size_t rows, std::size_t cols,
                                 std::span<double const> dense);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<std::size_t const> row_ptr() const { return row_ptr_; }
  std::span<std::size_t const> col_index() const { return col_index_; }
  std::span<double const> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::span<std::size_t const> row_cols(std::size_t r) const {
    return {col_index_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<double const> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  // Zero when (i, j) is outside the pattern.
  double at(std::size_t i, std::size_t j) const;
  bool contains(std::size_t i, std::size_t j) const;

  // y = A x. Throws DimensionError on size mismatch.
  void multiply(std::span<double const> x, std::span<double> y) const;

  std::vector<double> to_dense() const;
  std::vector<double> diagonal_values() const;
  SparseMatrix transpose() const;
  // Lower triangle including the diagonal.
  SparseMatrix lower() const;
  bool is_symmetric(double tol = 0.0) const;
  // P A P^T with perm[new] = old.
  SparseMatrix permuted(std::span<std::size_t const> perm) const;
  SparseMatrix submatrix(std::span<std::size_t const> row_set,
                         std::span<std::size_t const> col_set) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_index_;
  std::vector<double> values_;
};

std::vector<double> matvec(SparseMatrix const& m, std::span<double const> v);

// alpha * a + beta * b over the union pattern.
SparseMatrix add(SparseMatrix const& a, SparseMatrix const& b, double alpha = 1.0,
                 double beta = 1.0);
SparseMatrix multiply(SparseMatrix const& a, SparseMatrix const& b);
// a * diag(d) * b
SparseMatrix multiply(SparseMatrix const& a, std::span<double const> d, SparseMatrix const& b);

double dot(std::span<double const> a, std::span<double const> b);
double norm2(std::span<double const> a);

}  // namespace porogen
