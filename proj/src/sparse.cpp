#include "porogen/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "porogen/error.hpp"

namespace porogen {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
                           std::vector<std::size_t> col_index, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_index_(std::move(col_index)),
      values_(std::move(values)) {
  if (row_ptr_.size() != rows_ + 1 || col_index_.size() != values_.size() ||
      row_ptr_.back() != values_.size()) {
    throw DimensionError("SparseMatrix: inconsistent CSR arrays");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      if (col_index_[p] >= cols_) throw DimensionError("SparseMatrix: column index out of range");
      if (p > row_ptr_[r] && col_index_[p] <= col_index_[p - 1]) {
        throw DimensionError("SparseMatrix: columns must be sorted and unique within a row");
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::span<Triplet const> triplets) {
  std::vector<std::size_t> count(rows + 1, 0);
  for (auto const& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw DimensionError("triplet index out of range");
    ++count[t.row + 1];
  }
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<std::pair<std::size_t, double>> buf(triplets.size());
  std::vector<std::size_t> fill(count.begin(), count.end() - 1);
  for (auto const& t : triplets) buf[fill[t.row]++] = {t.col, t.value};

  SparseMatrix m(rows, cols);
  m.col_index_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  for (std::size_t r = 0; r < rows; ++r) {
    auto first = buf.begin() + static_cast<std::ptrdiff_t>(count[r]);
    auto last = buf.begin() + static_cast<std::ptrdiff_t>(count[r + 1]);
    std::sort(first, last, [](auto const& a, auto const& b) { return a.first < b.first; });
    for (auto it = first; it != last; ++it) {
      if (!m.col_index_.empty() && m.col_index_.size() > m.row_ptr_[r] &&
          m.col_index_.back() == it->first) {
        m.values_.back() += it->second;
      } else {
        m.col_index_.push_back(it->first);
        m.values_.push_back(it->second);
      }
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<double const> d) {
  std::size_t const n = d.size();
  std::vector<std::size_t> rp(n + 1);
  std::vector<std::size_t> ci(n);
  std::iota(rp.begin(), rp.end(), std::size_t{0});
  std::iota(ci.begin(), ci.end(), std::size_t{0});
  return SparseMatrix(n, n, std::move(rp), std::move(ci), std::vector<double>(d.begin(), d.end()));
}

SparseMatrix SparseMatrix::from_dense(std::size_t rows, std::size_t cols,
                                      std::span<double const> dense) {
  if (dense.size() != rows * cols) throw DimensionError("from_dense: size mismatch");
  SparseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double const v = dense[r * cols + c];
      if (v != 0.0) {
        m.col_index_.push_back(c);
        m.values_.push_back(v);
      }
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  auto cols = row_cols(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return values_[row_ptr_[i] + static_cast<std::size_t>(it - cols.begin())];
}

bool SparseMatrix::contains(std::size_t i, std::size_t j) const {
  auto cols = row_cols(i);
  return std::binary_search(cols.begin(), cols.end(), j);
}

void SparseMatrix::multiply(std::span<double const> x, std::span<double> y) const {
  if (x.size() != cols_ || y.size() != rows_) throw DimensionError("matvec: dimension mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) acc += values_[p] * x[col_index_[p]];
    y[r] = acc;
  }
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> d(rows_ * cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) d[r * cols_ + col_index_[p]] = values_[p];
  }
  return d;
}

std::vector<double> SparseMatrix::diagonal_values() const {
  std::vector<double> d(std::min(rows_, cols_), 0.0);
  for (std::size_t r = 0; r < d.size(); ++r) d[r] = at(r, r);
  return d;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) t.push_back({col_index_[p], r, values_[p]});
  }
  return from_triplets(cols_, rows_, t);
}

SparseMatrix SparseMatrix::lower() const {
  SparseMatrix m(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1] && col_index_[p] <= r; ++p) {
      m.col_index_.push_back(col_index_[p]);
      m.values_.push_back(values_[p]);
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      std::size_t const c = col_index_[p];
      if (!contains(c, r)) return false;
      double const a = values_[p];
      double const b = at(c, r);
      if (std::abs(a - b) > tol * std::max({1.0, std::abs(a), std::abs(b)})) return false;
    }
  }
  return true;
}

SparseMatrix SparseMatrix::permuted(std::span<std::size_t const> perm) const {
  if (rows_ != cols_ || perm.size() != rows_) throw DimensionError("permuted: size mismatch");
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      t.push_back({inv[r], inv[col_index_[p]], values_[p]});
    }
  }
  return from_triplets(rows_, cols_, t);
}

SparseMatrix SparseMatrix::submatrix(std::span<std::size_t const> row_set,
                                     std::span<std::size_t const> col_set) const {
  std::vector<std::ptrdiff_t> col_map(cols_, -1);
  for (std::size_t k = 0; k < col_set.size(); ++k) {
    if (col_set[k] >= cols_) throw OutOfBounds("submatrix: column out of range");
    col_map[col_set[k]] = static_cast<std::ptrdiff_t>(k);
  }
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < row_set.size(); ++k) {
    std::size_t const r = row_set[k];
    if (r >= rows_) throw OutOfBounds("submatrix: row out of range");
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      auto const c = col_map[col_index_[p]];
      if (c >= 0) t.push_back({k, static_cast<std::size_t>(c), values_[p]});
    }
  }
  return from_triplets(row_set.size(), col_set.size(), t);
}

std::vector<double> matvec(SparseMatrix const& m, std::span<double const> v) {
  std::vector<double> y(m.rows());
  m.multiply(v, y);
  return y;
}

SparseMatrix add(SparseMatrix const& a, SparseMatrix const& b, double alpha, double beta) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("add: dimension mismatch");
  std::vector<Triplet> t;
  t.reserve(a.nnz() + b.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ac = a.row_cols(r);
    auto av = a.row_values(r);
    for (std::size_t k = 0; k < ac.size(); ++k) t.push_back({r, ac[k], alpha * av[k]});
    auto bc = b.row_cols(r);
    auto bv = b.row_values(r);
    for (std::size_t k = 0; k < bc.size(); ++k) t.push_back({r, bc[k], beta * bv[k]});
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), t);
}

SparseMatrix multiply(SparseMatrix const& a, std::span<double const> d, SparseMatrix const& b) {
  if (a.cols() != b.rows() || d.size() != a.cols()) throw DimensionError("multiply: dimension mismatch");
  std::vector<std::size_t> rp(a.rows() + 1, 0);
  std::vector<std::size_t> ci;
  std::vector<double> vals;
  std::vector<double> acc(b.cols(), 0.0);
  std::vector<char> used(b.cols(), 0);
  std::vector<std::size_t> pattern;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    pattern.clear();
    auto ac = a.row_cols(r);
    auto av = a.row_values(r);
    for (std::size_t k = 0; k < ac.size(); ++k) {
      double const s = av[k] * d[ac[k]];
      auto bc = b.row_cols(ac[k]);
      auto bv = b.row_values(ac[k]);
      for (std::size_t q = 0; q < bc.size(); ++q) {
        if (!used[bc[q]]) {
          used[bc[q]] = 1;
          pattern.push_back(bc[q]);
        }
        acc[bc[q]] += s * bv[q];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    for (auto c : pattern) {
      ci.push_back(c);
      vals.push_back(acc[c]);
      acc[c] = 0.0;
      used[c] = 0;
    }
    rp[r + 1] = vals.size();
  }
  return SparseMatrix(a.rows(), b.cols(), std::move(rp), std::move(ci), std::move(vals));
}

SparseMatrix multiply(SparseMatrix const& a, SparseMatrix const& b) {
  std::vector<double> ones(a.cols(), 1.0);
  return multiply(a, ones, b);
}

double dot(std::span<double const> a, std::span<double const> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<double const> a) { return std::sqrt(dot(a, a)); }

}  // namespace porogen
