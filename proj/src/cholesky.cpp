#include "porogen/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "porogen/error.hpp"

namespace porogen {

namespace {

void apply_permutation(std::span<std::size_t const> perm, std::span<double> x,
                       std::vector<double>& scratch) {
  if (perm.empty()) return;
  scratch.assign(x.begin(), x.end());
  for (std::size_t i = 0; i < perm.size(); ++i) x[i] = scratch[perm[i]];
}

void apply_inverse_permutation(std::span<std::size_t const> perm, std::span<double> x,
                               std::vector<double>& scratch) {
  if (perm.empty()) return;
  scratch.assign(x.begin(), x.end());
  for (std::size_t i = 0; i < perm.size(); ++i) x[perm[i]] = scratch[i];
}

void require_square(SparseMatrix const& m, char const* who) {
  if (m.rows() != m.cols()) throw DimensionError(std::string(who) + ": matrix must be square");
}

}  // namespace

double LowerTriangularFactor::diagonal(std::size_t i) const {
  return lower.values()[lower.row_ptr()[i + 1] - 1];
}

double LowerTriangularFactor::log_determinant() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += std::log(diagonal(i));
  return 2.0 * s;
}

std::vector<std::size_t> minimum_degree_ordering(SparseMatrix const& m) {
  require_square(m, "minimum_degree_ordering");
  std::size_t const n = m.rows();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto c : m.row_cols(r)) {
      if (c == r) continue;
      adj[r].push_back(c);
      adj[c].push_back(r);
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  std::set<std::pair<std::size_t, std::size_t>> queue;
  for (std::size_t v = 0; v < n; ++v) queue.insert({adj[v].size(), v});

  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> merged;
  while (!queue.empty()) {
    auto const [deg, v] = *queue.begin();
    queue.erase(queue.begin());
    order.push_back(v);
    auto const nbrs = std::move(adj[v]);
    adj[v].clear();
    for (auto u : nbrs) {
      queue.erase({adj[u].size(), u});
      merged.clear();
      std::set_union(adj[u].begin(), adj[u].end(), nbrs.begin(), nbrs.end(),
                     std::back_inserter(merged));
      merged.erase(std::remove_if(merged.begin(), merged.end(),
                                  [&](std::size_t x) { return x == u || x == v; }),
                   merged.end());
      adj[u].swap(merged);
      queue.insert({adj[u].size(), u});
    }
  }
  return order;
}

LowerTriangularFactor sparse_cholesky(SparseMatrix const& m, bool reorder) {
  require_square(m, "sparse_cholesky");
  if (!reorder) return sparse_cholesky(m, std::span<std::size_t const>{});
  auto const order = minimum_degree_ordering(m);
  return sparse_cholesky(m, order);
}

LowerTriangularFactor sparse_cholesky(SparseMatrix const& m, std::span<std::size_t const> ordering) {
  require_square(m, "sparse_cholesky");
  std::size_t const n = m.rows();
  if (!ordering.empty() && ordering.size() != n) throw DimensionError("sparse_cholesky: bad ordering");
  SparseMatrix const c = ordering.empty() ? m : m.permuted(ordering);

  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> parent(n, none);
  {
    std::vector<std::size_t> ancestor(n, none);
    for (std::size_t k = 0; k < n; ++k) {
      for (auto j : c.row_cols(k)) {
        if (j >= k) break;
        std::size_t i = j;
        while (i != none && i < k) {
          std::size_t const next = ancestor[i];
          ancestor[i] = k;
          if (next == none) {
            parent[i] = k;
            break;
          }
          i = next;
        }
      }
    }
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> cols(n);
  std::vector<std::size_t> rp(n + 1, 0);
  std::vector<std::size_t> ci;
  std::vector<double> vals;
  std::vector<double> x(n, 0.0);
  std::vector<std::size_t> mark(n, none);
  std::vector<std::size_t> stack(n);
  std::vector<std::size_t> path(n);
  std::vector<std::pair<std::size_t, double>> row;

  for (std::size_t k = 0; k < n; ++k) {
    // Nonzero pattern of row k of L by walking the elimination tree.
    std::size_t top = n;
    mark[k] = k;
    auto const rc = c.row_cols(k);
    auto const rv = c.row_values(k);
    for (std::size_t q = 0; q < rc.size(); ++q) {
      std::size_t i = rc[q];
      if (i > k) break;
      x[i] = rv[q];
      std::size_t len = 0;
      for (; mark[i] != k; i = parent[i]) {
        path[len++] = i;
        mark[i] = k;
      }
      while (len > 0) stack[--top] = path[--len];
    }

    double d = x[k];
    x[k] = 0.0;
    row.clear();
    for (std::size_t p = top; p < n; ++p) {
      std::size_t const i = stack[p];
      double const lki = x[i] / cols[i].front().second;
      x[i] = 0.0;
      for (std::size_t q = 1; q < cols[i].size(); ++q) x[cols[i][q].first] -= cols[i][q].second * lki;
      d -= lki * lki;
      cols[i].push_back({k, lki});
      row.push_back({i, lki});
    }
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefinite("sparse_cholesky: non-positive pivot at " + std::to_string(k), k);
    }
    double const lkk = std::sqrt(d);
    cols[k].push_back({k, lkk});
    std::sort(row.begin(), row.end());
    for (auto const& [j, v] : row) {
      ci.push_back(j);
      vals.push_back(v);
    }
    ci.push_back(k);
    vals.push_back(lkk);
    rp[k + 1] = vals.size();
  }

  LowerTriangularFactor f;
  f.lower = SparseMatrix(n, n, std::move(rp), std::move(ci), std::move(vals));
  f.permutation.assign(ordering.begin(), ordering.end());
  return f;
}

namespace {

// Returns false on breakdown.
bool try_ichol0(SparseMatrix const& lowm, double shift, SparseMatrix& out) {
  std::size_t const n = lowm.rows();
  auto const rp = lowm.row_ptr();
  auto const ci = lowm.col_index();
  std::vector<double> vals(lowm.values().begin(), lowm.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t const begin = rp[i];
    std::size_t const end = rp[i + 1];
    if (end == begin || ci[end - 1] != i) return false;
    for (std::size_t p = begin; p + 1 < end; ++p) {
      std::size_t const j = ci[p];
      double s = vals[p];
      // Sparse dot of the already computed parts of rows i and j over k < j.
      std::size_t a = begin;
      std::size_t b = rp[j];
      std::size_t const bend = rp[j + 1] - 1;
      while (a < p && b < bend) {
        if (ci[a] == ci[b]) {
          s -= vals[a] * vals[b];
          ++a;
          ++b;
        } else if (ci[a] < ci[b]) {
          ++a;
        } else {
          ++b;
        }
      }
      vals[p] = s / vals[bend];
    }
    double d = vals[end - 1] + shift;
    for (std::size_t p = begin; p + 1 < end; ++p) d -= vals[p] * vals[p];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    vals[end - 1] = std::sqrt(d);
  }
  out = SparseMatrix(n, n, std::vector<std::size_t>(rp.begin(), rp.end()),
                     std::vector<std::size_t>(ci.begin(), ci.end()), std::move(vals));
  return true;
}

}  // namespace

LowerTriangularFactor ichol0(SparseMatrix const& m) {
  require_square(m, "ichol0");
  SparseMatrix const lowm = m.lower();
  double max_diag = 0.0;
  for (auto d : m.diagonal_values()) max_diag = std::max(max_diag, std::abs(d));
  LowerTriangularFactor f;
  if (try_ichol0(lowm, 0.0, f.lower)) return f;
  for (double eps = 1e-8; eps < 1e8; eps *= 2.0) {
    double const shift = eps * std::max(max_diag, 1.0);
    if (try_ichol0(lowm, shift, f.lower)) {
      f.shift = shift;
      return f;
    }
  }
  throw NumericalBreakdown("ichol0: diagonal shifting failed to restore positivity");
}

void lower_solve(SparseMatrix const& l, std::span<double> x) {
  auto const rp = l.row_ptr();
  auto const ci = l.col_index();
  auto const v = l.values();
  for (std::size_t i = 0; i < l.rows(); ++i) {
    double s = x[i];
    std::size_t const end = rp[i + 1] - 1;
    for (std::size_t p = rp[i]; p < end; ++p) s -= v[p] * x[ci[p]];
    x[i] = s / v[end];
  }
}

void lower_transpose_solve(SparseMatrix const& l, std::span<double> x) {
  auto const rp = l.row_ptr();
  auto const ci = l.col_index();
  auto const v = l.values();
  for (std::size_t i = l.rows(); i-- > 0;) {
    std::size_t const end = rp[i + 1] - 1;
    double const xi = x[i] / v[end];
    x[i] = xi;
    for (std::size_t p = rp[i]; p < end; ++p) x[ci[p]] -= v[p] * xi;
  }
}

void tri_solve_inplace(LowerTriangularFactor const& f, std::span<double> x, bool transposed) {
  if (x.size() != f.size()) throw DimensionError("tri_solve: dimension mismatch");
  std::vector<double> scratch;
  if (!transposed) {
    apply_permutation(f.permutation, x, scratch);
    lower_solve(f.lower, x);
  } else {
    lower_transpose_solve(f.lower, x);
    apply_inverse_permutation(f.permutation, x, scratch);
  }
}

std::vector<double> tri_solve(LowerTriangularFactor const& f, std::span<double const> b,
                              bool transposed) {
  std::vector<double> x(b.begin(), b.end());
  tri_solve_inplace(f, x, transposed);
  return x;
}

void cholesky_solve_inplace(LowerTriangularFactor const& f, std::span<double> x) {
  tri_solve_inplace(f, x, false);
  tri_solve_inplace(f, x, true);
}

void factor_multiply_inplace(LowerTriangularFactor const& f, std::span<double> x, bool transposed) {
  if (x.size() != f.size()) throw DimensionError("factor_multiply: dimension mismatch");
  auto const& l = f.lower;
  auto const rp = l.row_ptr();
  auto const ci = l.col_index();
  auto const v = l.values();
  std::size_t const n = l.rows();
  std::vector<double> scratch;
  if (!transposed) {
    // B x = P^T (L x); rows processed bottom-up so x_j (j <= i) is still original.
    for (std::size_t i = n; i-- > 0;) {
      double s = 0.0;
      for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) s += v[p] * x[ci[p]];
      x[i] = s;
    }
    apply_inverse_permutation(f.permutation, x, scratch);
  } else {
    // B^T x = L^T (P x)
    apply_permutation(f.permutation, x, scratch);
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) y[ci[p]] += v[p] * x[i];
    }
    std::copy(y.begin(), y.end(), x.begin());
  }
}

}  // namespace porogen
