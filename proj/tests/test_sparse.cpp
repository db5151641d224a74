#include <doctest.h>

#include <cmath>
#include <random>

#include "porogen/cholesky.hpp"
#include "porogen/error.hpp"
#include "porogen/kronecker.hpp"
#include "porogen/pcg.hpp"
#include "test_helpers.hpp"

using namespace porogen;
using testing::dense;
using testing::sparse;

namespace {

SparseMatrix laplacian_2d(std::size_t n, double shift) {
  std::vector<Triplet> t;
  auto id = [n](std::size_t x, std::size_t y) { return y * n + x; };
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      double deg = 0.0;
      auto link = [&](std::size_t x2, std::size_t y2) {
        t.push_back({id(x, y), id(x2, y2), -1.0});
        deg += 1.0;
      };
      if (x > 0) link(x - 1, y);
      if (x + 1 < n) link(x + 1, y);
      if (y > 0) link(x, y - 1);
      if (y + 1 < n) link(x, y + 1);
      t.push_back({id(x, y), id(x, y), deg + shift});
    }
  }
  return SparseMatrix::from_triplets(n * n, n * n, t);
}

}  // namespace

TEST_CASE("matvec basics") {
  auto const id = SparseMatrix::identity(3);
  CHECK(matvec(id, std::vector<double>{1, 2, 3}) == std::vector<double>{1, 2, 3});
  std::vector<double> d{2, 3};
  CHECK(matvec(SparseMatrix::diagonal(d), std::vector<double>{1, 1}) == std::vector<double>{2, 3});
  CHECK_THROWS_AS(matvec(id, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("matvec matches dense product") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (u(gen) > 0.2) m(i, j) = u(gen);
  Eigen::VectorXd v = Eigen::VectorXd::Random(5);
  auto const got = matvec(sparse(m), testing::to_std(v));
  Eigen::VectorXd const want = m * v;
  for (int i = 0; i < 5; ++i) CHECK(std::abs(got[i] - want(i)) <= 1e-14);
}

TEST_CASE("from_triplets sums duplicates and rejects bad indices") {
  std::vector<Triplet> t{{0, 0, 1.0}, {0, 0, 2.0}, {1, 0, 4.0}};
  auto const m = SparseMatrix::from_triplets(2, 2, t);
  CHECK(m.nnz() == 2);
  CHECK(m.at(0, 0) == 3.0);
  std::vector<Triplet> bad{{2, 0, 1.0}};
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, bad), DimensionError);
}

TEST_CASE("kron_matvec against explicit Kronecker product") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 1, 0, 1;
  b << 2, 0, 0, 2;
  KroneckerOperator op{sparse(a), sparse(b), 1.0};
  std::vector<double> v{1, 0, 0, 1};
  auto const got = kron_matvec(op, v);
  Eigen::VectorXd const want = testing::kron(a, b) * testing::to_eigen(v);
  for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want(i)));

  op.scale = 4.0;
  auto const scaled = kron_matvec(op, v);
  for (int i = 0; i < 4; ++i) CHECK(scaled[i] == doctest::Approx(4.0 * got[i]));

  KroneckerOperator ident{SparseMatrix::identity(2), SparseMatrix::identity(3), 1.0};
  std::vector<double> w{1, 2, 3, 4, 5, 6};
  CHECK(kron_matvec(ident, w) == w);
  CHECK_THROWS_AS(kron_matvec(ident, v), DimensionError);
}

TEST_CASE("kron_matvec and kron_solve on random SPD pairs") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t const n1 = 1 + trial % 6;
    std::size_t const n2 = 1 + (trial / 6) % 6;
    Eigen::MatrixXd const a = testing::random_spd(n1, gen);
    Eigen::MatrixXd const b = testing::random_spd(n2, gen);
    Eigen::MatrixXd const k = testing::kron(a, b);
    Eigen::VectorXd const v = Eigen::VectorXd::Random(Eigen::Index(n1 * n2));
    KroneckerOperator op{sparse(a), sparse(b), 2.5};
    Eigen::VectorXd const mv = testing::to_eigen(kron_matvec(op, testing::to_std(v)));
    CHECK((mv - 2.5 * k * v).norm() <= 1e-12 * (2.5 * k * v).norm());

    auto const fa = sparse_cholesky(op.left, true);
    auto const fb = sparse_cholesky(op.right, true);
    Eigen::VectorXd const sv = testing::to_eigen(kron_solve(fa, fb, testing::to_std(v)));
    Eigen::VectorXd const want = k.ldlt().solve(v);
    CHECK((sv - want).norm() <= 1e-10 * want.norm());
  }
}

TEST_CASE("dense_kron follows the block layout") {
  std::vector<double> a{1, 2, 3, 4}, b{0, 1, 1, 0};
  auto const k = dense_kron(a, 2, b, 2);
  CHECK(k[0 * 4 + 1] == 1.0);
  CHECK(k[2 * 4 + 3] == 4.0);
  CHECK(k[1 * 4 + 2] == 2.0);
}

TEST_CASE("sparse_cholesky") {
  std::vector<double> d{4, 9};
  auto const f = sparse_cholesky(SparseMatrix::diagonal(d), false);
  CHECK(f.lower.at(0, 0) == doctest::Approx(2.0));
  CHECK(f.lower.at(1, 1) == doctest::Approx(3.0));

  std::vector<double> neg{1, -1, 2};
  CHECK_THROWS_AS(sparse_cholesky(SparseMatrix::diagonal(neg), false), NotPositiveDefinite);

  std::mt19937_64 gen(5);
  for (std::size_t n : {8u, 40u, 200u}) {
    Eigen::MatrixXd const m = testing::random_spd(n, gen, n > 50 ? 0.02 : 0.3);
    for (bool reorder : {false, true}) {
      auto const fac = sparse_cholesky(sparse(m), reorder);
      Eigen::MatrixXd const l = dense(fac.lower);
      Eigen::MatrixXd pm(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) pm(i, j) = fac.permutation.empty() ? m(i, j) : m(fac.permutation[i], fac.permutation[j]);
      CHECK((l * l.transpose() - pm).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()));
      CHECK(fac.log_determinant() == doctest::Approx(std::log(m.determinant())).epsilon(1e-10));
    }
  }
}

TEST_CASE("minimum degree ordering reduces fill on an arrow matrix") {
  std::size_t const n = 30;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) * double(n);
  for (std::size_t i = 1; i < n; ++i) m(0, i) = m(i, 0) = 1.0;
  auto const natural = sparse_cholesky(sparse(m), false);
  auto const reordered = sparse_cholesky(sparse(m), true);
  CHECK(reordered.lower.nnz() < natural.lower.nnz());
  CHECK(reordered.lower.nnz() == 2 * n - 1);
}

TEST_CASE("ichol0") {
  // Tridiagonal: no fill, so IC(0) is exact.
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < 6; ++i) {
    t.push_back({i, i, 4.0});
    if (i + 1 < 6) {
      t.push_back({i, i + 1, -1.0});
      t.push_back({i + 1, i, -1.0});
    }
  }
  auto const tri = SparseMatrix::from_triplets(6, 6, t);
  auto const ic = ichol0(tri);
  auto const ex = sparse_cholesky(tri, false);
  CHECK((dense(ic.lower) - dense(ex.lower)).cwiseAbs().maxCoeff() <= 1e-14);

  auto const lap = laplacian_2d(4, 1.0);
  auto const f = ichol0(lap);
  CHECK(f.shift == 0.0);
  Eigen::MatrixXd const l = dense(f.lower);
  Eigen::MatrixXd const llt = l * l.transpose();
  Eigen::MatrixXd const m = dense(lap);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j)
      if (lap.contains(i, j)) CHECK(std::abs(llt(i, j) - m(i, j)) <= 1e-12);

  std::mt19937_64 gen(17);
  auto const rs = sparse(testing::random_spd(25, gen, 0.1));
  auto const rf = ichol0(rs);
  auto const low = rs.lower();
  for (std::size_t i = 0; i < 25; ++i)
    for (auto j : rf.lower.row_cols(i)) CHECK(low.contains(i, j));
}

TEST_CASE("ichol0 shifts on breakdown") {
  // Symmetric, positive diagonal, indefinite.
  Eigen::MatrixXd m(3, 3);
  m << 1, 2, 0, 2, 1, 0, 0, 0, 1;
  auto const f = ichol0(sparse(m));
  CHECK(f.shift > 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(f.diagonal(i) > 0.0);
}

TEST_CASE("tri_solve") {
  std::vector<double> two{2.0};
  LowerTriangularFactor f;
  f.lower = SparseMatrix::diagonal(two);
  CHECK(tri_solve(f, std::vector<double>{4.0}, false)[0] == doctest::Approx(2.0));

  std::mt19937_64 gen(23);
  Eigen::MatrixXd const m = testing::random_spd(12, gen);
  Eigen::VectorXd const b = Eigen::VectorXd::Random(12);
  Eigen::VectorXd const want = m.ldlt().solve(b);
  for (bool reorder : {false, true}) {
    auto const fac = sparse_cholesky(sparse(m), reorder);
    auto const y = tri_solve(fac, testing::to_std(b), false);
    Eigen::VectorXd const x = testing::to_eigen(tri_solve(fac, y, true));
    CHECK((x - want).norm() <= 1e-10 * want.norm());
  }
  CHECK_THROWS_AS(tri_solve(f, std::vector<double>{1, 2}, false), DimensionError);
}

TEST_CASE("factor multiply is the inverse of tri_solve") {
  std::mt19937_64 gen(29);
  auto const fac = sparse_cholesky(sparse(testing::random_spd(10, gen)), true);
  std::vector<double> v(10);
  for (auto& x : v) x = std::uniform_real_distribution<double>(-1, 1)(gen);
  for (bool tr : {false, true}) {
    auto w = v;
    factor_multiply_inplace(fac, w, tr);
    tri_solve_inplace(fac, w, tr);
    for (std::size_t i = 0; i < 10; ++i) CHECK(w[i] == doctest::Approx(v[i]).epsilon(1e-12));
  }
}

TEST_CASE("pcg") {
  LinearMap const ident = [](std::span<double const> x, std::span<double> y) {
    std::copy(x.begin(), x.end(), y.begin());
  };
  std::vector<double> b{1, -2, 3};
  auto const r = pcg(ident, ident, b);
  CHECK(r.iterations <= 1);
  CHECK(r.x == b);

  Eigen::MatrixXd m(3, 3);
  m << 4, 1, 0, 1, 3, 1, 0, 1, 2;
  auto const sm = sparse(m);
  auto const fac = sparse_cholesky(sm, false);
  LinearMap const sys = [&](std::span<double const> x, std::span<double> y) { sm.multiply(x, y); };
  LinearMap const exact = [&](std::span<double const> x, std::span<double> y) {
    std::copy(x.begin(), x.end(), y.begin());
    cholesky_solve_inplace(fac, y);
  };
  auto const r2 = pcg(sys, exact, b, {1e-12, 50});
  CHECK(r2.iterations <= 2);
  CHECK(r2.residual <= 1e-12);

  auto const lap = laplacian_2d(10, 1.0);
  auto const ic = ichol0(lap);
  LinearMap const lsys = [&](std::span<double const> x, std::span<double> y) { lap.multiply(x, y); };
  LinearMap const lpre = [&](std::span<double const> x, std::span<double> y) {
    std::copy(x.begin(), x.end(), y.begin());
    cholesky_solve_inplace(ic, y);
  };
  Eigen::VectorXd const rhs = Eigen::VectorXd::Random(100);
  double const tol = 1e-8;
  auto const r3 = pcg(lsys, lpre, testing::to_std(rhs), {tol, 0});
  Eigen::VectorXd const want = dense(lap).ldlt().solve(rhs);
  CHECK((testing::to_eigen(r3.x) - want).norm() <= 10 * tol * want.norm());
}

TEST_CASE("pcg reports non-convergence with the best iterate") {
  auto const lap = laplacian_2d(10, 0.01);
  LinearMap const sys = [&](std::span<double const> x, std::span<double> y) { lap.multiply(x, y); };
  LinearMap const none = [](std::span<double const> x, std::span<double> y) {
    std::copy(x.begin(), x.end(), y.begin());
  };
  std::vector<double> b(100);
  for (std::size_t i = 0; i < 100; ++i) b[i] = std::sin(0.7 * double(i * i));
  try {
    pcg(sys, none, b, {1e-14, 3});
    FAIL("expected ConvergenceFailure");
  } catch (ConvergenceFailure const& e) {
    CHECK(e.iterations() == 3);
    CHECK(e.best_iterate().size() == 100);
  }
  LinearMap const bad = [](std::span<double const>, std::span<double> y) {
    std::fill(y.begin(), y.end(), std::nan(""));
  };
  CHECK_THROWS_AS(pcg(bad, none, b), NumericalBreakdown);
}

TEST_CASE("Kronecker factor operations match dense factors") {
  std::mt19937_64 gen(31);
  auto tridiag = [](std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
      t.push_back({i, i, 3.0 + 0.01 * double(i)});
      if (i + 1 < n) {
        t.push_back({i, i + 1, -1.0});
        t.push_back({i + 1, i, -1.0});
      }
    }
    return SparseMatrix::from_triplets(n, n, t);
  };
  // Second case exercises the column-by-column path for large right factors.
  for (std::size_t n2 : {5u, 140u}) {
    auto const left = sparse(testing::random_spd(7, gen, 0.4));
    auto const right = tridiag(n2);
    auto const fl = sparse_cholesky(left, true);
    auto const fr = sparse_cholesky(right, true);
    auto perm_factor = [](LowerTriangularFactor const& f) {
      // B = P^T L as a dense matrix.
      Eigen::MatrixXd const l = dense(f.lower);
      Eigen::MatrixXd b = l;
      if (!f.permutation.empty())
        for (std::size_t i = 0; i < f.size(); ++i) b.row(Eigen::Index(f.permutation[i])) = l.row(Eigen::Index(i));
      return b;
    };
    Eigen::MatrixXd const bk = testing::kron(perm_factor(fl), perm_factor(fr));
    Eigen::MatrixXd const qk = testing::kron(dense(left), dense(right));
    CHECK((bk * bk.transpose() - qk).cwiseAbs().maxCoeff() <= 1e-10);
    Eigen::VectorXd const v = Eigen::VectorXd::Random(Eigen::Index(7 * n2));
    auto x = testing::to_std(v);
    kron_factor_multiply_inplace(fl, fr, x, false);
    CHECK((testing::to_eigen(x) - bk * v).norm() <= 1e-10 * v.norm());
    x = testing::to_std(v);
    kron_factor_multiply_inplace(fl, fr, x, true);
    CHECK((testing::to_eigen(x) - bk.transpose() * v).norm() <= 1e-10 * v.norm());
    x = testing::to_std(v);
    kron_factor_transpose_solve_inplace(fl, fr, x);
    CHECK((bk.transpose() * testing::to_eigen(x) - v).norm() <= 1e-10 * v.norm());
    KroneckerOperator op{left, right, 1.0};
    auto const mv = testing::to_eigen(kron_matvec(op, testing::to_std(v)));
    CHECK((mv - qk * v).norm() <= 1e-12 * (qk * v).norm());
    auto const sv = testing::to_eigen(kron_solve(fl, fr, testing::to_std(v)));
    CHECK((qk * sv - v).norm() <= 1e-10 * v.norm());
  }
}
