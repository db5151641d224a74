#include "porogen/spde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "porogen/bessel.hpp"
#include "porogen/error.hpp"

namespace porogen {

void OscParams::validate() const {
  if (!(theta_s >= 0.0 && theta_s < 1.0) || !(theta_z >= 0.0 && theta_z < 1.0)) {
    throw ConfigError("OscParams: theta must lie in [0,1)");
  }
  if (!(kappa_s > 0.0) || !(kappa_z > 0.0)) throw ConfigError("OscParams: kappa must be positive");
  if (!(tau > 0.0)) throw ConfigError("OscParams: tau must be positive");
  if (!(sigma > 0.0)) throw ConfigError("OscParams: sigma must be positive");
  if (!std::isfinite(u)) throw ConfigError("OscParams: threshold must be finite");
}

namespace {

SparseMatrix g_cinv_g(SparseMatrix const& c, SparseMatrix const& g) {
  if (c.rows() != g.rows() || c.cols() != g.cols() || c.rows() != c.cols()) {
    throw DimensionError("assemble_q_star: C and G must be square and of equal size");
  }
  auto const cd = c.diagonal_values();
  std::vector<double> cinv(cd.size());
  for (std::size_t i = 0; i < cd.size(); ++i) {
    if (cd[i] == 0.0) throw NumericalError("assemble_q_star: zero diagonal in C");
    cinv[i] = 1.0 / cd[i];
  }
  return multiply(g, cinv, g);
}

}  // namespace

SparseMatrix assemble_q_star(SparseMatrix const& c, SparseMatrix const& g, double theta,
                             double kappa) {
  SparseMatrix const gcg = g_cinv_g(c, g);
  double const k2 = kappa * kappa;
  SparseMatrix const lin = add(c, g, k2 * k2, 2.0 * k2 * std::cos(std::numbers::pi * theta));
  return add(lin, gcg);
}

QStarTerms::QStarTerms(FemMatrices const& fem) {
  auto const gcg_m = g_cinv_g(fem.mass, fem.stiffness);
  pattern = add(add(fem.mass, fem.stiffness), gcg_m);
  auto scatter = [this](SparseMatrix const& t) {
    SparseMatrix const m = add(pattern, t, 0.0, 1.0);
    return std::vector<double>(m.values().begin(), m.values().end());
  };
  c = scatter(fem.mass);
  g = scatter(fem.stiffness);
  gcg = scatter(gcg_m);
}

SparseMatrix QStarTerms::assemble(double theta, double kappa) const {
  double const k2 = kappa * kappa;
  double const a = k2 * k2;
  double const b = 2.0 * k2 * std::cos(std::numbers::pi * theta);
  SparseMatrix q = pattern;
  auto v = q.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * c[i] + b * g[i] + gcg[i];
  return q;
}

MarginalPrecision marginalize_z(SparseMatrix const& q_z, std::span<std::size_t const> interior) {
  std::size_t const n = q_z.rows();
  if (interior.empty()) throw ConfigError("marginalize_z: empty interior");
  std::vector<char> is_int(n, 0);
  for (auto i : interior) {
    if (i >= n) throw OutOfBounds("marginalize_z: interior index out of range");
    is_int[i] = 1;
  }
  std::vector<std::size_t> ext;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_int[i]) ext.push_back(i);
  }
  if (ext.empty()) return {q_z, true};

  std::size_t const ni = interior.size();
  SparseMatrix const q_ee = q_z.submatrix(ext, ext);
  SparseMatrix const q_ei = q_z.submatrix(ext, interior);
  SparseMatrix const q_ii = q_z.submatrix(interior, interior);
  LowerTriangularFactor f;
  try {
    f = sparse_cholesky(q_ee, false);
  } catch (NotPositiveDefinite const&) {
    throw NumericalError("marginalize_z: singular exterior block");
  }
  // X = Q_EE^{-1} Q_EI, column by column.
  auto const ei = q_ei.to_dense();
  std::vector<double> x(ext.size() * ni);
  std::vector<double> col(ext.size());
  for (std::size_t j = 0; j < ni; ++j) {
    for (std::size_t e = 0; e < ext.size(); ++e) col[e] = ei[e * ni + j];
    cholesky_solve_inplace(f, col);
    for (std::size_t e = 0; e < ext.size(); ++e) x[e * ni + j] = col[e];
  }
  auto const ii = q_ii.to_dense();
  std::vector<Triplet> t;
  t.reserve(ni * ni);
  for (std::size_t a = 0; a < ni; ++a) {
    for (std::size_t b = 0; b < ni; ++b) {
      double s = ii[a * ni + b];
      for (std::size_t e = 0; e < ext.size(); ++e) s -= ei[e * ni + a] * x[e * ni + b];
      t.push_back({a, b, s});
    }
  }
  // Symmetrize away round-off.
  auto d = SparseMatrix::from_triplets(ni, ni, t).to_dense();
  for (std::size_t a = 0; a < ni; ++a) {
    for (std::size_t b = a + 1; b < ni; ++b) {
      double const avg = 0.5 * (d[a * ni + b] + d[b * ni + a]);
      d[a * ni + b] = d[b * ni + a] = avg;
    }
  }
  t.clear();
  for (std::size_t a = 0; a < ni; ++a)
    for (std::size_t b = 0; b < ni; ++b) t.push_back({a, b, d[a * ni + b]});
  return {SparseMatrix::from_triplets(ni, ni, t), false};
}

SpdeDiscretization::SpdeDiscretization(Mesh2D ms, Mesh1D mz)
    : mesh_s(std::move(ms)),
      mesh_z(std::move(mz)),
      fem_s(assemble_mass_stiffness(mesh_s)),
      fem_z(assemble_mass_stiffness(mesh_z)),
      terms_s(fem_s),
      terms_z(fem_z) {
  // The pattern of Q_s does not depend on the parameters.
  ordering_s = minimum_degree_ordering(terms_s.pattern);
}

double PrecisionOperator::log_determinant() const {
  double const ns = double(n_s());
  double const nz = double(n_z());
  return nz * chol_s.log_determinant() + ns * chol_z.log_determinant() +
         ns * nz * std::log(tau * tau);
}

double PrecisionOperator::unscaled_quadratic_form(std::span<double const> w) const {
  auto const qw = kron_matvec(KroneckerOperator{q_s, q_z, 1.0}, w);
  return dot(w, qw);
}

std::vector<double> PrecisionOperator::q_s_inverse_column(std::size_t s) const {
  std::vector<double> e(n_s(), 0.0);
  e.at(s) = 1.0;
  cholesky_solve_inplace(chol_s, e);
  return e;
}

std::vector<double> PrecisionOperator::q_z_inverse_dense() const {
  std::size_t const n = n_z();
  std::vector<double> inv(n * n);
  std::vector<double> e(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    cholesky_solve_inplace(chol_z, e);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = e[i];
  }
  return inv;
}

PrecisionOperator build_precision(OscParams const& p, SpdeDiscretization const& disc) {
  p.validate();
  PrecisionOperator op;
  op.tau = p.tau;
  op.q_s = disc.terms_s.assemble(p.theta_s, p.kappa_s);
  SparseMatrix const qz_full = disc.terms_z.assemble(p.theta_z, p.kappa_z);
  op.q_z = marginalize_z(qz_full, disc.mesh_z.interior_indices()).q;
  op.chol_s = sparse_cholesky(op.q_s, disc.ordering_s);
  op.chol_z = sparse_cholesky(op.q_z, false);
  return op;
}

PrecisionOperator build_precision(OscParams const& p, Mesh2D const& mesh_s, Mesh1D const& mesh_z) {
  return build_precision(p, SpdeDiscretization(mesh_s, mesh_z));
}

double cor_z(double d, double theta_z, double kappa_z) {
  d = std::abs(d);
  if (d == 0.0) return 1.0;
  double const x = kappa_z * d;
  if (theta_z == 0.0) return (1.0 + x) * std::exp(-x);
  double const a = 0.5 * std::numbers::pi * theta_z;
  return std::exp(-x * std::cos(a)) * std::sin(a + x * std::sin(a)) / std::sin(a);
}

double cor_s(double r, double theta_s, double kappa_s) {
  r = std::abs(r);
  if (r == 0.0) return 1.0;
  double const x = kappa_s * r;
  if (theta_s == 0.0) return x > 700.0 ? 0.0 : x * std::cyl_bessel_k(1.0, x);
  double const a = 0.5 * std::numbers::pi * theta_s;
  if (x * std::cos(a) > 700.0) return 0.0;
  std::complex<double> const z = std::polar(x, a);
  return -2.0 / (std::numbers::pi * theta_s) * bessel_k0(z).imag();
}

std::vector<double> sample_gmrf_prior(PrecisionOperator const& prec, RandomStream& rng) {
  std::vector<double> w(prec.size());
  rng.fill_normal(w);
  kron_factor_transpose_solve_inplace(prec.chol_s, prec.chol_z, w);
  for (auto& v : w) v /= prec.tau;
  return w;
}

std::vector<double> sample_gmrf_prior(PrecisionOperator const& prec, std::uint64_t seed) {
  RandomStream rng(seed, "prior");
  return sample_gmrf_prior(prec, rng);
}

}  // namespace porogen
