#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "porogen/cholesky.hpp"
#include "porogen/kronecker.hpp"
#include "porogen/mesh.hpp"
#include "porogen/random.hpp"
#include "porogen/sparse.hpp"

namespace porogen {

// Oscillating Matérn parameters plus threshold and noise scale.
struct OscParams {
  double theta_s = 0.5;
  double kappa_s = 1.0;
  double theta_z = 0.5;
  double kappa_z = 1.0;
  double tau = 1.0;
  double u = 0.0;
  double sigma = 1.0;

  // Throws ConfigError when outside theta in [0,1), kappa, tau, sigma > 0.
  void validate() const;
};

// Q = kappa^4 C + 2 kappa^2 cos(pi theta) G + G C^{-1} G
SparseMatrix assemble_q_star(SparseMatrix const& c, SparseMatrix const& g, double theta,
                             double kappa);

// C, G and G C^{-1} G scattered onto one shared pattern, so Q for new
// parameters is a linear combination of three value arrays.
struct QStarTerms {
  SparseMatrix pattern;
  std::vector<double> c;
  std::vector<double> g;
  std::vector<double> gcg;

  QStarTerms() = default;
  explicit QStarTerms(FemMatrices const& fem);
  SparseMatrix assemble(double theta, double kappa) const;
};

struct MarginalPrecision {
  SparseMatrix q;
  // Set when the interior covers every index and q is returned unchanged.
  bool no_exterior = false;
};

// Schur complement Q_II - Q_IE Q_EE^{-1} Q_EI, stored with a dense pattern.
MarginalPrecision marginalize_z(SparseMatrix const& q_z, std::span<std::size_t const> interior);

// Meshes, FEM matrices and the cached fill-reducing ordering of the Q_s
// pattern, shared by every precision built on the same meshes.
struct SpdeDiscretization {
  Mesh2D mesh_s;
  Mesh1D mesh_z;
  FemMatrices fem_s;
  FemMatrices fem_z;
  QStarTerms terms_s;
  QStarTerms terms_z;
  std::vector<std::size_t> ordering_s;

  SpdeDiscretization(Mesh2D mesh_s, Mesh1D mesh_z);
  std::size_t n_s() const { return mesh_s.size(); }
  std::size_t n_z() const { return mesh_z.n_interior; }
};

// tau^2 * Q_s ⊗ Q_z,marg with exact Cholesky factors of both blocks.
struct PrecisionOperator {
  SparseMatrix q_s;
  SparseMatrix q_z;
  double tau = 1.0;
  LowerTriangularFactor chol_s;
  LowerTriangularFactor chol_z;

  std::size_t n_s() const { return q_s.rows(); }
  std::size_t n_z() const { return q_z.rows(); }
  std::size_t size() const { return n_s() * n_z(); }

  KroneckerOperator kronecker() const { return {q_s, q_z, tau * tau}; }
  // log det(tau^2 Q_s ⊗ Q_z) = n_z logdet Q_s + n_s logdet Q_z + n_s n_z log tau^2
  double log_determinant() const;
  // w^T (Q_s ⊗ Q_z) w, without the tau^2 factor.
  double unscaled_quadratic_form(std::span<double const> w) const;
  // Covariance entries of the unit-tau field: (Q_s^{-1})_{:, s} and Q_z^{-1}.
  std::vector<double> q_s_inverse_column(std::size_t s) const;
  std::vector<double> q_z_inverse_dense() const;
};

PrecisionOperator build_precision(OscParams const& p, SpdeDiscretization const& disc);
PrecisionOperator build_precision(OscParams const& p, Mesh2D const& mesh_s, Mesh1D const& mesh_z);

// Closed-form oscillating Matérn correlations (distance in the same length
// units as the meshes).
double cor_z(double d, double theta_z, double kappa_z);
double cor_s(double r, double theta_s, double kappa_s);

// w = tau^{-1} (B_s ⊗ B_z)^{-T} z with z standard normal.
std::vector<double> sample_gmrf_prior(PrecisionOperator const& prec, RandomStream& rng);
std::vector<double> sample_gmrf_prior(PrecisionOperator const& prec, std::uint64_t seed);

}  // namespace porogen
