#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "porogen/mesh.hpp"
#include "porogen/spde.hpp"
#include "porogen/volume.hpp"

namespace porogen {

enum class CovKind { s_plane, z_line };

struct CovCurve {
  std::vector<double> lags;
  std::vector<double> values;
  CovKind kind = CovKind::s_plane;
};

// In-plane covariance pooled over layers. Pairs at Euclidean distance r fall
// in bin round(r) (unit-width bins centered at integers).
CovCurve empirical_cov_splane(BinaryVolume const& v, std::size_t max_lag);
CovCurve empirical_cov_zline(BinaryVolume const& v, std::size_t max_lag);

// Cov(1[X > u1], 1[Y > u2]) for standard bivariate normal (X, Y) with
// correlation rho.
double thresholded_cov(double rho, double u1, double u2);

struct ModelCov {
  CovCurve s_plane;
  CovCurve z_line;
};

// Covariance of the noisy thresholded field y around the central voxel.
ModelCov model_marginal_cov(OscParams const& p, PrecisionOperator const& prec,
                            ObservationMap const& a, std::size_t max_lag_s, std::size_t max_lag_z);

struct Envelope {
  std::vector<double> lower;
  std::vector<double> upper;
  double alpha = 0.05;
  std::size_t n_sims = 0;
  // Pointwise quantile levels are beta/2 and 1 - beta/2.
  double beta = 0.0;
  double fraction_inside = 1.0;

  bool contains(std::span<double const> curve) const;
};

inline constexpr std::size_t kMinEnvelopeCurves = 50;

// Simultaneous band: the largest beta (narrowest band) whose pointwise band holds a
// fraction >= 1 - alpha of the curves entirely.
Envelope simultaneous_envelope(std::vector<std::vector<double>> const& curves, double alpha);

// Sample quantile with linear interpolation between order statistics.
double sample_quantile(std::vector<double> values, double q);

enum class Element { sphere, line_x, line_y, line_z };
enum class Phase { pore, matrix };

std::string to_string(Element e);
std::string to_string(Phase p);
Element element_from_string(std::string const& s);

struct SizeDistribution {
  std::vector<std::size_t> lambdas;
  std::vector<double> survival;
  std::vector<double> density;
  Element element = Element::sphere;
  Phase phase = Phase::pore;
};

// Element of size lambda: a segment of lambda voxels along the axis, or the
// digital ball of radius lambda - 1 (so lambda = 1 is a single voxel).
std::vector<std::array<int, 3>> structuring_element(Element e, std::size_t lambda);

// Opening of the set {v == 1} by the element of size lambda; voxels outside
// the volume count as outside the set.
BinaryVolume opening(BinaryVolume const& set, Element e, std::size_t lambda);

// Local size of each voxel of the set: the largest lambda whose opening
// contains it (0 off the set).
std::vector<std::size_t> local_size(BinaryVolume const& set, Element e);

SizeDistribution size_distribution(BinaryVolume const& v, Element e, Phase phase, std::size_t n_max);

}  // namespace porogen
