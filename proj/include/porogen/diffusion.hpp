#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "porogen/volume.hpp"

namespace porogen {

enum class LateralBoundary { no_flux, periodic };

std::string to_string(LateralBoundary b);
LateralBoundary lateral_boundary_from_string(std::string const& s);

struct DiffusionOptions {
  // Bound on the scaled residual; see FluxField::max_divergence.
  double tol = 1e-9;
  LateralBoundary lateral = LateralBoundary::no_flux;
  std::size_t max_iter = 0;
};

// Steady-state flux for c = 1 on the z = 0 layer and c = 0 on the last layer.
// Fluxes are scaled by (nz - 1), so an all-pore box carries J = (0, 0, 1).
struct FluxField {
  Dims dims{0, 0, 0};
  std::vector<std::array<double, 3>> flux;
  std::vector<double> concentration;
  // 1 on pore voxels.
  std::vector<std::uint8_t> pore;
  bool percolating = false;
  std::size_t iterations = 0;
  // Scaled total flux through each of the nz - 1 z-face planes, per unit
  // cross-section area.
  std::vector<double> plane_flux;
  // Largest scaled net flux out of a pore voxel with unknown concentration.
  double max_divergence = 0.0;
};

// Throws EmptyPhase when there is no pore voxel, ConfigError when nz < 2.
FluxField solve_diffusion(BinaryVolume const& v, DiffusionOptions const& options = {});

// Mean scaled J_z over all voxels (matrix counts as zero).
double effective_diffusion(FluxField const& f);

// 6-connected pore clusters touching both z = 0 and z = nz - 1.
std::vector<std::uint8_t> percolating_pores(BinaryVolume const& v, LateralBoundary lateral);

struct HistogramGrid {
  std::size_t n_bins = 20;
  std::array<double, 3> lo{-1.0, -1.0, -1.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  bool operator==(HistogramGrid const&) const = default;
  std::size_t size() const { return n_bins * n_bins * n_bins; }
  // Bin of a flux vector; values outside the range go to the edge bins.
  std::size_t bin_of(std::array<double, 3> const& j) const;
};

// Running moments of the flux components over pore voxels.
class FluxMoments {
 public:
  void add(FluxField const& f);
  // Mean +- n_sd standard deviations of each component; a unit-width range
  // around the mean when a component is constant.
  HistogramGrid grid(std::size_t n_bins = 20, double n_sd = 4.0) const;
  std::size_t count() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::array<double, 3> sum_{};
  std::array<double, 3> sum_sq_{};
};

HistogramGrid ensemble_grid(std::vector<FluxField> const& fields, std::size_t n_bins = 20, double n_sd = 4.0);

struct FluxHistogram3D {
  HistogramGrid grid;
  // Index ix + n * (iy + n * iz); sums to 1.
  std::vector<double> values;
};

// Histogram of the flux vectors of the pore voxels.
// Throws EmptyPhase without pore voxels.
FluxHistogram3D flux_histogram(FluxField const& f, HistogramGrid const& grid);

struct ExcursionResult {
  std::vector<std::size_t> set_plus;
  std::vector<std::size_t> set_minus;
  double u_j = 0.01;
  double alpha = 0.01;
  // Empirical joint probabilities of the returned sets.
  double joint_plus = 1.0;
  double joint_minus = 1.0;
};

inline constexpr std::size_t kMinExcursionMembers = 100;

// Greedy excursion sets over an ensemble of equally sized value vectors.
ExcursionResult excursion_sets(std::vector<std::vector<double>> const& values, double u_j, double alpha);
// Same on histograms; requires a common grid and at least kMinExcursionMembers
// members.
ExcursionResult excursion_sets(std::vector<FluxHistogram3D> const& hists, double u_j, double alpha);

struct ContainmentReport {
  bool pass = false;
  // Bins of E+ where the target is not above u_J.
  std::vector<std::size_t> plus_violations;
  // Bins of E- where the target is above u_J.
  std::vector<std::size_t> minus_violations;
};

ContainmentReport containment_test(ExcursionResult const& res, std::vector<double> const& target);
ContainmentReport containment_test(ExcursionResult const& res, FluxHistogram3D const& target);

nlohmann::json to_json(FluxHistogram3D const& h);
nlohmann::json to_json(ExcursionResult const& r);
nlohmann::json to_json(ContainmentReport const& r);

// Raw little-endian doubles (Jx, Jy, Jz per voxel) plus a JSON header.
void write_flux_field(std::filesystem::path const& base, FluxField const& f);

}  // namespace porogen
