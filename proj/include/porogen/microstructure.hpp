#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "porogen/mesh.hpp"
#include "porogen/random.hpp"
#include "porogen/spde.hpp"
#include "porogen/volume.hpp"

namespace porogen {

// X_FEM evaluated at voxel centers, A w.
GrayVolume latent_voxel_field(std::span<double const> w, ObservationMap const& a,
                              VoxelSize voxel_size = {1.0, 1.0, 1.0});

// y_i = 1 iff (A w)_i + sigma * eps_i >= u.
BinaryVolume simulate_noisy_binary(std::span<double const> w, ObservationMap const& a,
                                   OscParams const& p, RandomStream& rng,
                                   VoxelSize voxel_size = {1.0, 1.0, 1.0});
BinaryVolume simulate_noisy_binary(std::span<double const> w, ObservationMap const& a,
                                   OscParams const& p, std::uint64_t seed,
                                   VoxelSize voxel_size = {1.0, 1.0, 1.0});

// Cube mean over the part of the nbhd^3 window that lies inside the volume.
GrayVolume mean_filter(BinaryVolume const& y, int nbhd);

// Mean filter, then one global threshold giving the volume fraction closest
// to target_vf; ties in the smoothed value go to the lower voxel index.
BinaryVolume mean_filter_rethreshold(BinaryVolume const& y, int nbhd, double target_vf);

// Filter size from the fitted spatial range: 3 when 1/(kappa_s * spacing)
// is below the cutoff (in voxels), else 5.
int choose_filter_size(double kappa_s, double spacing, double cutoff_voxels = 8.0);

double volume_fraction(BinaryVolume const& v);

// The 13 lattice directions used by the Crofton estimate and their weights
// (fractions of the sphere closest to +/- each direction; they sum to 1).
struct CroftonDirections {
  std::array<std::array<int, 3>, 13> offsets;
  std::array<double, 13> weights;
  std::array<double, 13> lengths;  // physical length of each offset
};
CroftonDirections crofton_directions(VoxelSize const& voxel_size);

// Pore-matrix interface area per unit volume (Crofton formula, 13 directions).
double surface_area(BinaryVolume const& v);

}  // namespace porogen
