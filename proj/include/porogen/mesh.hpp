#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "porogen/sparse.hpp"

namespace porogen {

// 1D mesh of the depth axis. Nodes sit at unit voxel spacing (scaled by
// `spacing`); the interior block [interior_begin, interior_begin + n_interior)
// coincides with the data voxels.
struct Mesh1D {
  std::vector<double> positions;
  std::size_t interior_begin = 0;
  std::size_t n_interior = 0;

  std::size_t size() const { return positions.size(); }
  std::vector<std::size_t> interior_indices() const;
  std::vector<std::size_t> exterior_indices() const;
};

// 2D mesh of the s-plane. Nodes 0 .. nx*ny-1 are the data lattice, numbered
// y * nx + x; exterior ring nodes follow.
struct Mesh2D {
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::size_t nx = 0;
  std::size_t ny = 0;

  std::size_t size() const { return vertices.size(); }
  std::size_t n_interior() const { return nx * ny; }
};

// Default z-extension: ceil(n_interior / 2) nodes on each side.
std::size_t default_z_extension(std::size_t n_interior);

// Throws ConfigError when n_interior < 2 and MissingExtension when the
// extension is zero unless allow_zero_extension is set.
Mesh1D build_mesh_1d(std::size_t n_interior, std::size_t n_ext_each_side, double spacing = 1.0,
                     bool allow_zero_extension = false);

// Graded tensor-product mesh: exterior coordinates at offsets 1, 3, 7, ...
// (spacing doubling outward) up to ext_fraction * max(nx, ny) voxels beyond
// the data lattice, each grid cell split into two triangles.
Mesh2D build_mesh_2d(std::size_t nx, std::size_t ny, double ext_fraction, double spacing = 1.0);

struct FemMatrices {
  SparseMatrix mass;       // lumped, diagonal
  SparseMatrix stiffness;  // G_ij = ∫ ∇φ_i · ∇φ_j
};

FemMatrices assemble_mass_stiffness(Mesh1D const& mesh);
FemMatrices assemble_mass_stiffness(Mesh2D const& mesh);

// Binary voxel -> weight selection. Voxels are ordered x-fastest
// (x + nx * (y + ny * z)); weights are ordered s * n_z + z with s the s-mesh
// node and z the interior depth index.
struct ObservationMap {
  SparseMatrix matrix;
  std::vector<std::size_t> node_of_voxel;
  std::size_t n_weights = 0;
  std::array<std::size_t, 3> dims{};

  std::size_t n_voxels() const { return node_of_voxel.size(); }
  std::vector<double> apply(std::span<double const> w) const;
  std::vector<double> apply_transpose(std::span<double const> voxel_values) const;
};

// With refinement r the meshes carry (n - 1) r + 1 interior nodes per axis
// and voxel (x, y, z) observes the node at (r x, r y, r z).
ObservationMap build_observation_map(Mesh2D const& mesh_s, Mesh1D const& mesh_z,
                                     std::array<std::size_t, 3> vol_dims, std::size_t refinement = 1);

std::string mesh_to_json(Mesh2D const& mesh);

}  // namespace porogen
