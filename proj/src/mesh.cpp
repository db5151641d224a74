#include "porogen/mesh.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "porogen/error.hpp"

namespace porogen {

std::vector<std::size_t> Mesh1D::interior_indices() const {
  std::vector<std::size_t> idx(n_interior);
  for (std::size_t i = 0; i < n_interior; ++i) idx[i] = interior_begin + i;
  return idx;
}

std::vector<std::size_t> Mesh1D::exterior_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i) {
    if (i < interior_begin || i >= interior_begin + n_interior) idx.push_back(i);
  }
  return idx;
}

std::size_t default_z_extension(std::size_t n_interior) { return (n_interior + 1) / 2; }

Mesh1D build_mesh_1d(std::size_t n_interior, std::size_t n_ext_each_side, double spacing,
                     bool allow_zero_extension) {
  if (n_interior < 2) throw ConfigError("build_mesh_1d: need at least 2 interior nodes");
  if (!(spacing > 0.0)) throw ConfigError("build_mesh_1d: spacing must be positive");
  if (n_ext_each_side == 0 && !allow_zero_extension) {
    throw MissingExtension("build_mesh_1d: zero boundary extension");
  }
  Mesh1D m;
  std::size_t const n = n_interior + 2 * n_ext_each_side;
  m.positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.positions[i] = spacing * static_cast<double>(i);
  m.interior_begin = n_ext_each_side;
  m.n_interior = n_interior;
  return m;
}

namespace {

std::vector<double> exterior_offsets(double width) {
  std::vector<double> off;
  if (width <= 0.0) return off;
  double step = 1.0;
  double o = 1.0;
  off.push_back(o);
  for (;;) {
    step *= 2.0;
    if (o + step > width) break;
    o += step;
    off.push_back(o);
  }
  return off;
}

}  // namespace

Mesh2D build_mesh_2d(std::size_t nx, std::size_t ny, double ext_fraction, double spacing) {
  if (nx < 2 || ny < 2) throw ConfigError("build_mesh_2d: nx and ny must be at least 2");
  if (!(ext_fraction >= 0.0)) throw ConfigError("build_mesh_2d: ext_fraction must be >= 0");
  if (!(spacing > 0.0)) throw ConfigError("build_mesh_2d: spacing must be positive");

  auto const off = exterior_offsets(ext_fraction * static_cast<double>(std::max(nx, ny)));
  std::size_t const k = off.size();
  auto axis = [&](std::size_t n) {
    std::vector<double> g;
    for (std::size_t i = k; i-- > 0;) g.push_back(-off[i]);
    for (std::size_t i = 0; i < n; ++i) g.push_back(static_cast<double>(i));
    for (std::size_t i = 0; i < k; ++i) g.push_back(static_cast<double>(n - 1) + off[i]);
    return g;
  };
  auto const gx = axis(nx);
  auto const gy = axis(ny);
  std::size_t const mx = gx.size();
  std::size_t const my = gy.size();

  Mesh2D mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  std::vector<std::size_t> id(mx * my);
  mesh.vertices.resize(mx * my);
  std::size_t next_ext = nx * ny;
  for (std::size_t b = 0; b < my; ++b) {
    for (std::size_t a = 0; a < mx; ++a) {
      bool const inside = a >= k && a < k + nx && b >= k && b < k + ny;
      std::size_t const node = inside ? (b - k) * nx + (a - k) : next_ext++;
      id[b * mx + a] = node;
      mesh.vertices[node] = {spacing * gx[a], spacing * gy[b]};
    }
  }
  for (std::size_t b = 0; b + 1 < my; ++b) {
    for (std::size_t a = 0; a + 1 < mx; ++a) {
      std::size_t const v00 = id[b * mx + a];
      std::size_t const v10 = id[b * mx + a + 1];
      std::size_t const v01 = id[(b + 1) * mx + a];
      std::size_t const v11 = id[(b + 1) * mx + a + 1];
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

FemMatrices assemble_mass_stiffness(Mesh1D const& mesh) {
  std::size_t const n = mesh.size();
  std::vector<double> c(n, 0.0);
  std::vector<Triplet> g;
  for (std::size_t e = 0; e + 1 < n; ++e) {
    double const h = mesh.positions[e + 1] - mesh.positions[e];
    if (!(h > 0.0)) throw MeshDegenerate("assemble_mass_stiffness: non-increasing 1D nodes");
    c[e] += 0.5 * h;
    c[e + 1] += 0.5 * h;
    g.push_back({e, e, 1.0 / h});
    g.push_back({e + 1, e + 1, 1.0 / h});
    g.push_back({e, e + 1, -1.0 / h});
    g.push_back({e + 1, e, -1.0 / h});
  }
  return {SparseMatrix::diagonal(c), SparseMatrix::from_triplets(n, n, g)};
}

FemMatrices assemble_mass_stiffness(Mesh2D const& mesh) {
  std::size_t const n = mesh.size();
  std::vector<double> c(n, 0.0);
  std::vector<Triplet> g;
  g.reserve(mesh.triangles.size() * 9);
  for (auto const& t : mesh.triangles) {
    auto const& p0 = mesh.vertices[t[0]];
    auto const& p1 = mesh.vertices[t[1]];
    auto const& p2 = mesh.vertices[t[2]];
    double const det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    double const area = 0.5 * std::abs(det);
    if (!(area > 1e-14)) throw MeshDegenerate("assemble_mass_stiffness: zero-area triangle");
    // Gradients of the barycentric hat functions (times 2 * signed area).
    std::array<std::array<double, 2>, 3> grad = {{{p1[1] - p2[1], p2[0] - p1[0]},
                                                  {p2[1] - p0[1], p0[0] - p2[0]},
                                                  {p0[1] - p1[1], p1[0] - p0[0]}}};
    for (std::size_t i = 0; i < 3; ++i) {
      c[t[i]] += area / 3.0;
      for (std::size_t j = 0; j < 3; ++j) {
        double const v = (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]) / (4.0 * area);
        g.push_back({t[i], t[j], v});
      }
    }
  }
  return {SparseMatrix::diagonal(c), SparseMatrix::from_triplets(n, n, g)};
}

std::vector<double> ObservationMap::apply(std::span<double const> w) const {
  if (w.size() != n_weights) throw DimensionError("ObservationMap::apply: length mismatch");
  std::vector<double> out(node_of_voxel.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w[node_of_voxel[i]];
  return out;
}

std::vector<double> ObservationMap::apply_transpose(std::span<double const> voxel_values) const {
  if (voxel_values.size() != node_of_voxel.size()) {
    throw DimensionError("ObservationMap::apply_transpose: length mismatch");
  }
  std::vector<double> out(n_weights, 0.0);
  for (std::size_t i = 0; i < voxel_values.size(); ++i) out[node_of_voxel[i]] += voxel_values[i];
  return out;
}

ObservationMap build_observation_map(Mesh2D const& mesh_s, Mesh1D const& mesh_z,
                                     std::array<std::size_t, 3> vol_dims, std::size_t refinement) {
  auto const [nx, ny, nz] = vol_dims;
  std::size_t const r = refinement;
  if (r == 0) throw ConfigError("build_observation_map: refinement must be positive");
  auto const fine = [r](std::size_t n) { return (n - 1) * r + 1; };
  if (nx == 0 || ny == 0 || nz == 0 || fine(nx) != mesh_s.nx || fine(ny) != mesh_s.ny ||
      fine(nz) != mesh_z.n_interior) {
    throw DimensionError("build_observation_map: volume dims do not match mesh interiors");
  }
  std::size_t const mx = mesh_s.nx, mz = mesh_z.n_interior;
  ObservationMap a;
  a.n_weights = mesh_s.size() * mz;
  a.dims = vol_dims;
  a.node_of_voxel.resize(nx * ny * nz);
  std::vector<Triplet> t;
  t.reserve(a.node_of_voxel.size());
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        std::size_t const voxel = x + nx * (y + ny * z);
        std::size_t const node = (y * r * mx + x * r) * mz + z * r;
        a.node_of_voxel[voxel] = node;
        t.push_back({voxel, node, 1.0});
      }
    }
  }
  a.matrix = SparseMatrix::from_triplets(a.node_of_voxel.size(), a.n_weights, t);
  return a;
}

std::string mesh_to_json(Mesh2D const& mesh) {
  nlohmann::json j;
  j["nx"] = mesh.nx;
  j["ny"] = mesh.ny;
  j["vertices"] = mesh.vertices;
  j["triangles"] = mesh.triangles;
  return j.dump();
}

}  // namespace porogen
