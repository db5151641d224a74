#include "porogen/microstructure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "porogen/error.hpp"

namespace porogen {

GrayVolume latent_voxel_field(std::span<double const> w, ObservationMap const& a,
                              VoxelSize voxel_size) {
  return GrayVolume(a.dims, a.apply(w), voxel_size);
}

BinaryVolume simulate_noisy_binary(std::span<double const> w, ObservationMap const& a,
                                   OscParams const& p, RandomStream& rng, VoxelSize voxel_size) {
  auto const x = a.apply(w);
  std::vector<std::uint8_t> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + p.sigma * rng.normal() >= p.u ? 1 : 0;
  return BinaryVolume(a.dims, std::move(y), voxel_size);
}

BinaryVolume simulate_noisy_binary(std::span<double const> w, ObservationMap const& a,
                                   OscParams const& p, std::uint64_t seed, VoxelSize voxel_size) {
  RandomStream rng(seed, "noise");
  return simulate_noisy_binary(w, a, p, rng, voxel_size);
}

GrayVolume mean_filter(BinaryVolume const& y, int nbhd) {
  if (nbhd != 3 && nbhd != 5) throw ConfigError("mean filter neighbourhood must be 3 or 5");
  auto const [nx, ny, nz] = y.dims();
  // Inclusive prefix sums with a zero border.
  std::size_t const px = nx + 1, py = ny + 1;
  std::vector<std::int64_t> ps(px * py * (nz + 1), 0);
  auto at = [&](std::size_t x, std::size_t yy, std::size_t z) -> std::int64_t& {
    return ps[x + px * (yy + py * z)];
  };
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t yy = 0; yy < ny; ++yy)
      for (std::size_t x = 0; x < nx; ++x)
        at(x + 1, yy + 1, z + 1) = std::int64_t(y(x, yy, z) != 0) + at(x, yy + 1, z + 1) +
                                   at(x + 1, yy, z + 1) + at(x + 1, yy + 1, z) - at(x, yy, z + 1) -
                                   at(x, yy + 1, z) - at(x + 1, yy, z) + at(x, yy, z);
  std::size_t const h = std::size_t(nbhd / 2);
  GrayVolume out(y.dims(), 0.0, y.voxel_size());
  for (std::size_t z = 0; z < nz; ++z) {
    std::size_t const z0 = z >= h ? z - h : 0, z1 = std::min(nz, z + h + 1);
    for (std::size_t yy = 0; yy < ny; ++yy) {
      std::size_t const y0 = yy >= h ? yy - h : 0, y1 = std::min(ny, yy + h + 1);
      for (std::size_t x = 0; x < nx; ++x) {
        std::size_t const x0 = x >= h ? x - h : 0, x1 = std::min(nx, x + h + 1);
        std::int64_t const s = at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0) +
                               at(x0, y0, z1) + at(x0, y1, z0) + at(x1, y0, z0) - at(x0, y0, z0);
        double const count = double((x1 - x0) * (y1 - y0) * (z1 - z0));
        out(x, yy, z) = double(s) / count;
      }
    }
  }
  return out;
}

BinaryVolume mean_filter_rethreshold(BinaryVolume const& y, int nbhd, double target_vf) {
  if (!(target_vf > 0.0 && target_vf <= 1.0)) throw ConfigError("target volume fraction must lie in (0,1]");
  auto const smooth = mean_filter(y, nbhd);
  std::size_t const n = y.size();
  auto const k = static_cast<std::size_t>(std::llround(target_vf * double(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto const& v = smooth.data();
  auto const before = [&v](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); };
  if (k < n) std::nth_element(order.begin(), order.begin() + std::ptrdiff_t(k), order.end(), before);
  BinaryVolume out(y.dims(), 0, y.voxel_size());
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = 1;
  return out;
}

int choose_filter_size(double kappa_s, double spacing, double cutoff_voxels) {
  if (!(kappa_s > 0.0) || !(spacing > 0.0)) throw ConfigError("choose_filter_size: kappa and spacing must be positive");
  return 1.0 / (kappa_s * spacing) < cutoff_voxels ? 3 : 5;
}

double volume_fraction(BinaryVolume const& v) {
  if (v.size() == 0) return 0.0;
  return double(count_ones(v)) / double(v.size());
}

namespace {

CroftonDirections compute_crofton(VoxelSize const& vs) {
  CroftonDirections cd{};
  std::size_t k = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        // One representative of each +/- pair.
        std::array<int, 3> const o{dx, dy, dz};
        auto const first = std::find_if(o.begin(), o.end(), [](int c) { return c != 0; });
        if (first == o.end() || *first < 0) continue;
        cd.offsets[k++] = o;
      }
  std::array<std::array<double, 3>, 13> unit{};
  for (std::size_t i = 0; i < 13; ++i) {
    double l2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      unit[i][c] = cd.offsets[i][c] * vs[c];
      l2 += unit[i][c] * unit[i][c];
    }
    cd.lengths[i] = std::sqrt(l2);
    for (auto& c : unit[i]) c /= cd.lengths[i];
  }
  // Equal-area midpoint grid on the sphere (uniform in cos(polar), azimuth).
  constexpr std::size_t nu = 1200, nphi = 2400;
  std::array<std::size_t, 13> hits{};
  for (std::size_t a = 0; a < nu; ++a) {
    double const ct = -1.0 + (2.0 * double(a) + 1.0) / double(nu);
    double const st = std::sqrt(1.0 - ct * ct);
    for (std::size_t b = 0; b < nphi; ++b) {
      double const phi = 2.0 * std::numbers::pi * (double(b) + 0.5) / double(nphi);
      double const p[3] = {st * std::cos(phi), st * std::sin(phi), ct};
      std::size_t best = 0;
      double best_dot = -1.0;
      for (std::size_t i = 0; i < 13; ++i) {
        double const d = std::abs(p[0] * unit[i][0] + p[1] * unit[i][1] + p[2] * unit[i][2]);
        if (d > best_dot) {
          best_dot = d;
          best = i;
        }
      }
      ++hits[best];
    }
  }
  for (std::size_t i = 0; i < 13; ++i) cd.weights[i] = double(hits[i]) / double(nu * nphi);
  return cd;
}

}  // namespace

CroftonDirections crofton_directions(VoxelSize const& voxel_size) {
  static std::mutex mu;
  static std::map<VoxelSize, CroftonDirections> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(voxel_size);
  if (it == cache.end()) it = cache.emplace(voxel_size, compute_crofton(voxel_size)).first;
  return it->second;
}

double surface_area(BinaryVolume const& v) {
  if (v.size() == 0) return 0.0;
  auto const cd = crofton_directions(v.voxel_size());
  auto const [nx, ny, nz] = v.dims();
  double s = 0.0;
  for (std::size_t k = 0; k < 13; ++k) {
    auto const [dx, dy, dz] = cd.offsets[k];
    std::size_t transitions = 0;
    for (std::size_t z = 0; z < nz; ++z) {
      long const z2 = long(z) + dz;
      if (z2 < 0 || z2 >= long(nz)) continue;
      for (std::size_t y = 0; y < ny; ++y) {
        long const y2 = long(y) + dy;
        if (y2 < 0 || y2 >= long(ny)) continue;
        for (std::size_t x = 0; x < nx; ++x) {
          long const x2 = long(x) + dx;
          if (x2 < 0 || x2 >= long(nx)) continue;
          if ((v(x, y, z) != 0) != (v(std::size_t(x2), std::size_t(y2), std::size_t(z2)) != 0)) ++transitions;
        }
      }
    }
    s += cd.weights[k] * double(transitions) / cd.lengths[k];
  }
  return 2.0 * s / double(v.size());
}

}  // namespace porogen
