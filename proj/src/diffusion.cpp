#include "porogen/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "porogen/cholesky.hpp"
#include "porogen/error.hpp"
#include "porogen/pcg.hpp"
#include "porogen/sparse.hpp"

namespace porogen {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// Neighbor of voxel (x, y, z) one step along axis d in direction sign, or kNone.
struct Grid {
  std::size_t nx, ny, nz;
  bool periodic;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + nx * (y + ny * z); }

  std::size_t step(std::size_t x, std::size_t y, std::size_t z, int d, int sign) const {
    std::size_t c[3] = {x, y, z};
    std::size_t const n[3] = {nx, ny, nz};
    if (sign > 0) {
      if (c[d] + 1 < n[d]) ++c[d];
      else if (periodic && d < 2 && n[d] > 2) c[d] = 0;
      else return kNone;
    } else {
      if (c[d] > 0) --c[d];
      else if (periodic && d < 2 && n[d] > 2) c[d] = n[d] - 1;
      else return kNone;
    }
    return index(c[0], c[1], c[2]);
  }
};

std::vector<std::uint8_t> reachable_from_layer(BinaryVolume const& v, Grid const& g, std::size_t layer) {
  std::vector<std::uint8_t> seen(v.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t y = 0; y < g.ny; ++y)
    for (std::size_t x = 0; x < g.nx; ++x) {
      std::size_t const i = g.index(x, y, layer);
      if (v[i]) {
        seen[i] = 1;
        queue.push_back(i);
      }
    }
  while (!queue.empty()) {
    std::size_t const i = queue.front();
    queue.pop_front();
    std::size_t const x = i % g.nx, y = (i / g.nx) % g.ny, z = i / (g.nx * g.ny);
    for (int d = 0; d < 3; ++d)
      for (int sign : {-1, 1}) {
        std::size_t const j = g.step(x, y, z, d, sign);
        if (j != kNone && v[j] && !seen[j]) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
  }
  return seen;
}

}  // namespace

std::string to_string(LateralBoundary b) { return b == LateralBoundary::periodic ? "periodic" : "no_flux"; }

LateralBoundary lateral_boundary_from_string(std::string const& s) {
  if (s == "no_flux") return LateralBoundary::no_flux;
  if (s == "periodic") return LateralBoundary::periodic;
  throw ConfigError("unknown lateral boundary '" + s + "'");
}

std::vector<std::uint8_t> percolating_pores(BinaryVolume const& v, LateralBoundary lateral) {
  auto const [nx, ny, nz] = v.dims();
  std::vector<std::uint8_t> out(v.size(), 0);
  if (nz == 0) return out;
  Grid const g{nx, ny, nz, lateral == LateralBoundary::periodic};
  auto const top = reachable_from_layer(v, g, 0);
  auto const bottom = reachable_from_layer(v, g, nz - 1);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = top[i] && bottom[i];
  return out;
}

FluxField solve_diffusion(BinaryVolume const& v, DiffusionOptions const& options) {
  auto const [nx, ny, nz] = v.dims();
  if (nz < 2) throw ConfigError("solve_diffusion: need at least 2 layers in z");
  if (!(options.tol > 0.0)) throw ConfigError("solve_diffusion: tol must be positive");
  if (count_ones(v) == 0) throw EmptyPhase("solve_diffusion: the volume has no pore voxels");
  Grid const g{nx, ny, nz, options.lateral == LateralBoundary::periodic};
  double const scale = double(nz - 1);

  FluxField f;
  f.dims = v.dims();
  f.flux.assign(v.size(), {0.0, 0.0, 0.0});
  f.concentration.assign(v.size(), 0.0);
  f.pore.assign(v.data().begin(), v.data().end());
  f.plane_flux.assign(nz - 1, 0.0);
  auto const perc = percolating_pores(v, options.lateral);
  f.percolating = std::any_of(perc.begin(), perc.end(), [](std::uint8_t p) { return p != 0; });
  if (!f.percolating) return f;

  // Unknowns: percolating voxels strictly between the two fixed layers.
  std::vector<std::size_t> unknown(v.size(), kNone);
  std::vector<std::size_t> voxel_of;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!perc[i]) continue;
    std::size_t const z = i / (nx * ny);
    if (z == 0) f.concentration[i] = 1.0;
    else if (z + 1 < nz) {
      unknown[i] = voxel_of.size();
      voxel_of.push_back(i);
    }
  }

  std::size_t const n = voxel_of.size();
  if (n > 0) {
    std::vector<Triplet> t;
    std::vector<double> rhs(n, 0.0);
    std::vector<double> x0(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t const i = voxel_of[k];
      std::size_t const x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
      x0[k] = 1.0 - double(z) / scale;
      double diag = 0.0;
      for (int d = 0; d < 3; ++d)
        for (int sign : {-1, 1}) {
          std::size_t const j = g.step(x, y, z, d, sign);
          if (j == kNone || !perc[j]) continue;
          diag += 1.0;
          if (unknown[j] != kNone) t.push_back({k, unknown[j], -1.0});
          else rhs[k] += f.concentration[j];
        }
      t.push_back({k, k, diag});
    }
    SparseMatrix const a = SparseMatrix::from_triplets(n, n, t);
    auto const ic = ichol0(a);
    LinearMap const sys = [&a](std::span<double const> in, std::span<double> out) { a.multiply(in, out); };
    LinearMap const pre = [&ic](std::span<double const> in, std::span<double> out) {
      std::copy(in.begin(), in.end(), out.begin());
      cholesky_solve_inplace(ic, out);
    };
    PcgOptions po;
    po.tol = options.tol / (scale * std::max(norm2(rhs), 1.0));
    po.max_iter = options.max_iter ? options.max_iter : std::max<std::size_t>(default_max_iter(n), 2000);
    PcgResult res;
    try {
      res = pcg(sys, pre, rhs, po, x0);
    } catch (ConvergenceFailure const& e) {
      throw NumericalError("solve_diffusion: PCG did not converge (residual " + std::to_string(e.residual()) + " after " +
                           std::to_string(e.iterations()) + " iterations)");
    }
    f.iterations = res.iterations;
    for (std::size_t k = 0; k < n; ++k) f.concentration[voxel_of[k]] = res.x[k];
  }

  // Face fluxes averaged to voxel centers. Along z the fixed layers take the
  // flux of their single inner face.
  auto face = [&](std::size_t i, std::size_t j) {
    return (j != kNone && perc[i] && perc[j]) ? scale * (f.concentration[i] - f.concentration[j]) : 0.0;
  };
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        std::size_t const i = g.index(x, y, z);
        if (!perc[i]) continue;
        auto& j = f.flux[i];
        for (int d = 0; d < 2; ++d) {
          double const out_plus = face(i, g.step(x, y, z, d, 1));
          std::size_t const m = g.step(x, y, z, d, -1);
          double const in_minus = m == kNone ? 0.0 : face(m, i);
          j[std::size_t(d)] = 0.5 * (out_plus + in_minus);
        }
        double const up = z + 1 < nz ? face(i, g.index(x, y, z + 1)) : 0.0;
        double const down = z > 0 ? face(g.index(x, y, z - 1), i) : 0.0;
        if (z == 0) j[2] = up;
        else if (z + 1 == nz) j[2] = down;
        else j[2] = 0.5 * (up + down);
        if (z + 1 < nz) f.plane_flux[z] += up;
      }
  for (double& p : f.plane_flux) p /= double(nx * ny);

  for (std::size_t i : voxel_of) {
    std::size_t const x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
    double net = 0.0;
    for (int d = 0; d < 3; ++d)
      for (int sign : {-1, 1}) net += face(i, g.step(x, y, z, d, sign));
    f.max_divergence = std::max(f.max_divergence, std::abs(net));
  }
  return f;
}

double effective_diffusion(FluxField const& f) {
  if (f.flux.empty()) return 0.0;
  double s = 0.0;
  for (auto const& j : f.flux) s += j[2];
  return s / double(f.flux.size());
}

std::size_t HistogramGrid::bin_of(std::array<double, 3> const& j) const {
  std::size_t b[3];
  for (std::size_t d = 0; d < 3; ++d) {
    double const t = (j[d] - lo[d]) / (hi[d] - lo[d]) * double(n_bins);
    double const c = std::clamp(std::floor(t), 0.0, double(n_bins - 1));
    b[d] = static_cast<std::size_t>(c);
  }
  return b[0] + n_bins * (b[1] + n_bins * b[2]);
}

void FluxMoments::add(FluxField const& f) {
  for (std::size_t i = 0; i < f.flux.size(); ++i) {
    if (!f.pore[i]) continue;
    ++n_;
    for (std::size_t d = 0; d < 3; ++d) {
      sum_[d] += f.flux[i][d];
      sum_sq_[d] += f.flux[i][d] * f.flux[i][d];
    }
  }
}

HistogramGrid FluxMoments::grid(std::size_t n_bins, double n_sd) const {
  if (n_bins < 2) throw ConfigError("histogram: need at least 2 bins per axis");
  if (n_ == 0) throw EmptyPhase("histogram grid: no pore voxels");
  HistogramGrid g;
  g.n_bins = n_bins;
  for (std::size_t d = 0; d < 3; ++d) {
    double const m = sum_[d] / double(n_);
    double const var = std::max(0.0, sum_sq_[d] / double(n_) - m * m);
    // Spreads at round-off level count as constant; the mean then sits at
    // the center of a unit-width range's middle bin.
    double const sd = std::sqrt(var);
    if (sd > 1e-9 * std::max(1.0, std::abs(m))) {
      g.lo[d] = m - n_sd * sd;
      g.hi[d] = m + n_sd * sd;
    } else {
      g.lo[d] = m - (double(n_bins / 2) + 0.5) / double(n_bins);
      g.hi[d] = g.lo[d] + 1.0;
    }
  }
  return g;
}

HistogramGrid ensemble_grid(std::vector<FluxField> const& fields, std::size_t n_bins, double n_sd) {
  FluxMoments m;
  for (auto const& f : fields) m.add(f);
  return m.grid(n_bins, n_sd);
}

FluxHistogram3D flux_histogram(FluxField const& f, HistogramGrid const& grid) {
  if (grid.n_bins < 2) throw ConfigError("histogram: need at least 2 bins per axis");
  for (std::size_t d = 0; d < 3; ++d)
    if (!(grid.hi[d] > grid.lo[d])) throw ConfigError("histogram: empty bin range");
  FluxHistogram3D h;
  h.grid = grid;
  h.values.assign(grid.size(), 0.0);
  double n = 0.0;
  for (std::size_t i = 0; i < f.flux.size(); ++i) {
    if (!f.pore[i]) continue;
    h.values[grid.bin_of(f.flux[i])] += 1.0;
    n += 1.0;
  }
  if (n == 0.0) throw EmptyPhase("flux_histogram: no pore voxels");
  for (double& v : h.values) v /= n;
  return h;
}

namespace {

std::vector<std::size_t> greedy_set(std::vector<std::vector<double>> const& values, double alpha, bool above,
                                    double u, double& joint) {
  std::size_t const m = values.size(), nb = values.front().size();
  auto hit = [&](std::size_t member, std::size_t b) {
    return above ? values[member][b] > u : values[member][b] < u;
  };
  std::vector<std::size_t> count(nb, 0);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t b = 0; b < nb; ++b) count[b] += hit(k, b);
  std::vector<std::size_t> order(nb);
  for (std::size_t b = 0; b < nb; ++b) order[b] = b;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return count[a] > count[b]; });

  double const need = (1.0 - alpha) * double(m) - 1e-9;
  std::vector<std::uint8_t> all(m, 1);
  std::size_t alive = m;
  std::vector<std::size_t> set;
  for (std::size_t b : order) {
    if (count[b] == 0) break;
    std::size_t next = 0;
    for (std::size_t k = 0; k < m; ++k) next += all[k] && hit(k, b);
    if (double(next) < need) break;
    for (std::size_t k = 0; k < m; ++k) all[k] = all[k] && hit(k, b);
    alive = next;
    set.push_back(b);
  }
  joint = double(alive) / double(m);
  std::sort(set.begin(), set.end());
  return set;
}

}  // namespace

ExcursionResult excursion_sets(std::vector<std::vector<double>> const& values, double u_j, double alpha) {
  if (!(alpha >= 0.0 && alpha < 0.5)) throw ConfigError("excursion_sets: alpha must lie in [0, 0.5)");
  if (values.empty()) throw ConfigError("excursion_sets: empty ensemble");
  for (auto const& v : values)
    if (v.size() != values.front().size()) throw DimensionError("excursion_sets: members differ in length");
  ExcursionResult r;
  r.u_j = u_j;
  r.alpha = alpha;
  r.set_plus = greedy_set(values, alpha, true, u_j, r.joint_plus);
  r.set_minus = greedy_set(values, alpha, false, u_j, r.joint_minus);
  return r;
}

ExcursionResult excursion_sets(std::vector<FluxHistogram3D> const& hists, double u_j, double alpha) {
  if (hists.size() < kMinExcursionMembers)
    throw ConfigError("excursion_sets: need at least " + std::to_string(kMinExcursionMembers) + " histograms");
  std::vector<std::vector<double>> values;
  values.reserve(hists.size());
  for (auto const& h : hists) {
    if (!(h.grid == hists.front().grid)) throw DimensionError("excursion_sets: histograms use different grids");
    values.push_back(h.values);
  }
  return excursion_sets(values, u_j, alpha);
}

ContainmentReport containment_test(ExcursionResult const& res, std::vector<double> const& target) {
  ContainmentReport r;
  for (std::size_t b : res.set_plus) {
    if (b >= target.size()) throw DimensionError("containment_test: bin outside the target grid");
    if (!(target[b] > res.u_j)) r.plus_violations.push_back(b);
  }
  for (std::size_t b : res.set_minus) {
    if (b >= target.size()) throw DimensionError("containment_test: bin outside the target grid");
    if (target[b] > res.u_j) r.minus_violations.push_back(b);
  }
  r.pass = r.plus_violations.empty() && r.minus_violations.empty();
  return r;
}

ContainmentReport containment_test(ExcursionResult const& res, FluxHistogram3D const& target) {
  return containment_test(res, target.values);
}

nlohmann::json to_json(FluxHistogram3D const& h) {
  return {{"n_bins", h.grid.n_bins}, {"lo", h.grid.lo}, {"hi", h.grid.hi}, {"values", h.values}};
}

nlohmann::json to_json(ExcursionResult const& r) {
  return {{"u_J", r.u_j},           {"alpha", r.alpha},           {"E_plus", r.set_plus},
          {"E_minus", r.set_minus}, {"joint_plus", r.joint_plus}, {"joint_minus", r.joint_minus}};
}

nlohmann::json to_json(ContainmentReport const& r) {
  return {{"pass", r.pass}, {"plus_violations", r.plus_violations}, {"minus_violations", r.minus_violations}};
}

void write_flux_field(std::filesystem::path const& base, FluxField const& f) {
  auto bin = base;
  bin += ".bin";
  auto json = base;
  json += ".json";
  std::ofstream os(bin, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + bin.string());
  for (auto const& j : f.flux) os.write(reinterpret_cast<char const*>(j.data()), sizeof(double) * 3);
  if (!os) throw IoError("write failed: " + bin.string());
  std::ofstream hs(json);
  if (!hs) throw IoError("cannot open for writing: " + json.string());
  nlohmann::json h{{"dims", f.dims},
                   {"layout", "x fastest, (Jx, Jy, Jz) float64 little-endian per voxel"},
                   {"percolating", f.percolating},
                   {"effective_diffusion", effective_diffusion(f)},
                   {"pcg_iterations", f.iterations},
                   {"max_divergence", f.max_divergence}};
  hs << h.dump(2) << "\n";
}

}  // namespace porogen
