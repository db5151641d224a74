#include "porogen/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "porogen/error.hpp"

namespace porogen {

namespace {

double mean_of(BinaryVolume const& v) {
  return v.size() ? double(count_ones(v)) / double(v.size()) : 0.0;
}

}  // namespace

CovCurve empirical_cov_splane(BinaryVolume const& v, std::size_t max_lag) {
  auto const [nx, ny, nz] = v.dims();
  if (max_lag >= std::min(nx, ny)) throw DimensionError("empirical_cov_splane: max_lag must be < min(nx, ny)");
  double const m = mean_of(v);
  std::vector<double> c(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) c[i] = double(v[i]) - m;

  std::vector<double> sum(max_lag + 1, 0.0);
  std::vector<double> count(max_lag + 1, 0.0);
  long const reach = long(max_lag) + 1;
  // Offsets in a half plane; each unordered pair is counted once, the pair
  // of a voxel with itself falls in bin 0.
  for (long dy = 0; dy <= reach; ++dy) {
    for (long dx = -reach; dx <= reach; ++dx) {
      if (dy == 0 && dx < 0) continue;
      auto const bin = static_cast<std::size_t>(std::llround(std::sqrt(double(dx * dx + dy * dy))));
      if (bin > max_lag) continue;
      if (long(nx) <= std::abs(dx) || long(ny) <= dy) continue;
      std::size_t const x0 = dx < 0 ? std::size_t(-dx) : 0, x1 = dx < 0 ? nx : nx - std::size_t(dx);
      double s = 0.0;
      for (std::size_t z = 0; z < nz; ++z) {
        for (std::size_t y = 0; y + std::size_t(dy) < ny; ++y) {
          double const* row = c.data() + v.index(0, y, z);
          double const* row2 = c.data() + v.index(0, y + std::size_t(dy), z);
          for (std::size_t x = x0; x < x1; ++x) s += row[x] * row2[std::size_t(long(x) + dx)];
        }
      }
      sum[bin] += s;
      count[bin] += double(nz * (x1 - x0) * (ny - std::size_t(dy)));
    }
  }
  CovCurve out;
  out.kind = CovKind::s_plane;
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out.lags.push_back(double(k));
    out.values.push_back(count[k] > 0 ? sum[k] / count[k] : 0.0);
  }
  return out;
}

CovCurve empirical_cov_zline(BinaryVolume const& v, std::size_t max_lag) {
  auto const [nx, ny, nz] = v.dims();
  if (max_lag >= nz) throw DimensionError("empirical_cov_zline: max_lag must be < nz");
  double const m = mean_of(v);
  std::size_t const layer = nx * ny;
  CovCurve out;
  out.kind = CovKind::z_line;
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t z = 0; z + k < nz; ++z)
      for (std::size_t i = 0; i < layer; ++i)
        s += (double(v[z * layer + i]) - m) * (double(v[(z + k) * layer + i]) - m);
    out.lags.push_back(double(k));
    out.values.push_back(s / double(layer * (nz - k)));
  }
  return out;
}

double thresholded_cov(double rho, double u1, double u2) {
  if (!(std::abs(rho) < 1.0)) throw DimensionError("thresholded_cov: |rho| must be < 1");
  if (rho == 0.0) return 0.0;
  // z = sin(t) removes the 1/sqrt(1 - z^2) singularity.
  auto const f = [u1, u2](double t) {
    double const st = std::sin(t), ct = std::cos(t);
    double const q = (u1 * u1 - 2.0 * st * u1 * u2 + u2 * u2) / (2.0 * ct * ct);
    return std::exp(-q) / (2.0 * std::numbers::pi);
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, std::asin(rho), 15, 1e-14, &err);
}

ModelCov model_marginal_cov(OscParams const& p, PrecisionOperator const& prec, ObservationMap const& a,
                            std::size_t max_lag_s, std::size_t max_lag_z) {
  auto const [nx, ny, nz] = a.dims;
  if (max_lag_s >= std::min(nx, ny) || max_lag_z >= nz) throw DimensionError("model_marginal_cov: lag exceeds volume");
  std::size_t const nzn = prec.n_z();
  std::size_t const cx = nx / 2, cy = ny / 2, cz = nz / 2;
  auto voxel = [&](std::size_t x, std::size_t y, std::size_t z) { return x + nx * (y + ny * z); };
  std::size_t const ref_node = a.node_of_voxel[voxel(cx, cy, cz)];
  std::size_t const s_ref = ref_node / nzn, z_ref = ref_node % nzn;
  double const inv_tau2 = 1.0 / (prec.tau * prec.tau);
  auto const col_s = prec.q_s_inverse_column(s_ref);
  auto const inv_z = prec.q_z_inverse_dense();

  double const sigma2 = p.sigma * p.sigma;
  std::vector<double> diag_s_cache(prec.n_s(), -1.0);
  auto diag_s = [&](std::size_t s) {
    if (diag_s_cache[s] < 0.0) diag_s_cache[s] = prec.q_s_inverse_column(s)[s];
    return diag_s_cache[s];
  };
  auto alpha = [&](std::size_t s, std::size_t z) {
    return std::sqrt(inv_tau2 * diag_s(s) * inv_z[z * nzn + z] + sigma2);
  };
  double const a_ref = alpha(s_ref, z_ref);
  double const u_ref = p.u / a_ref;
  double const pr = 0.5 * std::erfc(u_ref / std::numbers::sqrt2);
  double const var0 = pr * (1.0 - pr);

  auto pair_cov = [&](std::size_t node) {
    std::size_t const s = node / nzn, z = node % nzn;
    double const a_j = alpha(s, z);
    double const c = inv_tau2 * col_s[s] * inv_z[z * nzn + z_ref];
    return thresholded_cov(c / (a_ref * a_j), u_ref, p.u / a_j);
  };

  ModelCov out;
  out.s_plane.kind = CovKind::s_plane;
  std::vector<double> sum(max_lag_s + 1, 0.0), count(max_lag_s + 1, 0.0);
  long const reach = long(max_lag_s) + 1;
  for (long dy = -reach; dy <= reach; ++dy) {
    for (long dx = -reach; dx <= reach; ++dx) {
      auto const bin = static_cast<std::size_t>(std::llround(std::sqrt(double(dx * dx + dy * dy))));
      if (bin == 0 || bin > max_lag_s) continue;
      long const x = long(cx) + dx, y = long(cy) + dy;
      if (x < 0 || y < 0 || x >= long(nx) || y >= long(ny)) continue;
      sum[bin] += pair_cov(a.node_of_voxel[voxel(std::size_t(x), std::size_t(y), cz)]);
      count[bin] += 1.0;
    }
  }
  for (std::size_t k = 0; k <= max_lag_s; ++k) {
    out.s_plane.lags.push_back(double(k));
    out.s_plane.values.push_back(k == 0 ? var0 : (count[k] > 0 ? sum[k] / count[k] : 0.0));
  }
  out.z_line.kind = CovKind::z_line;
  for (std::size_t k = 0; k <= max_lag_z; ++k) {
    out.z_line.lags.push_back(double(k));
    if (k == 0) {
      out.z_line.values.push_back(var0);
      continue;
    }
    double s = 0.0, n = 0.0;
    for (long dz : {-long(k), long(k)}) {
      long const z = long(cz) + dz;
      if (z < 0 || z >= long(nz)) continue;
      s += pair_cov(a.node_of_voxel[voxel(cx, cy, std::size_t(z))]);
      n += 1.0;
    }
    out.z_line.values.push_back(s / n);
  }
  return out;
}

bool Envelope::contains(std::span<double const> curve) const {
  if (curve.size() != lower.size()) throw DimensionError("envelope: curve length mismatch");
  for (std::size_t i = 0; i < curve.size(); ++i)
    if (curve[i] < lower[i] || curve[i] > upper[i]) return false;
  return true;
}

namespace {

double quantile_sorted(std::vector<double> const& s, double q) {
  double const h = q * double(s.size() - 1);
  auto const lo = static_cast<std::size_t>(std::floor(h));
  std::size_t const hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - double(lo)) * (s[hi] - s[lo]);
}

}  // namespace

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DimensionError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

Envelope simultaneous_envelope(std::vector<std::vector<double>> const& curves, double alpha) {
  if (curves.size() < kMinEnvelopeCurves) throw ConfigError("simultaneous_envelope: need at least 50 curves");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("simultaneous_envelope: alpha must lie in (0,1)");
  std::size_t const len = curves.front().size();
  for (auto const& c : curves)
    if (c.size() != len) throw DimensionError("simultaneous_envelope: curves on different grids");
  std::vector<std::vector<double>> columns(len, std::vector<double>(curves.size()));
  for (std::size_t j = 0; j < curves.size(); ++j)
    for (std::size_t i = 0; i < len; ++i) columns[i][j] = curves[j][i];
  for (auto& c : columns) std::sort(c.begin(), c.end());

  auto band = [&](double beta) {
    Envelope e;
    e.alpha = alpha;
    e.n_sims = curves.size();
    e.beta = beta;
    e.lower.resize(len);
    e.upper.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      e.lower[i] = quantile_sorted(columns[i], beta / 2.0);
      e.upper[i] = quantile_sorted(columns[i], 1.0 - beta / 2.0);
    }
    std::size_t inside = 0;
    for (auto const& c : curves) inside += e.contains(c);
    e.fraction_inside = double(inside) / double(curves.size());
    return e;
  };
  double lo = 0.0, hi = 1.0;
  Envelope best = band(0.0);
  for (int it = 0; it < 60; ++it) {
    double const mid = 0.5 * (lo + hi);
    Envelope e = band(mid);
    if (e.fraction_inside >= 1.0 - alpha) {
      lo = mid;
      best = std::move(e);
    } else {
      hi = mid;
    }
  }
  return best;
}

std::string to_string(Element e) {
  switch (e) {
    case Element::sphere: return "sphere";
    case Element::line_x: return "line_x";
    case Element::line_y: return "line_y";
    case Element::line_z: return "line_z";
  }
  return "?";
}

std::string to_string(Phase p) { return p == Phase::pore ? "pore" : "matrix"; }

Element element_from_string(std::string const& s) {
  for (Element e : {Element::sphere, Element::line_x, Element::line_y, Element::line_z})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown structuring element '" + s + "'");
}

std::vector<std::array<int, 3>> structuring_element(Element e, std::size_t lambda) {
  if (lambda == 0) throw ConfigError("structuring element size must be >= 1");
  std::vector<std::array<int, 3>> out;
  int const l = int(lambda);
  if (e == Element::sphere) {
    int const r = l - 1;
    for (int z = -r; z <= r; ++z)
      for (int y = -r; y <= r; ++y)
        for (int x = -r; x <= r; ++x)
          if (x * x + y * y + z * z <= r * r) out.push_back({x, y, z});
    return out;
  }
  int const axis = e == Element::line_x ? 0 : e == Element::line_y ? 1 : 2;
  for (int k = 0; k < l; ++k) {
    std::array<int, 3> o{0, 0, 0};
    o[std::size_t(axis)] = k;
    out.push_back(o);
  }
  return out;
}

namespace {

constexpr double kFar = 1e20;

// Exact squared Euclidean distance transform (lower envelope of parabolas)
// along one line of length n with the given stride.
void distance_1d(double* f, std::size_t n, std::size_t stride, std::vector<double>& buf,
                 std::vector<std::size_t>& v, std::vector<double>& zb) {
  buf.resize(n);
  v.resize(n);
  zb.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) buf[i] = f[i * stride];
  std::size_t k = 0;
  v[0] = 0;
  zb[0] = -std::numeric_limits<double>::infinity();
  zb[1] = std::numeric_limits<double>::infinity();
  auto cross = [&](std::size_t q, std::size_t p) {
    return ((buf[q] + double(q) * double(q)) - (buf[p] + double(p) * double(p))) / (2.0 * double(q) - 2.0 * double(p));
  };
  for (std::size_t q = 1; q < n; ++q) {
    double s = cross(q, v[k]);
    while (s <= zb[k]) s = cross(q, v[--k]);
    ++k;
    v[k] = q;
    zb[k] = s;
    zb[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (zb[k + 1] < double(q)) ++k;
    double const d = double(q) - double(v[k]);
    f[q * stride] = d * d + buf[v[k]];
  }
}

// Squared distance from every voxel to the nearest site.
std::vector<double> squared_edt(std::vector<std::uint8_t> const& sites, Dims d) {
  auto const [nx, ny, nz] = d;
  std::vector<double> f(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) f[i] = sites[i] ? 0.0 : kFar;
  std::vector<double> buf, zb;
  std::vector<std::size_t> v;
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y) distance_1d(f.data() + nx * (y + ny * z), nx, 1, buf, v, zb);
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t x = 0; x < nx; ++x) distance_1d(f.data() + x + nx * ny * z, ny, nx, buf, v, zb);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) distance_1d(f.data() + x + nx * y, nz, nx * ny, buf, v, zb);
  return f;
}

BinaryVolume ball_opening(BinaryVolume const& set, std::size_t lambda) {
  auto const [nx, ny, nz] = set.dims();
  double const r2 = double((lambda - 1) * (lambda - 1));
  // Pad by one voxel of non-set so that the outside acts as background.
  Dims const pd{nx + 2, ny + 2, nz + 2};
  std::vector<std::uint8_t> bg(voxel_count(pd), 1);
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x)
        bg[(x + 1) + pd[0] * ((y + 1) + pd[1] * (z + 1))] = set(x, y, z) ? 0 : 1;
  auto const dist_bg = squared_edt(bg, pd);
  std::vector<std::uint8_t> eroded(set.size(), 0);
  bool any = false;
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        bool const e = dist_bg[(x + 1) + pd[0] * ((y + 1) + pd[1] * (z + 1))] > r2;
        eroded[set.index(x, y, z)] = e;
        any = any || e;
      }
  BinaryVolume out(set.dims(), 0, set.voxel_size());
  if (!any) return out;
  auto const dist_e = squared_edt(eroded, set.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist_e[i] <= r2 ? 1 : 0;
  return out;
}

void check_set(BinaryVolume const& set) {
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i] > 1) throw DimensionError("structuring: volume must be 0/1");
}

// Runs along an axis: every voxel of a run of length L has local size L.
std::vector<std::size_t> line_local_size(BinaryVolume const& set, int axis) {
  auto const d = set.dims();
  std::size_t const stride = axis == 0 ? 1 : axis == 1 ? d[0] : d[0] * d[1];
  std::size_t const len = d[std::size_t(axis)];
  std::vector<std::size_t> h(set.size(), 0);
  for (std::size_t start = 0; start < set.size(); ++start) {
    // Visit each line once, from its first voxel.
    std::size_t const coord = (start / stride) % len;
    if (coord != 0) continue;
    std::size_t i = 0;
    while (i < len) {
      if (!set[start + i * stride]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < len && set[start + j * stride]) ++j;
      for (std::size_t k = i; k < j; ++k) h[start + k * stride] = j - i;
      i = j;
    }
  }
  return h;
}

}  // namespace

BinaryVolume opening(BinaryVolume const& set, Element e, std::size_t lambda) {
  if (lambda == 0) throw ConfigError("opening: lambda must be >= 1");
  check_set(set);
  if (e == Element::sphere) return ball_opening(set, lambda);
  int const axis = e == Element::line_x ? 0 : e == Element::line_y ? 1 : 2;
  auto const h = line_local_size(set, axis);
  BinaryVolume out(set.dims(), 0, set.voxel_size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = h[i] >= lambda ? 1 : 0;
  return out;
}

std::vector<std::size_t> local_size(BinaryVolume const& set, Element e) {
  check_set(set);
  if (e != Element::sphere) return line_local_size(set, e == Element::line_x ? 0 : e == Element::line_y ? 1 : 2);
  std::vector<std::size_t> h(set.size(), 0);
  // Digital balls are nested, so once a ball fits nowhere no larger one does.
  for (std::size_t lambda = 1;; ++lambda) {
    auto const o = ball_opening(set, lambda);
    bool any = false;
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (o[i]) {
        h[i] = lambda;
        any = true;
      }
    }
    if (!any) break;
  }
  return h;
}

SizeDistribution size_distribution(BinaryVolume const& v, Element e, Phase phase, std::size_t n_max) {
  if (n_max == 0) throw ConfigError("size_distribution: n_max must be >= 1");
  BinaryVolume set(v.dims(), 0, v.voxel_size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    set[i] = (v[i] != 0) == (phase == Phase::pore) ? 1 : 0;
    total += set[i];
  }
  if (total == 0) throw EmptyPhase("size_distribution: the " + to_string(phase) + " phase is empty");
  auto const h = local_size(set, e);
  std::vector<std::size_t> at_least(n_max + 2, 0);
  for (std::size_t x : h)
    if (x > 0) ++at_least[std::min(x, n_max + 1)];
  for (std::size_t k = n_max; k >= 1; --k) at_least[k] += at_least[k + 1];

  SizeDistribution out;
  out.element = e;
  out.phase = phase;
  for (std::size_t l = 1; l <= n_max; ++l) {
    out.lambdas.push_back(l);
    out.survival.push_back(double(at_least[l]) / double(total));
  }
  for (std::size_t l = 1; l <= n_max; ++l) {
    double const next = double(at_least[l + 1]) / double(total);
    out.density.push_back(out.survival[l - 1] - next);
  }
  return out;
}

}  // namespace porogen
