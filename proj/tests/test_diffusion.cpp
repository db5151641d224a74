#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "porogen/diffusion.hpp"
#include "porogen/error.hpp"
#include "porogen/mcmc.hpp"
#include "porogen/microstructure.hpp"
#include "porogen/spde.hpp"

using namespace porogen;

namespace {

BinaryVolume channel(Dims d, std::size_t wx, std::size_t wy, std::size_t x0 = 0, std::size_t y0 = 0) {
  BinaryVolume v(d);
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = y0; y < y0 + wy; ++y)
      for (std::size_t x = x0; x < x0 + wx; ++x) v(x, y, z) = 1;
  return v;
}

BinaryVolume random_pores(Dims d, double p, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution b(p);
  BinaryVolume v(d);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = b(gen);
  return v;
}

// Net scaled flux out of each interior percolating voxel, from the
// concentration alone.
double recomputed_divergence(BinaryVolume const& v, FluxField const& f) {
  auto const perc = percolating_pores(v, LateralBoundary::no_flux);
  auto const [nx, ny, nz] = v.dims();
  double worst = 0.0;
  for (std::size_t z = 1; z + 1 < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        std::size_t const i = v.index(x, y, z);
        if (!perc[i]) continue;
        double net = 0.0;
        auto add = [&](std::size_t j) {
          if (perc[j]) net += f.concentration[i] - f.concentration[j];
        };
        if (x > 0) add(v.index(x - 1, y, z));
        if (x + 1 < nx) add(v.index(x + 1, y, z));
        if (y > 0) add(v.index(x, y - 1, z));
        if (y + 1 < ny) add(v.index(x, y + 1, z));
        add(v.index(x, y, z - 1));
        add(v.index(x, y, z + 1));
        worst = std::max(worst, std::abs(net) * double(nz - 1));
      }
  return worst;
}

}  // namespace

TEST_CASE("all-pore box has unit effective diffusion") {
  for (auto lateral : {LateralBoundary::no_flux, LateralBoundary::periodic}) {
    BinaryVolume v({7, 5, 9}, std::uint8_t{1});
    DiffusionOptions o;
    o.lateral = lateral;
    auto const f = solve_diffusion(v, o);
    CHECK(f.percolating);
    CHECK(effective_diffusion(f) == doctest::Approx(1.0).epsilon(1e-10));
    for (auto const& j : f.flux) {
      CHECK(std::abs(j[0]) < 1e-9);
      CHECK(std::abs(j[1]) < 1e-9);
      CHECK(std::abs(j[2] - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("straight channels follow the parallel law") {
  Dims const d{8, 8, 12};
  CHECK(effective_diffusion(solve_diffusion(channel(d, 4, 4, 2, 3))) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(effective_diffusion(solve_diffusion(channel(d, 8, 4))) == doctest::Approx(0.5).epsilon(1e-8));
  // Two disjoint channels of 1/8 each.
  auto v = channel(d, 2, 4, 0, 0);
  auto const w = channel(d, 2, 4, 5, 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] |= w[i];
  CHECK(effective_diffusion(solve_diffusion(v)) == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("a full matrix layer blocks diffusion") {
  BinaryVolume v({6, 6, 8}, std::uint8_t{1});
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 6; ++x) v(x, y, 4) = 0;
  auto const f = solve_diffusion(v);
  CHECK_FALSE(f.percolating);
  CHECK(effective_diffusion(f) == 0.0);
}

TEST_CASE("isolated pores carry no flux") {
  auto v = channel({6, 6, 8}, 2, 2);
  v(4, 4, 3) = 1;
  v(4, 4, 4) = 1;
  auto const f = solve_diffusion(v);
  CHECK(f.flux[v.index(4, 4, 3)][2] == 0.0);
  CHECK(effective_diffusion(f) == doctest::Approx(4.0 / 36.0).epsilon(1e-8));
}

TEST_CASE("diffusion invariants on random structures") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto const v = random_pores({14, 12, 10}, 0.7, seed);
    DiffusionOptions o;
    o.tol = 1e-9;
    auto const f = solve_diffusion(v, o);
    REQUIRE(f.percolating);
    double const d = effective_diffusion(f);
    CHECK(d > 0.0);
    CHECK(d <= volume_fraction(v));
    CHECK(f.max_divergence <= 10.0 * o.tol);
    CHECK(recomputed_divergence(v, f) <= 10.0 * o.tol);
    CHECK(std::abs(f.plane_flux.front() - f.plane_flux.back()) <= 10.0 * o.tol);
    // Every plane carries the same flux, and D_eff is that flux.
    for (double p : f.plane_flux) CHECK(std::abs(p - d) <= 10.0 * o.tol);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!v[i]) CHECK(f.flux[i] == std::array<double, 3>{0.0, 0.0, 0.0});
  }
}

TEST_CASE("solve_diffusion input errors") {
  CHECK_THROWS_AS(solve_diffusion(BinaryVolume({4, 4, 4})), EmptyPhase);
  CHECK_THROWS_AS(solve_diffusion(BinaryVolume({4, 4, 1}, std::uint8_t{1})), ConfigError);
  CHECK(lateral_boundary_from_string("periodic") == LateralBoundary::periodic);
  CHECK_THROWS_AS(lateral_boundary_from_string("dirichlet"), ConfigError);
}

TEST_CASE("flux histograms") {
  auto const v = random_pores({10, 10, 8}, 0.75, 4);
  auto f = solve_diffusion(v);
  auto const grid = ensemble_grid({f}, 7, 3.0);
  auto const h = flux_histogram(f, grid);
  double total = 0.0;
  for (double x : h.values) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // Mass of the region ix < 3, iz >= 2 against direct counting.
  double direct = 0.0, pores = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i]) continue;
    pores += 1.0;
    std::size_t const b = grid.bin_of(f.flux[i]);
    if (b % 7 < 3 && b / 49 >= 2) direct += 1.0;
  }
  double region = 0.0;
  for (std::size_t b = 0; b < h.values.size(); ++b)
    if (b % 7 < 3 && b / 49 >= 2) region += h.values[b];
  CHECK(region == doctest::Approx(direct / pores).epsilon(1e-12));

  // Mirroring J_x mirrors the histogram on a grid symmetric in x (odd bin
  // count keeps J_x = 0 off the bin edges).
  auto g2 = grid;
  double const half = std::max(std::abs(grid.lo[0]), std::abs(grid.hi[0]));
  g2.lo[0] = -half;
  g2.hi[0] = half;
  auto const a = flux_histogram(f, g2);
  for (auto& j : f.flux) j[0] = -j[0];
  auto const b = flux_histogram(f, g2);
  for (std::size_t iz = 0; iz < 7; ++iz)
    for (std::size_t iy = 0; iy < 7; ++iy)
      for (std::size_t ix = 0; ix < 7; ++ix)
        CHECK(a.values[ix + 7 * (iy + 7 * iz)] == b.values[(6 - ix) + 7 * (iy + 7 * iz)]);
}

TEST_CASE("uniform flux fills one bin") {
  auto const f = solve_diffusion(BinaryVolume({5, 5, 6}, std::uint8_t{1}));
  auto const h = flux_histogram(f, ensemble_grid({f}));
  std::size_t occupied = 0;
  for (double x : h.values) occupied += x > 0.0;
  CHECK(occupied == 1);
  CHECK(*std::max_element(h.values.begin(), h.values.end()) == 1.0);
  CHECK_THROWS_AS(ensemble_grid({f}, 1), ConfigError);
}

TEST_CASE("excursion sets of an identical ensemble") {
  std::vector<double> const h{0.5, 0.0, 0.02, 0.01, 0.3};
  std::vector<std::vector<double>> ens(100, h);
  auto const r = excursion_sets(ens, 0.01, 0.05);
  CHECK(r.set_plus == std::vector<std::size_t>{0, 2, 4});
  CHECK(r.set_minus == std::vector<std::size_t>{1});
  CHECK(r.joint_plus == 1.0);
  CHECK(containment_test(r, h).pass);
}

TEST_CASE("excursion sets of a three-bin ensemble") {
  // P(bin > u) = 0.99, 0.6, 0.01 by construction.
  std::vector<std::vector<double>> ens;
  for (int k = 0; k < 100; ++k) ens.push_back({k < 99 ? 1.0 : 0.0, k % 5 < 3 ? 1.0 : 0.0, k == 7 ? 1.0 : 0.0});
  auto const r = excursion_sets(ens, 0.5, 0.05);
  CHECK(r.set_plus == std::vector<std::size_t>{0});
  CHECK(r.set_minus == std::vector<std::size_t>{2});
  CHECK(r.joint_plus == doctest::Approx(0.99));
}

TEST_CASE("excursion sets shrink with alpha") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> ens(200, std::vector<double>(50));
  for (auto& m : ens)
    for (std::size_t b = 0; b < 50; ++b) m[b] = 0.02 * (double(b) / 50.0 - 0.5) + 0.01 + 0.004 * nd(gen);
  std::vector<std::size_t> prev_plus, prev_minus;
  for (double alpha : {0.0, 0.01, 0.05, 0.1, 0.3}) {
    auto const r = excursion_sets(ens, 0.01, alpha);
    CHECK(std::includes(r.set_plus.begin(), r.set_plus.end(), prev_plus.begin(), prev_plus.end()));
    CHECK(std::includes(r.set_minus.begin(), r.set_minus.end(), prev_minus.begin(), prev_minus.end()));
    for (std::size_t b : r.set_plus) CHECK(!std::binary_search(r.set_minus.begin(), r.set_minus.end(), b));
    CHECK(r.joint_plus >= 1.0 - alpha - 1e-12);
    CHECK(r.joint_minus >= 1.0 - alpha - 1e-12);
    prev_plus = r.set_plus;
    prev_minus = r.set_minus;
  }
  CHECK_THROWS_AS(excursion_sets(ens, 0.01, 0.5), ConfigError);
}

TEST_CASE("containment_test reports violations") {
  std::vector<std::vector<double>> ens(100, {0.6, 0.4, 0.0, 0.0});
  auto const r = excursion_sets(ens, 0.01, 0.01);
  auto const rep = containment_test(r, std::vector<double>{0.0, 0.0, 0.0, 1.0});
  CHECK_FALSE(rep.pass);
  CHECK(rep.plus_violations == std::vector<std::size_t>{0, 1});
  CHECK(rep.minus_violations == std::vector<std::size_t>{3});
}

TEST_CASE("histogram ensembles need a common grid and enough members") {
  FluxHistogram3D h;
  h.grid.n_bins = 2;
  h.values.assign(8, 0.125);
  std::vector<FluxHistogram3D> few(10, h);
  CHECK_THROWS_AS(excursion_sets(few, 0.01, 0.01), ConfigError);
  std::vector<FluxHistogram3D> mixed(100, h);
  mixed[50].grid.hi[0] = 2.0;
  CHECK_THROWS_AS(excursion_sets(mixed, 0.01, 0.01), DimensionError);
}

TEST_CASE("model flux histograms are symmetric in x and y") {
  std::size_t const n = 14, nz = 10, members = 40;
  double const h = 0.04;
  auto ms = build_mesh_2d(n, n, 0.12, h);
  auto mz = build_mesh_1d(nz, default_z_extension(nz), h);
  SpdeDiscretization disc(ms, mz);
  auto const a = build_observation_map(ms, mz, {n, n, nz});
  OscParams p;
  p.theta_s = 0.8;
  p.kappa_s = std::sqrt(250.0);
  p.theta_z = 0.55;
  p.kappa_z = std::sqrt(60.0);
  p.tau = 1.0;
  p.tau = unit_variance_tau(build_precision(p, disc), a);
  p.u = -0.5;
  auto const prec = build_precision(p, disc);
  std::vector<FluxField> fields;
  for (std::size_t k = 0; k < members; ++k) {
    auto const w = sample_gmrf_prior(prec, 100 + k);
    auto const y = simulate_noisy_binary(w, a, p, 200 + k, {h, h, h});
    auto f = solve_diffusion(y);
    if (f.percolating) fields.push_back(std::move(f));
  }
  REQUIRE(fields.size() >= 30);
  auto grid = ensemble_grid(fields, 6, 3.0);
  // Same range on x and y so that swapping axes is a relabeling of bins.
  for (std::size_t d : {0, 1}) {
    grid.lo[d] = std::min(grid.lo[0], grid.lo[1]);
    grid.hi[d] = std::max(grid.hi[0], grid.hi[1]);
  }
  std::vector<std::vector<double>> hs;
  for (auto const& f : fields) hs.push_back(flux_histogram(f, grid).values);
  auto swap_bin = [](std::size_t b) { return (b / 6) % 6 + 6 * (b % 6 + 6 * (b / 36)); };
  auto stat = [&](std::vector<int> const& flip) {
    double t = 0.0;
    for (std::size_t b = 0; b < 216; ++b) {
      double d = 0.0;
      for (std::size_t k = 0; k < hs.size(); ++k) {
        double const diff = hs[k][b] - hs[k][swap_bin(b)];
        d += flip[k] * diff;
      }
      t += std::abs(d);
    }
    return t;
  };
  std::vector<int> ident(hs.size(), 1);
  double const t0 = stat(ident);
  std::mt19937_64 gen(9);
  std::size_t above = 0;
  std::size_t const perms = 999;
  for (std::size_t r = 0; r < perms; ++r) {
    std::vector<int> flip(hs.size());
    for (auto& s : flip) s = (gen() & 1) ? 1 : -1;
    above += stat(flip) >= t0;
  }
  double const pval = double(above + 1) / double(perms + 1);
  CHECK(pval > 0.01);
}
