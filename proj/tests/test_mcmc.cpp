#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "porogen/error.hpp"
#include "porogen/mcmc.hpp"
#include "porogen/microstructure.hpp"
#include "toy_models.hpp"

using namespace porogen;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

struct MomentCheck {
  std::size_t mean_bad = 0;
  std::size_t cov_bad = 0;
};

// Empirical mean and covariance of draws against (mu, sigma), 3 SE each.
MomentCheck check_moments(std::vector<std::vector<double>> const& draws, Eigen::VectorXd const& mu,
                          Eigen::MatrixXd const& cov) {
  std::size_t const n = std::size_t(mu.size());
  double const m = double(draws.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(Eigen::Index(n));
  for (auto const& d : draws)
    for (std::size_t i = 0; i < n; ++i) mean(Eigen::Index(i)) += d[i] / m;
  MomentCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    double const se = std::sqrt(cov(Eigen::Index(i), Eigen::Index(i)) / m);
    if (std::abs(mean(Eigen::Index(i)) - mu(Eigen::Index(i))) > 3.0 * se) ++out.mean_bad;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0, s2 = 0.0;
      for (auto const& d : draws) {
        double const p = (d[i] - mu(Eigen::Index(i))) * (d[j] - mu(Eigen::Index(j)));
        s += p;
        s2 += p * p;
      }
      double const e = s / m;
      double const se = std::sqrt((s2 / m - e * e) / m);
      if (std::abs(e - cov(Eigen::Index(i), Eigen::Index(j))) > 3.0 * se) ++out.cov_bad;
    }
  return out;
}

PrecisionOperator small_precision(double tau) {
  return toy::make_precision(toy::to_sparse(toy::random_spd_dense(4, 11)), toy::to_sparse(toy::random_spd_dense(3, 12)),
                             tau);
}

struct SmallFit {
  SpdeDiscretization disc;
  ObservationMap a;
  BinaryVolume y;
  OscParams truth;
};

SmallFit small_fit(std::size_t nx, std::size_t nz, double h) {
  auto ms = build_mesh_2d(nx, nx, 0.12, h);
  auto mz = build_mesh_1d(nz, default_z_extension(nz), h);
  SmallFit f{SpdeDiscretization(ms, mz), {}, BinaryVolume({nx, nx, nz}), {}};
  f.a = build_observation_map(f.disc.mesh_s, f.disc.mesh_z, {nx, nx, nz});
  OscParams p;
  p.theta_s = 0.8;
  p.kappa_s = std::sqrt(250.0);
  p.theta_z = 0.55;
  p.kappa_z = std::sqrt(60.0);
  p.tau = 1.0;
  p.tau = unit_variance_tau(build_precision(p, f.disc), f.a);
  p.u = -0.74;
  f.truth = p;
  auto const w = sample_gmrf_prior(build_precision(p, f.disc), 21);
  f.y = simulate_noisy_binary(w, f.a, p, 22, {h, h, h});
  return f;
}

}  // namespace

TEST_CASE("sample_w reproduces the dense posterior on a 4x3 system") {
  auto const prec = small_precision(1.3);
  auto const a = toy::one_hot_map(12, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  ChainState st;
  st.params.sigma = 1.0;
  st.w.assign(12, 0.0);
  for (std::size_t i = 0; i < 12; ++i) st.s.push_back(0.3 * double(i % 5) - 0.5);

  Eigen::MatrixXd qhat = toy::dense_prior(prec);
  for (Eigen::Index i = 0; i < 12; ++i) qhat(i, i) += 1.0;
  Eigen::MatrixXd const cov = qhat.inverse();
  Eigen::VectorXd rhs(12);
  for (Eigen::Index i = 0; i < 12; ++i) rhs(i) = st.s[std::size_t(i)];
  Eigen::VectorXd const mu = cov * rhs;

  for (auto kind : {PreconditionerKind::kron_ichol, PreconditionerKind::none}) {
    CAPTURE(to_string(kind));
    SamplerOptions o;
    o.preconditioner = kind;
    o.pcg.tol = 1e-12;
    o.pcg.max_iter = 100;
    RandomStream rng(5, "w-block");
    std::vector<std::vector<double>> draws;
    for (int k = 0; k < 10000; ++k) draws.push_back(sample_w(st, prec, a, rng, o));
    auto const r = check_moments(draws, mu, cov);
    CHECK(r.mean_bad == 0);
    CHECK(r.cov_bad == 0);
  }
}

TEST_CASE("sample_w without observations draws from the prior") {
  auto const prec = small_precision(0.7);
  auto const a = toy::one_hot_map(12, {});
  ChainState st;
  st.w.assign(12, 0.0);
  SamplerOptions o;
  o.pcg.tol = 1e-12;
  RandomStream rng(6, "w-block");
  std::vector<std::vector<double>> draws;
  for (int k = 0; k < 10000; ++k) draws.push_back(sample_w(st, prec, a, rng, o));
  Eigen::MatrixXd const cov = toy::dense_prior(prec).inverse();
  auto const r = check_moments(draws, Eigen::VectorXd::Zero(12), cov);
  CHECK(r.mean_bad == 0);
  CHECK(r.cov_bad == 0);
}

TEST_CASE("sample_w rejects inconsistent inputs") {
  auto const prec = small_precision(1.0);
  auto const a = toy::one_hot_map(12, {0, 1});
  ChainState st;
  st.s = {0.0};
  RandomStream rng(1, "w-block");
  CHECK_THROWS_AS(sample_w(st, prec, a, rng), DimensionError);
  auto const bad = toy::one_hot_map(10, {0, 1});
  st.s = {0.0, 0.0};
  CHECK_THROWS_AS(sample_w(st, prec, bad, rng), DimensionError);
}

TEST_CASE("Kronecker preconditioners cut PCG iterations on a synthetic fit") {
  auto const f = small_fit(20, 10, 0.1);
  auto const prec = build_precision(f.truth, f.disc);
  ChainState st;
  st.params = f.truth;
  st.s.resize(f.y.size());
  RandomStream r0(5, "init");
  draw_auxiliary(std::vector<double>(f.y.size(), 0.0), f.y, f.truth.u, 1.0, r0, st.s);
  auto iters = [&](PreconditionerKind k) {
    SamplerOptions o;
    o.preconditioner = k;
    o.pcg.max_iter = 100000;
    RandomStream rng(7, "w-block");
    double tot = 0.0;
    for (int i = 0; i < 5; ++i) {
      WSampleStats s;
      sample_w(st, prec, f.a, rng, o, &s);
      tot += double(s.pcg_iterations);
    }
    return tot / 5.0;
  };
  double const ic = iters(PreconditionerKind::kron_ichol);
  double const ex = iters(PreconditionerKind::kron_exact);
  double const none = iters(PreconditionerKind::none);
  CHECK(ic < none);
  CHECK(5.0 * ic <= none);
  CHECK(5.0 * ex <= none);
}

TEST_CASE("truncated_normal_lower") {
  RandomStream rng(3, "tn");
  for (double a : {-2.0, 0.0, 0.5, 3.0, 12.0, 45.0}) {
    CAPTURE(a);
    std::size_t const n = 20000;
    double s = 0.0, s2 = 0.0;
    bool all_above = true;
    for (std::size_t i = 0; i < n; ++i) {
      double const z = truncated_normal_lower(a, rng);
      all_above = all_above && z >= a;
      s += z;
      s2 += z * z;
    }
    CHECK(all_above);
    double const mean = s / double(n);
    // Inverse Mills ratio, asymptotic form far in the tail.
    double const upper = 0.5 * std::erfc(a / std::numbers::sqrt2);
    double const mills = a < 30.0 ? phi_pdf(a) / upper : a + 1.0 / a - 2.0 / (a * a * a);
    double const var = 1.0 + a * mills - mills * mills;
    CHECK(std::abs(mean - mills) <= 3.0 * std::sqrt(var / double(n)) + 1e-9);
  }
}

TEST_CASE("log_normal_cdf") {
  for (double x : {3.0, 0.0, -5.0, -20.0, -29.9, -35.0}) {
    CHECK(log_normal_cdf(x) == doctest::Approx(std::log(phi_cdf(x))).epsilon(1e-9));
  }
  // Continuous across the switch to the asymptotic branch.
  CHECK(log_normal_cdf(-30.0 - 1e-9) == doctest::Approx(log_normal_cdf(-30.0 + 1e-9)).epsilon(1e-8));
  CHECK(std::isfinite(log_normal_cdf(-1e5)));
}

TEST_CASE("probit_log_likelihood") {
  BinaryVolume y({3, 1, 1});
  y[0] = 1;
  y[2] = 1;
  std::vector<double> x{0.2, -0.4, 1.5};
  double const u = 0.1, sigma = 1.0;
  double const ref = std::log(phi_cdf(0.1)) + std::log(phi_cdf(0.5)) + std::log(phi_cdf(1.4));
  CHECK(probit_log_likelihood(x, y, u, sigma) == doctest::Approx(ref).epsilon(1e-12));
  CHECK_THROWS_AS(probit_log_likelihood(std::vector<double>{0.0}, y, u, sigma), DimensionError);
}

TEST_CASE("sample_s_u with zero step always accepts and refreshes s") {
  auto const a = toy::one_hot_map(3, {0, 1, 2});
  BinaryVolume y({1, 1, 3});
  y[0] = 1;
  y[2] = 1;
  ChainState st;
  st.w = {0.5, -1.0, 2.0};
  st.s = {1.0, -1.0, 1.0};
  st.params.u = 0.3;
  RandomStream rng(1, "s-block");
  for (int k = 0; k < 200; ++k) {
    auto const before = st.s;
    CHECK(sample_s_u(st, 0.0, y, a, rng));
    CHECK(st.params.u == 0.3);
    CHECK(st.s != before);
  }
}

TEST_CASE("sample_s_u keeps auxiliaries on the data side of u") {
  auto const a = toy::one_hot_map(4, {0, 1, 2, 3});
  BinaryVolume ones({1, 1, 4}, std::uint8_t{1});
  BinaryVolume mixed({1, 1, 4});
  mixed[1] = 1;
  mixed[3] = 1;
  for (auto const* y : {&ones, &mixed}) {
    ChainState st;
    st.w = {-3.0, 0.0, 4.0, 1.0};
    st.params.u = -5.0;
    st.s.resize(4);
    RandomStream r0(2, "init");
    draw_auxiliary(a.apply(st.w), *y, st.params.u, 1.0, r0, st.s);
    RandomStream rng(3, "s-block");
    std::size_t acc = 0;
    for (int k = 0; k < 2000; ++k) {
      acc += sample_s_u(st, 0.5, *y, a, rng);
      for (std::size_t i = 0; i < 4; ++i) {
        if ((*y)[i]) REQUIRE(st.s[i] >= st.params.u);
        else REQUIRE(st.s[i] < st.params.u);
      }
    }
    CHECK(acc > 0);
  }
}

TEST_CASE("auxiliaries marginalize to the probit model for one voxel") {
  // y ~ Bernoulli(Phi((w-u)/sigma)), then s | y truncated: s is N(w, sigma^2)
  // and P(y = 1) is recovered as P(s >= u).
  auto const a = toy::one_hot_map(1, {0});
  double const w = 0.4, u = 0.9, sigma = 1.0;
  double const p1 = phi_cdf((w - u) / sigma);
  RandomStream rng(9, "probit");
  std::size_t const n = 40000;
  double ones = 0.0, s_sum = 0.0, s_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    BinaryVolume y({1, 1, 1});
    y[0] = rng.uniform() < p1 ? 1 : 0;
    std::vector<double> s(1);
    draw_auxiliary(std::vector<double>{w}, y, u, sigma, rng, s);
    ones += s[0] >= u;
    s_sum += s[0];
    s_sq += s[0] * s[0];
  }
  double const phat = ones / double(n);
  CHECK(std::abs(phat - p1) <= 3.0 * std::sqrt(p1 * (1 - p1) / double(n)));
  double const mean = s_sum / double(n);
  CHECK(std::abs(mean - w) <= 3.0 * sigma / std::sqrt(double(n)));
  CHECK(s_sq / double(n) - mean * mean == doctest::Approx(sigma * sigma).epsilon(0.03));
}

TEST_CASE("reflect_unit") {
  CHECK(reflect_unit(0.3) == doctest::Approx(0.3));
  CHECK(reflect_unit(-0.2) == doctest::Approx(0.2));
  CHECK(reflect_unit(1.2) == doctest::Approx(0.8));
  CHECK(reflect_unit(2.3) == doctest::Approx(0.3));
}

TEST_CASE("quadratic form matches the dense Kronecker product") {
  auto const prec = small_precision(2.0);
  std::vector<double> w(12);
  for (std::size_t i = 0; i < 12; ++i) w[i] = std::sin(double(i) + 0.3);
  Eigen::Map<Eigen::VectorXd const> wv(w.data(), 12);
  double const dense = wv.dot(toy::dense_prior(prec) * wv) / 4.0;
  CHECK(std::abs(prec.unscaled_quadratic_form(w) - dense) <= 1e-10 * std::abs(dense));
}

TEST_CASE("sample_gamma with zero steps is a Gibbs draw of tau^2") {
  PriorSpec prior;
  prior.tau2_shape = 1.5;
  prior.tau2_rate = 0.4;
  auto const build = toy::two_weight_builder();
  ChainState st;
  st.params.kappa_s = 1.1;
  st.params.kappa_z = 0.9;
  st.params.theta_z = 0.3;
  st.w = {0.8, -0.3};
  auto prec = build(st.params);
  double const q = prec.unscaled_quadratic_form(st.w);

  // Grid-normalized conditional density of tau^2.
  auto log_dens = [&](double t2) {
    return (prior.tau2_shape - 1.0) * std::log(t2) - prior.tau2_rate * t2 + 0.5 * 2.0 * std::log(t2) - 0.5 * t2 * q;
  };
  double const hi = 60.0;
  std::size_t const ng = 200000;
  double z = 0.0, m1 = 0.0;
  std::vector<double> cdf(ng + 1, 0.0);
  for (std::size_t g = 1; g <= ng; ++g) {
    double const t = hi * (double(g) - 0.5) / double(ng);
    double const d = std::exp(log_dens(t)) * hi / double(ng);
    z += d;
    m1 += t * d;
    cdf[g] = z;
  }
  double const grid_mean = m1 / z;
  CHECK(grid_mean == doctest::Approx((prior.tau2_shape + 1.0) / (prior.tau2_rate + 0.5 * q)).epsilon(1e-6));
  auto grid_quantile = [&](double p) {
    auto it = std::lower_bound(cdf.begin(), cdf.end(), p * z);
    return hi * double(it - cdf.begin()) / double(ng);
  };

  RandomStream rng(4, "gamma-block");
  std::vector<double> draws;
  std::size_t acc = 0;
  for (int k = 0; k < 20000; ++k) {
    acc += sample_gamma(st, prec, prior, {}, build, rng);
    draws.push_back(st.params.tau * st.params.tau);
  }
  CHECK(acc == 20000);
  CHECK(st.params.theta_z == 0.3);
  CHECK(st.params.kappa_s == 1.1);
  std::sort(draws.begin(), draws.end());
  for (double p : {0.1, 0.5, 0.9}) {
    CAPTURE(p);
    double const qg = grid_quantile(p);
    double const emp = double(std::lower_bound(draws.begin(), draws.end(), qg) - draws.begin()) / double(draws.size());
    CHECK(std::abs(emp - p) <= 3.0 * std::sqrt(p * (1 - p) / double(draws.size())));
  }
}

TEST_CASE("sample_gamma acceptance tends to 1 as the steps shrink") {
  auto const build = toy::two_weight_builder();
  PriorSpec prior;
  ChainState st;
  st.w = {0.8, -0.3};
  auto prec = build(st.params);
  RandomStream rng(8, "gamma-block");
  std::size_t acc = 0;
  for (int k = 0; k < 2000; ++k) acc += sample_gamma(st, prec, prior, {1e-7, 1e-7, 1e-7, 1e-7}, build, rng);
  CHECK(acc >= 1990);
}

TEST_CASE("sample_gamma rejects proposals that fail to factor") {
  PrecisionBuilder const failing = [](OscParams const&) -> PrecisionOperator {
    throw NumericalError("no factor");
  };
  auto const good = toy::two_weight_builder();
  ChainState st;
  st.w = {0.1, 0.2};
  auto prec = good(st.params);
  auto const before = st.params;
  RandomStream rng(1, "gamma-block");
  CHECK_FALSE(sample_gamma(st, prec, PriorSpec{}, {0.1, 0.1, 0.1, 0.1}, failing, rng));
  CHECK(st.params.kappa_z == before.kappa_z);
  CHECK(st.params.tau == before.tau);
}

TEST_CASE("two-weight toy chain is stationary") {
  auto const r = toy::toy_stationarity(50000, 1);
  CHECK(r.tv <= 0.05);
}

TEST_CASE("chain without data returns the prior") {
  BinaryVolume y({1, 1, 0});
  auto const a = toy::one_hot_map(2, {});
  ChainConfig cfg;
  cfg.prior = {20.0, 20.0, 8.0, 4.0, 20.0, 10.0};
  cfg.proposal.rw_step_theta_s = 0.3;
  cfg.proposal.rw_step_theta_z = 0.3;
  cfg.proposal.lognormal_step_kappa_s = 0.2;
  cfg.proposal.lognormal_step_kappa_z = 0.2;
  OscParams init;
  cfg.init = init;
  cfg.n_iter = 60000;
  cfg.burn_in = 6000;
  cfg.thin = 100000;
  cfg.seed = 5;
  auto const t = run_chain(y, a, toy::two_weight_builder(), cfg);
  double th = 0.0, th2 = 0.0, k2s = 0.0, k2z = 0.0, t2 = 0.0;
  double n = 0.0;
  for (std::size_t i = cfg.burn_in + 1; i < t.rows.size(); ++i) {
    auto const& p = t.rows[i].params;
    th += p.theta_z;
    th2 += p.theta_z * p.theta_z;
    k2s += p.kappa_s * p.kappa_s;
    k2z += p.kappa_z * p.kappa_z;
    t2 += p.tau * p.tau;
    n += 1.0;
  }
  // Gamma(shape, rate) means; theta uniform.
  CHECK(th / n == doctest::Approx(0.5).epsilon(0.04));
  CHECK(th2 / n - (th / n) * (th / n) == doctest::Approx(1.0 / 12.0).epsilon(0.06));
  CHECK(k2s / n == doctest::Approx(1.0).epsilon(0.03));
  CHECK(k2z / n == doctest::Approx(2.0).epsilon(0.05));
  CHECK(t2 / n == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("run_chain is deterministic and resumes exactly") {
  auto const f = small_fit(6, 4, 0.1);
  ChainConfig cfg;
  cfg.n_iter = 30;
  cfg.burn_in = 20;
  cfg.thin = 10;
  cfg.seed = 17;
  auto const t1 = run_chain(f.y, f.disc, cfg);
  auto const t2 = run_chain(f.y, f.disc, cfg);
  REQUIRE(t1.rows.size() == 31);
  for (std::size_t i = 0; i < t1.rows.size(); ++i) {
    CHECK(t1.rows[i].params.kappa_s == t2.rows[i].params.kappa_s);
    CHECK(t1.rows[i].params.u == t2.rows[i].params.u);
    CHECK(t1.rows[i].params.tau == t2.rows[i].params.tau);
  }
  CHECK(t1.w_snapshots == t2.w_snapshots);
  CHECK(t1.snapshot_iterations == std::vector<std::size_t>{0, 10, 20, 30});

  auto half = cfg;
  half.n_iter = 12;
  auto const a = run_chain(f.y, f.disc, half);
  auto const b = run_chain(f.y, f.disc, cfg, &a.checkpoint);
  auto joined = a;
  append_trace(joined, b);
  REQUIRE(joined.rows.size() == t1.rows.size());
  for (std::size_t i = 0; i < t1.rows.size(); ++i) {
    CHECK(joined.rows[i].params.theta_s == t1.rows[i].params.theta_s);
    CHECK(joined.rows[i].params.kappa_z == t1.rows[i].params.kappa_z);
    CHECK(joined.rows[i].params.u == t1.rows[i].params.u);
    CHECK(joined.rows[i].pcg_iterations == t1.rows[i].pcg_iterations);
  }
  CHECK(joined.w_snapshots == t1.w_snapshots);
  CHECK(b.checkpoint.state.w == t1.checkpoint.state.w);
  CHECK(joined.accepted_gamma == t1.accepted_gamma);
}

TEST_CASE("run_chain with zero iterations returns the initial state") {
  auto const f = small_fit(6, 4, 0.1);
  ChainConfig cfg;
  cfg.seed = 1;
  auto const t = run_chain(f.y, f.disc, cfg);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].iteration == 0);
  auto const init = initial_params(f.y);
  CHECK(t.rows[0].params.u == init.u);
  CHECK(t.rows[0].params.theta_s == 0.5);
  CHECK(t.acceptance_rate_u() == 0.0);
  CHECK(t.w_snapshots.size() == 1);
}

TEST_CASE("chain state respects the data signs after every block") {
  auto const f = small_fit(6, 4, 0.1);
  ChainState st;
  st.params = initial_params(f.y);
  st.params.tau = 1.0;
  auto const build = spde_precision_builder(f.disc);
  auto prec = build(st.params);
  st.w.assign(prec.size(), 0.0);
  st.s.resize(f.y.size());
  RandomStream r0(1, "init");
  draw_auxiliary(f.a.apply(st.w), f.y, st.params.u, 1.0, r0, st.s);
  RandomStream rw(1, "w-block"), rs(1, "s-block"), rg(1, "gamma-block");
  auto sign_ok = [&] {
    for (std::size_t i = 0; i < f.y.size(); ++i)
      if ((f.y[i] != 0) != (st.s[i] >= st.params.u)) return false;
    return true;
  };
  for (int it = 0; it < 40; ++it) {
    st.w = sample_w(st, prec, f.a, rw);
    REQUIRE(sign_ok());
    sample_s_u(st, 0.05, f.y, f.a, rs);
    REQUIRE(sign_ok());
    sample_gamma(st, prec, PriorSpec{}, {0.02, 0.02, 0.02, 0.02}, build, rg);
    REQUIRE(sign_ok());
  }
}

TEST_CASE("initial_params") {
  auto const f = small_fit(20, 10, 0.1);
  auto const p = initial_params(f.y);
  CHECK(phi_cdf(p.u) == doctest::Approx(1.0 - volume_fraction(f.y)).epsilon(1e-12));
  CHECK(p.theta_s == 0.5);
  CHECK(p.theta_z == 0.5);
  CHECK(p.kappa_s > 0.0);
  CHECK(p.kappa_z > 0.0);
  BinaryVolume empty({4, 4, 4});
  CHECK_THROWS_AS(initial_params(empty), EmptyPhase);
}

TEST_CASE("posterior_summary") {
  Trace t;
  for (std::size_t i = 0; i < 100; ++i) {
    TraceRow r;
    r.iteration = i;
    r.params.theta_s = 0.25;
    r.params.u = i < 50 ? 100.0 : -1.0 + 0.01 * double(i % 7);
    t.rows.push_back(r);
  }
  auto const s = posterior_summary(t, 0.5);
  CHECK(s.n_discarded == 50);
  CHECK(s.n_used == 50);
  CHECK(s.at("theta_s").mean == 0.25);
  CHECK(s.at("theta_s").sd == 0.0);
  CHECK(s.at("u").mean < 0.0);
  for (auto const& p : s.params) {
    CAPTURE(p.name);
    double area = 0.0;
    for (std::size_t g = 1; g < p.grid.size(); ++g)
      area += 0.5 * (p.grid[g] - p.grid[g - 1]) * (p.density[g] + p.density[g - 1]);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK_THROWS_AS(s.at("nope"), ConfigError);
  CHECK_THROWS_AS(posterior_summary(t, 1.0), ConfigError);
  CHECK_THROWS_AS(posterior_summary(Trace{}, 0.5), DimensionError);
}

TEST_CASE("trace files round trip") {
  auto const f = small_fit(6, 4, 0.1);
  ChainConfig cfg;
  cfg.n_iter = 12;
  cfg.burn_in = 6;
  cfg.thin = 5;
  cfg.seed = 3;
  auto const t = run_chain(f.y, f.disc, cfg);
  auto const dir = std::filesystem::temp_directory_path() / "porogen_trace_rt";
  std::filesystem::remove_all(dir);
  nlohmann::json header{{"prior", to_json(cfg.prior)}};
  write_trace(dir, t, header);
  auto const back = read_trace(dir);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto const& x = back.rows[i].params;
    auto const& e = t.rows[i].params;
    CHECK(x.theta_s == e.theta_s);
    CHECK(x.kappa_s * x.kappa_s == e.kappa_s * e.kappa_s);
    CHECK(x.tau * x.tau == e.tau * e.tau);
    CHECK(x.u == e.u);
    CHECK(back.rows[i].accepted_gamma == t.rows[i].accepted_gamma);
  }
  CHECK(back.w_snapshots == t.w_snapshots);
  CHECK(back.snapshot_iterations == t.snapshot_iterations);
  CHECK(back.seed == 3);
  CHECK(back.accepted_u == t.accepted_u);
  CHECK(read_trace_header(dir).at("prior").at("tau2_rate") == 5e-3);

  write_checkpoint(dir / "c.bin", t.checkpoint);
  auto const c = read_checkpoint(dir / "c.bin");
  CHECK(c.iteration == 12);
  CHECK(c.state.w == t.checkpoint.state.w);
  CHECK(c.state.s == t.checkpoint.state.s);
  CHECK(c.counters.w == t.checkpoint.counters.w);
  CHECK(c.proposal.rw_step_u == t.checkpoint.proposal.rw_step_u);
  std::filesystem::remove_all(dir);
}

TEST_CASE("prior and proposal validation") {
  PriorSpec p;
  p.tau2_rate = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  ProposalSpec q;
  q.rw_step_u = -1.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q.rw_step_u = 0.0;
  CHECK_NOTHROW(q.validate());
  CHECK(preconditioner_from_string("kron_exact") == PreconditionerKind::kron_exact);
  CHECK_THROWS_AS(preconditioner_from_string("ilu"), ConfigError);
  PriorSpec r;
  from_json(to_json(PriorSpec{3, 4, 5, 6, 7, 8}), r);
  CHECK(r.kappa2_z_rate == 6);
}
