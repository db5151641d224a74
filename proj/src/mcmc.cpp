#include "porogen/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "porogen/error.hpp"
#include "porogen/kronecker.hpp"
#include "porogen/microstructure.hpp"
#include "porogen/validation.hpp"

namespace porogen {

namespace {

double sq(double x) { return x * x; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

void require_step(double v, char const* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string("proposal step '") + name + "' must be >= 0");
}

}  // namespace

void PriorSpec::validate() const {
  for (double v : {kappa2_s_shape, kappa2_s_rate, kappa2_z_shape, kappa2_z_rate, tau2_shape, tau2_rate}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("prior shapes and rates must be positive");
  }
}

double PriorSpec::log_kappa_prior(OscParams const& p) const {
  double const k2s = sq(p.kappa_s), k2z = sq(p.kappa_z);
  return (kappa2_s_shape - 1.0) * std::log(k2s) - kappa2_s_rate * k2s + (kappa2_z_shape - 1.0) * std::log(k2z) -
         kappa2_z_rate * k2z;
}

void ProposalSpec::validate() const {
  require_step(rw_step_u, "rw_step_u");
  require_step(rw_step_theta_s, "rw_step_theta_s");
  require_step(rw_step_theta_z, "rw_step_theta_z");
  require_step(lognormal_step_kappa_s, "lognormal_step_kappa_s");
  require_step(lognormal_step_kappa_z, "lognormal_step_kappa_z");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0,1)");
}

std::string to_string(PreconditionerKind k) {
  switch (k) {
    case PreconditionerKind::kron_ichol: return "kron_ichol";
    case PreconditionerKind::kron_exact: return "kron_exact";
    case PreconditionerKind::diagonal: return "diagonal";
    case PreconditionerKind::none: return "none";
  }
  return "?";
}

PreconditionerKind preconditioner_from_string(std::string const& s) {
  for (auto k : {PreconditionerKind::kron_ichol, PreconditionerKind::kron_exact, PreconditionerKind::diagonal,
                 PreconditionerKind::none})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown preconditioner '" + s + "'");
}

PrecisionBuilder spde_precision_builder(SpdeDiscretization const& disc) {
  return [&disc](OscParams const& p) { return build_precision(p, disc); };
}

std::vector<double> observation_counts(ObservationMap const& a) {
  std::vector<double> c(a.n_weights, 0.0);
  for (std::size_t node : a.node_of_voxel) c[node] += 1.0;
  return c;
}

PosteriorPreconditioner::PosteriorPreconditioner(PrecisionOperator const& prec, std::span<double const> ata_diag,
                                                 double sigma, PreconditionerKind kind)
    : kind_(kind), inv_scale_(1.0 / sq(prec.tau)) {
  switch (kind) {
    case PreconditionerKind::kron_ichol:
      left_ = ichol0(prec.q_s);
      right_ = ichol0(prec.q_z);
      break;
    case PreconditionerKind::kron_exact:
      left_ = prec.chol_s;
      right_ = prec.chol_z;
      break;
    case PreconditionerKind::diagonal: {
      auto const ds = prec.q_s.diagonal_values();
      auto const dz = prec.q_z.diagonal_values();
      std::size_t const nz = dz.size();
      inv_diag_.resize(ds.size() * nz);
      for (std::size_t j = 0; j < ds.size(); ++j)
        for (std::size_t i = 0; i < nz; ++i) {
          std::size_t const k = j * nz + i;
          inv_diag_[k] = 1.0 / (sq(prec.tau) * ds[j] * dz[i] + ata_diag[k] / sq(sigma));
        }
      break;
    }
    case PreconditionerKind::none: break;
  }
}

void PosteriorPreconditioner::apply(std::span<double const> in, std::span<double> out) const {
  switch (kind_) {
    case PreconditionerKind::kron_ichol:
    case PreconditionerKind::kron_exact:
      std::copy(in.begin(), in.end(), out.begin());
      kron_solve_inplace(left_, right_, out);
      for (double& v : out) v *= inv_scale_;
      return;
    case PreconditionerKind::diagonal:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * inv_diag_[i];
      return;
    case PreconditionerKind::none: std::copy(in.begin(), in.end(), out.begin()); return;
  }
}

std::vector<double> sample_w(ChainState const& state, PrecisionOperator const& prec, ObservationMap const& a,
                             PosteriorPreconditioner const& pre, RandomStream& rng, PcgOptions const& pcg_opts,
                             WSampleStats* stats) {
  std::size_t const n = prec.size();
  std::size_t const m = a.n_voxels();
  if (a.n_weights != n) throw DimensionError("sample_w: observation map does not match the precision");
  if (state.s.size() != m) throw DimensionError("sample_w: auxiliary vector has the wrong length");
  double const sigma = state.params.sigma;
  double const tau = prec.tau;

  // xi = tau (B_s ⊗ B_z) z1 + A^T z2 / sigma + A^T s / sigma^2
  std::vector<double> xi(n);
  rng.fill_normal(xi);
  kron_factor_multiply_inplace(prec.chol_s, prec.chol_z, xi, false);
  for (double& v : xi) v *= tau;
  std::vector<double> z2(m);
  rng.fill_normal(z2);
  for (std::size_t i = 0; i < m; ++i) xi[a.node_of_voxel[i]] += z2[i] / sigma + state.s[i] / sq(sigma);

  auto const counts = observation_counts(a);
  KroneckerOperator const op = prec.kronecker();
  LinearMap const system = [&](std::span<double const> in, std::span<double> out) {
    kron_matvec(op, in, out);
    for (std::size_t k = 0; k < n; ++k) out[k] += counts[k] * in[k] / sq(sigma);
  };
  LinearMap const precond = [&pre](std::span<double const> in, std::span<double> out) { pre.apply(in, out); };

  std::span<double const> x0;
  if (state.w.size() == n) x0 = state.w;
  WSampleStats local;
  PcgResult res;
  try {
    res = pcg(system, precond, xi, pcg_opts, x0);
  } catch (ConvergenceFailure const& first) {
    local.retried = true;
    PcgOptions loose = pcg_opts;
    loose.tol *= 10.0;
    try {
      res = pcg(system, precond, xi, loose, first.best_iterate());
      res.iterations += first.iterations();
    } catch (ConvergenceFailure const& second) {
      throw NumericalError("sample_w: PCG did not converge (residual " + std::to_string(second.residual()) +
                           " after " + std::to_string(first.iterations() + second.iterations()) +
                           " iterations, preconditioner " + to_string(pre.kind()) + ")");
    }
  }
  local.pcg_iterations = res.iterations;
  local.residual = res.residual;
  if (stats) *stats = local;
  return std::move(res.x);
}

std::vector<double> sample_w(ChainState const& state, PrecisionOperator const& prec, ObservationMap const& a,
                             RandomStream& rng, SamplerOptions const& options, WSampleStats* stats) {
  auto const counts = observation_counts(a);
  PosteriorPreconditioner const pre(prec, counts, state.params.sigma, options.preconditioner);
  return sample_w(state, prec, a, pre, rng, options.pcg, stats);
}

double truncated_normal_lower(double a, RandomStream& rng) {
  if (a <= 0.25) {
    for (int i = 0; i < 100; ++i) {
      double const z = rng.normal();
      if (z >= a) return z;
    }
  } else {
    // Exponential proposal with the optimal rate.
    double const lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (int i = 0; i < 1000; ++i) {
      double const z = a - std::log(rng.uniform()) / lambda;
      if (std::log(rng.uniform()) <= -0.5 * sq(z - lambda)) return z;
    }
  }
  // Inverse CDF on the upper tail.
  double const tail = 0.5 * std::erfc(a / std::numbers::sqrt2);
  double const u = rng.uniform();
  if (tail > 0.0) {
    double const z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u * tail);
    if (std::isfinite(z) && z >= a) return z;
  }
  return a - std::log(u) / std::max(a, 1.0);
}

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the Mills ratio.
  double const x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

double probit_log_likelihood(std::span<double const> x, BinaryVolume const& y, double u, double sigma) {
  if (x.size() != y.size()) throw DimensionError("probit_log_likelihood: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const t = (x[i] - u) / sigma;
    s += log_normal_cdf(y[i] ? t : -t);
  }
  return s;
}

void draw_auxiliary(std::span<double const> x, BinaryVolume const& y, double u, double sigma, RandomStream& rng,
                    std::span<double> s) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    double const t = (u - x[i]) / sigma;
    if (y[i]) {
      s[i] = std::max(x[i] + sigma * truncated_normal_lower(t, rng), u);
    } else {
      s[i] = x[i] - sigma * truncated_normal_lower(-t, rng);
      if (s[i] >= u) s[i] = std::nextafter(u, -std::numeric_limits<double>::infinity());
    }
  }
}

bool sample_s_u(ChainState& state, double rw_step_u, BinaryVolume const& y, ObservationMap const& a,
                RandomStream& rng) {
  auto const x = a.apply(state.w);
  double const sigma = state.params.sigma;
  double const u = state.params.u;
  double const u_new = u + rw_step_u * rng.normal();
  double const ll = probit_log_likelihood(x, y, u, sigma);
  double const ll_new = rw_step_u == 0.0 ? ll : probit_log_likelihood(x, y, u_new, sigma);
  // The auxiliaries cancel: the ratio is the marginal likelihood ratio of u.
  bool const accept = std::log(rng.uniform()) < ll_new - ll;
  if (!accept) {
    state.log_targets.log_lik_u = ll;
    return false;
  }
  state.params.u = u_new;
  state.s.resize(x.size());
  draw_auxiliary(x, y, u_new, sigma, rng, state.s);
  state.log_targets.log_lik_u = ll_new;
  return true;
}

double log_marginal_gamma(OscParams const& p, LogTargets const& t, PriorSpec const& prior, std::size_t n_s,
                          std::size_t n_z) {
  double const n = double(n_s * n_z);
  return prior.log_kappa_prior(p) + 0.5 * (double(n_z) * t.logdet_s + double(n_s) * t.logdet_z) -
         (prior.tau2_shape + 0.5 * n) * std::log(prior.tau2_rate + 0.5 * t.quad);
}

double reflect_unit(double x) {
  x = std::fmod(std::abs(x), 2.0);
  return x >= 1.0 ? 2.0 - x : x;
}

bool sample_gamma(ChainState& state, PrecisionOperator& prec, PriorSpec const& prior, GammaStepSizes const& steps,
                  PrecisionBuilder const& build, RandomStream& rng) {
  OscParams prop = state.params;
  prop.theta_s = reflect_unit(state.params.theta_s + steps.theta_s * rng.normal());
  prop.theta_z = reflect_unit(state.params.theta_z + steps.theta_z * rng.normal());
  prop.kappa_s = state.params.kappa_s * std::exp(steps.log_kappa_s * rng.normal());
  prop.kappa_z = state.params.kappa_z * std::exp(steps.log_kappa_z * rng.normal());
  double const log_u = std::log(rng.uniform());

  std::size_t const n_s = prec.n_s(), n_z = prec.n_z();
  state.log_targets.quad = prec.unscaled_quadratic_form(state.w);
  state.log_targets.logdet_s = prec.chol_s.log_determinant();
  state.log_targets.logdet_z = prec.chol_z.log_determinant();

  PrecisionOperator next;
  LogTargets t;
  try {
    if (prop.theta_s >= 1.0 || prop.theta_z >= 1.0) return false;
    prop.validate();
    next = build(prop);
    t.quad = next.unscaled_quadratic_form(state.w);
    t.logdet_s = next.chol_s.log_determinant();
    t.logdet_z = next.chol_z.log_determinant();
  } catch (NumericalError const&) {
    return false;
  } catch (ConfigError const&) {
    return false;
  }
  if (!std::isfinite(t.quad) || !std::isfinite(t.logdet_s) || !std::isfinite(t.logdet_z)) return false;

  double const log_alpha = log_marginal_gamma(prop, t, prior, n_s, n_z) -
                           log_marginal_gamma(state.params, state.log_targets, prior, n_s, n_z) +
                           2.0 * std::log(prop.kappa_s / state.params.kappa_s) +
                           2.0 * std::log(prop.kappa_z / state.params.kappa_z);
  if (!(log_u < log_alpha)) return false;

  // tau^2 | rest ~ Gamma(a + n/2, b + q/2)
  double const shape = prior.tau2_shape + 0.5 * double(n_s * n_z);
  double const rate = prior.tau2_rate + 0.5 * t.quad;
  double const tau2 = rng.gamma(shape, rate);
  prop.tau = std::sqrt(tau2);
  next.tau = prop.tau;
  prec = std::move(next);
  state.params = prop;
  state.log_targets.quad = t.quad;
  state.log_targets.logdet_s = t.logdet_s;
  state.log_targets.logdet_z = t.logdet_z;
  return true;
}

double Trace::acceptance_rate_u() const {
  std::size_t const n = rows.empty() ? 0 : rows.size() - 1;
  return n ? double(accepted_u) / double(n) : 0.0;
}

double Trace::acceptance_rate_gamma() const {
  std::size_t const n = rows.empty() ? 0 : rows.size() - 1;
  return n ? double(accepted_gamma) / double(n) : 0.0;
}

namespace {

// Distance at which a correlation curve first reaches `level`, linearly
// interpolated; negative when it never does.
double first_crossing(std::span<double const> values, double level) {
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] <= level) {
      double const a = values[k - 1] - level, b = values[k] - level;
      return double(k - 1) + (a == b ? 0.0 : a / (a - b));
    }
  }
  return -1.0;
}

double model_crossing(bool plane, double level) {
  double prev = 1.0;
  for (double r = 0.01; r < 60.0; r += 0.01) {
    double const c = plane ? cor_s(r, 0.5, 1.0) : cor_z(r, 0.5, 1.0);
    if (c <= level) return r - 0.01 + 0.01 * (prev - level) / (prev - c);
    prev = c;
  }
  return -1.0;
}

double initial_kappa(CovCurve const& c, bool plane, double spacing) {
  std::vector<double> v = c.values;
  double const v0 = v.front();
  if (v0 <= 0.0) return 1.0 / spacing;
  for (double& x : v) x /= v0;
  double level = 0.0;
  double d = first_crossing(v, level);
  if (d < 0.0) {
    level = std::exp(-1.0);
    d = first_crossing(v, level);
  }
  if (d < 0.0) d = double(v.size() - 1);
  d = std::max(d, 0.5);
  double const x0 = model_crossing(plane, level);
  return x0 / (d * spacing);
}

}  // namespace

OscParams initial_params(BinaryVolume const& y) {
  double const vf = volume_fraction(y);
  if (vf <= 0.0 || vf >= 1.0) throw EmptyPhase("initial_params: the volume must contain both phases");
  OscParams p;
  p.u = normal_quantile(1.0 - vf);
  p.theta_s = 0.5;
  p.theta_z = 0.5;
  auto const [nx, ny, nz] = y.dims();
  std::size_t const lag_s = std::min(nx, ny) / 2, lag_z = nz / 2;
  p.kappa_s = lag_s >= 2 ? initial_kappa(empirical_cov_splane(y, lag_s), true, y.voxel_size()[0])
                         : 1.0 / y.voxel_size()[0];
  p.kappa_z = lag_z >= 2 ? initial_kappa(empirical_cov_zline(y, lag_z), false, y.voxel_size()[2])
                         : 1.0 / y.voxel_size()[2];
  p.tau = 1.0;
  p.sigma = 1.0;
  return p;
}

double unit_variance_tau(PrecisionOperator const& prec_tau1, ObservationMap const& a) {
  std::size_t node = 0;
  if (a.n_voxels() > 0) {
    auto const [nx, ny, nz] = a.dims;
    node = a.node_of_voxel[nx / 2 + nx * (ny / 2 + ny * (nz / 2))];
  }
  std::size_t const s = node / prec_tau1.n_z(), z = node % prec_tau1.n_z();
  double const vs = prec_tau1.q_s_inverse_column(s)[s];
  double const vz = prec_tau1.q_z_inverse_dense()[z * prec_tau1.n_z() + z];
  return std::sqrt(vs * vz);
}

Trace run_chain(BinaryVolume const& y, ObservationMap const& a, PrecisionBuilder const& build,
                ChainConfig const& config, Checkpoint const* resume) {
  config.prior.validate();
  config.proposal.validate();
  if (y.size() != a.n_voxels()) throw DimensionError("run_chain: volume does not match the observation map");
  if (config.thin == 0) throw ConfigError("run_chain: thin must be >= 1");

  RandomStream rng_w(config.seed, "w-block");
  RandomStream rng_s(config.seed, "s-block");
  RandomStream rng_g(config.seed, "gamma-block");

  Trace trace;
  trace.seed = config.seed;
  ChainState state;
  ProposalSpec proposal = config.proposal;
  std::size_t start = 0;
  PrecisionOperator prec;

  if (resume) {
    state = resume->state;
    proposal = resume->proposal;
    start = resume->iteration;
    rng_w.set_counter(resume->counters.w);
    rng_s.set_counter(resume->counters.s);
    rng_g.set_counter(resume->counters.gamma);
    trace.accepted_u = resume->accepted_u;
    trace.accepted_gamma = resume->accepted_gamma;
    prec = build(state.params);
  } else {
    OscParams p;
    if (config.init) {
      p = *config.init;
    } else {
      p = initial_params(y);
      p.tau = 1.0;
      p.tau = unit_variance_tau(build(p), a);
    }
    p.validate();
    prec = build(p);
    state.params = p;
    state.w.assign(prec.size(), 0.0);
    if (a.n_weights != prec.size()) throw DimensionError("run_chain: observation map does not match the precision");
    RandomStream rng_init(config.seed, "init");
    state.s.resize(y.size());
    auto const x = a.apply(state.w);
    draw_auxiliary(x, y, p.u, p.sigma, rng_init, state.s);
    state.log_targets.log_lik_u = probit_log_likelihood(x, y, p.u, p.sigma);
    state.log_targets.quad = 0.0;
    state.log_targets.logdet_s = prec.chol_s.log_determinant();
    state.log_targets.logdet_z = prec.chol_z.log_determinant();
    trace.rows.push_back({0, p, false, false, 0, 0.0});
    trace.snapshot_iterations.push_back(0);
    trace.w_snapshots.push_back(state.w);
  }

  auto const counts = observation_counts(a);
  PosteriorPreconditioner pre(prec, counts, state.params.sigma, config.sampler.preconditioner);
  std::size_t const end = std::max(start, config.n_iter);
  for (std::size_t it = start + 1; it <= end; ++it) {
    TraceRow row;
    row.iteration = it;
    try {
      WSampleStats ws;
      state.w = sample_w(state, prec, a, pre, rng_w, config.sampler.pcg, &ws);
      row.pcg_iterations = ws.pcg_iterations;
      row.pcg_residual = ws.residual;
      trace.pcg_retries += ws.retried;
      row.accepted_u = sample_s_u(state, proposal.rw_step_u, y, a, rng_s);
      GammaStepSizes const steps{proposal.rw_step_theta_s, proposal.rw_step_theta_z, proposal.lognormal_step_kappa_s,
                                 proposal.lognormal_step_kappa_z};
      row.accepted_gamma = sample_gamma(state, prec, config.prior, steps, build, rng_g);
      if (row.accepted_gamma) pre = PosteriorPreconditioner(prec, counts, state.params.sigma, config.sampler.preconditioner);
    } catch (NumericalError const& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    trace.accepted_u += row.accepted_u;
    trace.accepted_gamma += row.accepted_gamma;
    if (proposal.adapt && it <= config.burn_in) {
      double const c = std::pow(double(it), -0.6);
      proposal.rw_step_u *= std::exp(c * (double(row.accepted_u) - proposal.target_accept));
      double const f = std::exp(c * (double(row.accepted_gamma) - proposal.target_accept));
      proposal.rw_step_theta_s *= f;
      proposal.rw_step_theta_z *= f;
      proposal.lognormal_step_kappa_s *= f;
      proposal.lognormal_step_kappa_z *= f;
    }
    row.params = state.params;
    trace.rows.push_back(row);
    if (it % config.thin == 0) {
      trace.snapshot_iterations.push_back(it);
      trace.w_snapshots.push_back(state.w);
    }
  }

  trace.final_proposal = proposal;
  trace.checkpoint.iteration = end;
  trace.checkpoint.state = state;
  trace.checkpoint.proposal = proposal;
  trace.checkpoint.counters = {rng_w.counter(), rng_s.counter(), rng_g.counter()};
  trace.checkpoint.accepted_u = trace.accepted_u;
  trace.checkpoint.accepted_gamma = trace.accepted_gamma;
  return trace;
}

Trace run_chain(BinaryVolume const& y, SpdeDiscretization const& disc, ChainConfig const& config,
                Checkpoint const* resume) {
  auto const a = build_observation_map(disc.mesh_s, disc.mesh_z, y.dims());
  return run_chain(y, a, spde_precision_builder(disc), config, resume);
}

ParamSummary const& PosteriorSummary::at(std::string const& name) const {
  for (auto const& p : params)
    if (p.name == name) return p;
  throw ConfigError("posterior summary has no parameter '" + name + "'");
}

PosteriorSummary posterior_summary(Trace const& t, double burn_in_fraction, std::size_t grid_points) {
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) throw ConfigError("burn_in_fraction must lie in [0,1)");
  if (grid_points < 2) throw ConfigError("posterior_summary: need at least 2 grid points");
  std::size_t const n = t.rows.size();
  auto const drop = static_cast<std::size_t>(std::floor(burn_in_fraction * double(n)));
  if (drop >= n) throw DimensionError("posterior_summary: empty post-burn-in segment");
  PosteriorSummary out;
  out.n_discarded = drop;
  out.n_used = n - drop;

  using Getter = double (*)(OscParams const&);
  std::pair<char const*, Getter> const fields[] = {
      {"theta_s", [](OscParams const& p) { return p.theta_s; }},
      {"kappa2_s", [](OscParams const& p) { return p.kappa_s * p.kappa_s; }},
      {"theta_z", [](OscParams const& p) { return p.theta_z; }},
      {"kappa2_z", [](OscParams const& p) { return p.kappa_z * p.kappa_z; }},
      {"tau2", [](OscParams const& p) { return p.tau * p.tau; }},
      {"u", [](OscParams const& p) { return p.u; }},
  };
  for (auto const& [name, get] : fields) {
    std::vector<double> x;
    x.reserve(out.n_used);
    for (std::size_t i = drop; i < n; ++i) x.push_back(get(t.rows[i].params));
    ParamSummary ps;
    ps.name = name;
    double m = 0.0;
    for (double v : x) m += v;
    m /= double(x.size());
    double ss = 0.0;
    for (double v : x) ss += sq(v - m);
    ps.mean = m;
    ps.sd = x.size() > 1 ? std::sqrt(ss / double(x.size() - 1)) : 0.0;

    // Gaussian KDE, Silverman bandwidth, renormalized on the grid.
    double const iqr = sample_quantile(x, 0.75) - sample_quantile(x, 0.25);
    double spread = std::min(ps.sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = std::max(ps.sd, iqr / 1.34);
    double h = 0.9 * spread * std::pow(double(x.size()), -0.2);
    if (!(h > 0.0)) h = 1e-3 * std::max(std::abs(m), 1e-3);
    auto const [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    double const lo = *lo_it - 4.0 * h, hi = *hi_it + 4.0 * h;
    ps.grid.resize(grid_points);
    ps.density.assign(grid_points, 0.0);
    double const dx = (hi - lo) / double(grid_points - 1);
    for (std::size_t g = 0; g < grid_points; ++g) {
      double const at = lo + dx * double(g);
      ps.grid[g] = at;
      double s = 0.0;
      for (double v : x) s += std::exp(-0.5 * sq((at - v) / h));
      ps.density[g] = s;
    }
    double area = 0.0;
    for (std::size_t g = 1; g < grid_points; ++g) area += 0.5 * dx * (ps.density[g] + ps.density[g - 1]);
    for (double& d : ps.density) d /= area;
    out.params.push_back(std::move(ps));
  }
  return out;
}

}  // namespace porogen
