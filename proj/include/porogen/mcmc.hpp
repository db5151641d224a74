#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "porogen/cholesky.hpp"
#include "porogen/mesh.hpp"
#include "porogen/pcg.hpp"
#include "porogen/random.hpp"
#include "porogen/spde.hpp"
#include "porogen/volume.hpp"

namespace porogen {

// theta ~ U(0,1); kappa^2 ~ Gamma(shape, rate) for s and z; tau^2 ~
// Gamma(shape, rate); flat prior on u.
struct PriorSpec {
  double kappa2_s_shape = 1.0;
  double kappa2_s_rate = 6e-5;
  double kappa2_z_shape = 1.0;
  double kappa2_z_rate = 6e-5;
  double tau2_shape = 1.0;
  double tau2_rate = 5e-3;

  void validate() const;
  // log pi(kappa_s^2) + log pi(kappa_z^2), up to a constant.
  double log_kappa_prior(OscParams const& p) const;
};

struct ProposalSpec {
  double rw_step_u = 0.01;
  double rw_step_theta_s = 0.02;
  double rw_step_theta_z = 0.02;
  double lognormal_step_kappa_s = 0.02;
  double lognormal_step_kappa_z = 0.02;
  bool adapt = true;
  double target_accept = 0.3;

  // Steps may be zero (degenerate proposals); negative steps are rejected.
  void validate() const;
};

enum class PreconditionerKind { kron_ichol, kron_exact, diagonal, none };

std::string to_string(PreconditionerKind k);
PreconditionerKind preconditioner_from_string(std::string const& s);

struct SamplerOptions {
  PcgOptions pcg;
  PreconditionerKind preconditioner = PreconditionerKind::kron_ichol;
};

struct LogTargets {
  // sum_i log P(y_i | A_i w, u)
  double log_lik_u = 0.0;
  // w^T (Q_s ⊗ Q_z) w and the two block log-determinants at the current gamma.
  double quad = 0.0;
  double logdet_s = 0.0;
  double logdet_z = 0.0;
};

struct ChainState {
  std::vector<double> w;
  std::vector<double> s;
  OscParams params;
  LogTargets log_targets;
};

// Builds the prior precision for given parameters. Throws NumericalError when
// the parameters give an invalid precision.
using PrecisionBuilder = std::function<PrecisionOperator(OscParams const&)>;

PrecisionBuilder spde_precision_builder(SpdeDiscretization const& disc);

// P^{-1} for the posterior system tau^2 (Q_s ⊗ Q_z) + diag(A^T A) / sigma^2.
class PosteriorPreconditioner {
 public:
  PosteriorPreconditioner() = default;
  PosteriorPreconditioner(PrecisionOperator const& prec, std::span<double const> ata_diag,
                          double sigma, PreconditionerKind kind);
  void apply(std::span<double const> in, std::span<double> out) const;
  PreconditionerKind kind() const { return kind_; }

 private:
  PreconditionerKind kind_ = PreconditionerKind::none;
  LowerTriangularFactor left_;
  LowerTriangularFactor right_;
  double inv_scale_ = 1.0;
  std::vector<double> inv_diag_;
};

// Diagonal of A^T A for the one-hot observation map (voxels per node).
std::vector<double> observation_counts(ObservationMap const& a);

struct WSampleStats {
  std::size_t pcg_iterations = 0;
  double residual = 0.0;
  bool retried = false;
};

// One draw of w from its full conditional N(Qhat^{-1} A^T s / sigma^2, Qhat^{-1})
// by perturbation and PCG, warm-started at state.w.
std::vector<double> sample_w(ChainState const& state, PrecisionOperator const& prec,
                             ObservationMap const& a, PosteriorPreconditioner const& pre,
                             RandomStream& rng, PcgOptions const& pcg, WSampleStats* stats = nullptr);
std::vector<double> sample_w(ChainState const& state, PrecisionOperator const& prec,
                             ObservationMap const& a, RandomStream& rng,
                             SamplerOptions const& options = {}, WSampleStats* stats = nullptr);

// Standard normal truncated to [a, inf). Never fails.
double truncated_normal_lower(double a, RandomStream& rng);

// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);

// sum_i log P(y_i | x_i, u) for the probit model with noise scale sigma.
double probit_log_likelihood(std::span<double const> x, BinaryVolume const& y, double u, double sigma);

// Auxiliary draws s_i ~ N(x_i, sigma^2) truncated to the side of u given by y_i.
void draw_auxiliary(std::span<double const> x, BinaryVolume const& y, double u, double sigma,
                    RandomStream& rng, std::span<double> s);

// Joint random-walk move on u with fresh auxiliaries. Updates state in place
// and returns whether the move was accepted.
bool sample_s_u(ChainState& state, double rw_step_u, BinaryVolume const& y, ObservationMap const& a,
                RandomStream& rng);

struct GammaStepSizes {
  double theta_s = 0.0;
  double theta_z = 0.0;
  double log_kappa_s = 0.0;
  double log_kappa_z = 0.0;
};

// log p(theta, kappa | w) with tau^2 integrated out, up to a constant.
double log_marginal_gamma(OscParams const& p, LogTargets const& t, PriorSpec const& prior,
                          std::size_t n_s, std::size_t n_z);

// Reflects x into [0, 1).
double reflect_unit(double x);

// Joint move on (theta, kappa) with tau^2 drawn from its full conditional.
// On acceptance updates state and prec and returns true.
bool sample_gamma(ChainState& state, PrecisionOperator& prec, PriorSpec const& prior,
                  GammaStepSizes const& steps, PrecisionBuilder const& build, RandomStream& rng);

struct TraceRow {
  std::size_t iteration = 0;
  OscParams params;
  bool accepted_u = false;
  bool accepted_gamma = false;
  std::size_t pcg_iterations = 0;
  double pcg_residual = 0.0;
};

struct StreamCounters {
  std::uint64_t w = 0;
  std::uint64_t s = 0;
  std::uint64_t gamma = 0;
};

// Everything needed to continue a chain bit-exactly.
struct Checkpoint {
  std::size_t iteration = 0;
  ChainState state;
  ProposalSpec proposal;  // with adapted steps
  StreamCounters counters;
  std::size_t accepted_u = 0;
  std::size_t accepted_gamma = 0;
};

struct ChainConfig {
  PriorSpec prior;
  ProposalSpec proposal;
  SamplerOptions sampler;
  std::size_t n_iter = 0;
  // Adaptation runs for the first burn_in iterations only.
  std::size_t burn_in = 0;
  std::size_t thin = 100;
  std::uint64_t seed = 0;
  // Starting parameters; estimated from the data when absent.
  std::optional<OscParams> init;
};

struct Trace {
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  // Snapshots of w every `thin` iterations (iteration numbers alongside).
  std::vector<std::size_t> snapshot_iterations;
  std::vector<std::vector<double>> w_snapshots;
  std::size_t accepted_u = 0;
  std::size_t accepted_gamma = 0;
  std::size_t pcg_retries = 0;
  ProposalSpec final_proposal;
  Checkpoint checkpoint;

  double acceptance_rate_u() const;
  double acceptance_rate_gamma() const;
};

// Starting parameters: u from the volume fraction, theta = 0.5, kappa from the
// first zero crossing of the empirical covariance, tau for unit field
// variance (set later from the precision).
OscParams initial_params(BinaryVolume const& y);

// Scales tau so that the latent field has unit variance at the central node.
double unit_variance_tau(PrecisionOperator const& prec_tau1, ObservationMap const& a);

Trace run_chain(BinaryVolume const& y, ObservationMap const& a, PrecisionBuilder const& build,
                ChainConfig const& config, Checkpoint const* resume = nullptr);
Trace run_chain(BinaryVolume const& y, SpdeDiscretization const& disc, ChainConfig const& config,
                Checkpoint const* resume = nullptr);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

struct PosteriorSummary {
  std::size_t n_used = 0;
  std::size_t n_discarded = 0;
  std::vector<ParamSummary> params;

  ParamSummary const& at(std::string const& name) const;
};

// Names: theta_s, kappa2_s, theta_z, kappa2_z, tau2, u.
PosteriorSummary posterior_summary(Trace const& t, double burn_in_fraction, std::size_t grid_points = 256);

nlohmann::json to_json(PriorSpec const& p);
nlohmann::json to_json(ProposalSpec const& p);
nlohmann::json to_json(OscParams const& p);
nlohmann::json to_json(PosteriorSummary const& s);
void from_json(nlohmann::json const& j, PriorSpec& p);
void from_json(nlohmann::json const& j, ProposalSpec& p);
void from_json(nlohmann::json const& j, OscParams& p);

// dir/trace.json (header), dir/trace.csv, dir/w_snapshots.bin,
// dir/checkpoint.bin.
void write_trace(std::filesystem::path const& dir, Trace const& t, nlohmann::json const& header);
Trace read_trace(std::filesystem::path const& dir);
nlohmann::json read_trace_header(std::filesystem::path const& dir);

void write_checkpoint(std::filesystem::path const& path, Checkpoint const& c);
Checkpoint read_checkpoint(std::filesystem::path const& path);

// Appends the rows and snapshots of `next` (a resumed run) to `t`.
void append_trace(Trace& t, Trace const& next);

}  // namespace porogen
