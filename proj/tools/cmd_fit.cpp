#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "porogen/mcmc.hpp"

namespace porogen::cli {

namespace {

PriorSpec read_prior(ConfigReader r) {
  PriorSpec p;
  p.kappa2_s_shape = r.get<double>("kappa2_s_shape", p.kappa2_s_shape);
  p.kappa2_s_rate = r.get<double>("kappa2_s_rate", p.kappa2_s_rate);
  p.kappa2_z_shape = r.get<double>("kappa2_z_shape", p.kappa2_z_shape);
  p.kappa2_z_rate = r.get<double>("kappa2_z_rate", p.kappa2_z_rate);
  p.tau2_shape = r.get<double>("tau2_shape", p.tau2_shape);
  p.tau2_rate = r.get<double>("tau2_rate", p.tau2_rate);
  r.finish();
  p.validate();
  return p;
}

ProposalSpec read_proposal(ConfigReader r) {
  ProposalSpec p;
  p.rw_step_u = r.get<double>("rw_step_u", p.rw_step_u);
  p.rw_step_theta_s = r.get<double>("rw_step_theta_s", p.rw_step_theta_s);
  p.rw_step_theta_z = r.get<double>("rw_step_theta_z", p.rw_step_theta_z);
  p.lognormal_step_kappa_s = r.get<double>("lognormal_step_kappa_s", p.lognormal_step_kappa_s);
  p.lognormal_step_kappa_z = r.get<double>("lognormal_step_kappa_z", p.lognormal_step_kappa_z);
  p.adapt = r.get<bool>("adapt", p.adapt);
  p.target_accept = r.get<double>("target_accept", p.target_accept);
  r.finish();
  p.validate();
  return p;
}

OscParams read_init(ConfigReader r) {
  OscParams p;
  p.theta_s = r.get<double>("theta_s");
  p.kappa_s = std::sqrt(r.get<double>("kappa2_s"));
  p.theta_z = r.get<double>("theta_z");
  p.kappa_z = std::sqrt(r.get<double>("kappa2_z"));
  p.tau = std::sqrt(r.get<double>("tau2"));
  p.u = r.get<double>("u");
  p.sigma = r.get<double>("sigma", 1.0);
  r.finish();
  if (!(p.kappa_s > 0.0 && p.kappa_z > 0.0 && p.tau > 0.0)) {
    throw ConfigError("config field 'init' needs positive kappa2_s, kappa2_z and tau2");
  }
  p.validate();
  return p;
}

void write_density_csv(std::filesystem::path const& path, ParamSummary const& s) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << s.name << ",density\n";
  for (std::size_t i = 0; i < s.grid.size(); ++i) os << format_exact(s.grid[i]) << ',' << format_exact(s.density[i]) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace

void cmd_fit(GlobalOptions const& g) {
  auto cfg = ConfigReader::from_file(g.config);
  auto const input = cfg.path("input");
  ChainConfig chain;
  chain.n_iter = positive_count(cfg, "n_iter", 0);
  if (chain.n_iter == 0) throw ConfigError("config is missing required field 'n_iter'");
  chain.burn_in = chain.n_iter / 2;
  if (cfg.has("burn_in")) {
    auto const& v = cfg.raw("burn_in");
    if (!v.is_number_unsigned() || v.get<std::size_t>() > chain.n_iter) {
      throw ConfigError("config field 'burn_in' must be an integer in [0, n_iter]");
    }
    chain.burn_in = v.get<std::size_t>();
  }
  chain.thin = positive_count(cfg, "thin", 100);
  std::size_t const checkpoint_every = positive_count(cfg, "checkpoint_every", 1000);
  if (auto r = cfg.child_optional("prior")) chain.prior = read_prior(*r);
  if (auto r = cfg.child_optional("proposal")) chain.proposal = read_proposal(*r);
  if (auto r = cfg.child_optional("init")) chain.init = read_init(*r);
  chain.sampler.preconditioner = preconditioner_from_string(cfg.get<std::string>("preconditioner", "kron_ichol"));
  chain.sampler.pcg.tol = cfg.get<double>("pcg_tol", 1e-6);
  if (!(chain.sampler.pcg.tol > 0.0 && chain.sampler.pcg.tol < 1.0)) {
    throw ConfigError("config field 'pcg_tol' must lie in (0,1)");
  }
  chain.sampler.pcg.max_iter = cfg.get<std::size_t>("pcg_max_iter", 0);
  double const summary_burn = cfg.get<double>("summary_burn_in_fraction", 0.5);
  std::size_t const grid_points = positive_count(cfg, "density_grid_points", 256);
  auto const mesh = MeshSettings::read(cfg, false);
  cfg.finish();
  chain.seed = g.seed;

  auto const y = read_binary_volume(input);
  auto const model = build_model(y.dims(), y.voxel_size(), mesh);
  auto const build = spde_precision_builder(model.disc);

  json header;
  header["command"] = "fit";
  header["input"] = std::filesystem::absolute(input).lexically_normal().string();
  header["dims"] = y.dims();
  header["voxel_size"] = y.voxel_size();
  header["mesh"] = mesh.to_json();
  header["prior"] = to_json(chain.prior);
  header["proposal"] = to_json(chain.proposal);
  header["preconditioner"] = to_string(chain.sampler.preconditioner);
  header["pcg_tol"] = chain.sampler.pcg.tol;
  header["pcg_max_iter"] = chain.sampler.pcg.max_iter;
  header["n_iter"] = chain.n_iter;
  header["burn_in"] = chain.burn_in;
  header["thin"] = chain.thin;
  header["init"] = chain.init ? params_json(*chain.init) : json(nullptr);

  auto const trace_dir = g.out / "trace";
  std::filesystem::create_directories(g.out);
  Trace trace;
  bool started = false;
  if (g.resume) {
    auto const old = read_trace_header(trace_dir);
    for (auto const& key : {"input", "dims", "voxel_size", "mesh", "prior", "proposal", "preconditioner", "pcg_tol",
                            "pcg_max_iter", "burn_in", "thin", "init", "seed"}) {
      json const now = std::string(key) == "seed" ? json(g.seed) : header[key];
      if (old.value(key, json()) != now) {
        throw ConfigError(std::string("cannot resume: '") + key + "' differs from the checkpointed run");
      }
    }
    trace = read_trace(trace_dir);
    started = true;
    if (trace.checkpoint.iteration > chain.n_iter) {
      throw ConfigError("cannot resume: checkpoint is past n_iter");
    }
  }

  std::size_t done = started ? trace.checkpoint.iteration : 0;
  while (!started || done < chain.n_iter) {
    ChainConfig seg = chain;
    seg.n_iter = std::min(chain.n_iter, done + checkpoint_every);
    Trace next = run_chain(y, model.a, build, seg, started ? &trace.checkpoint : nullptr);
    if (started) {
      append_trace(trace, next);
    } else {
      trace = std::move(next);
      started = true;
    }
    done = trace.checkpoint.iteration;
    write_trace(trace_dir, trace, header);
  }

  auto const summary = posterior_summary(trace, summary_burn, grid_points);
  json s = to_json(summary);
  s["command"] = "fit";
  s["seed"] = g.seed;
  s["n_iter"] = chain.n_iter;
  s["burn_in_fraction"] = summary_burn;
  s["acceptance_rate_u"] = trace.acceptance_rate_u();
  s["acceptance_rate_gamma"] = trace.acceptance_rate_gamma();
  s["pcg_retries"] = trace.pcg_retries;
  std::size_t pcg_total = 0;
  for (auto const& r : trace.rows) pcg_total += r.pcg_iterations;
  s["mean_pcg_iterations"] = trace.rows.size() > 1 ? double(pcg_total) / double(trace.rows.size() - 1) : 0.0;
  write_json(g.out / "summary.json", s);
  for (auto const& p : summary.params) write_density_csv(g.out / ("density_" + p.name + ".csv"), p);
}

}  // namespace porogen::cli
