#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <boost/math/special_functions/erf.hpp>

#include "commands.hpp"
#include "porogen/mcmc.hpp"
#include "porogen/microstructure.hpp"

namespace porogen::cli {

void parallel_for(std::size_t n, std::size_t threads, std::function<void(std::size_t)> const& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::size_t const i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard lock(mu);
        if (failure && failed_index < i) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

MeshSettings MeshSettings::read(ConfigReader& r, bool allow_refinement) {
  MeshSettings m;
  m.ext_fraction = r.get<double>("ext_fraction", m.ext_fraction);
  if (!(m.ext_fraction >= 0.0)) throw ConfigError("config field '" + r.field("ext_fraction") + "' must be >= 0");
  if (r.has("z_extension")) {
    auto const& v = r.raw("z_extension");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError("config field '" + r.field("z_extension") + "' must be a non-negative integer");
    }
    m.z_extension = v.get<std::size_t>();
  }
  if (allow_refinement) m.refinement = positive_count(r, "refinement", 1);
  return m;
}

json MeshSettings::to_json() const {
  json j;
  j["ext_fraction"] = ext_fraction;
  if (z_extension) j["z_extension"] = *z_extension;
  j["refinement"] = refinement;
  return j;
}

Model build_model(Dims const& dims, VoxelSize const& voxel_size, MeshSettings const& m) {
  if (voxel_size[0] != voxel_size[1]) throw ConfigError("in-plane voxel sizes must be equal");
  std::size_t const r = m.refinement;
  auto const fine = [r](std::size_t n) { return n == 0 ? 0 : (n - 1) * r + 1; };
  std::size_t const nz_fine = fine(dims[2]);
  std::size_t const z_ext = m.z_extension ? *m.z_extension * r : default_z_extension(nz_fine);
  auto mesh_s = build_mesh_2d(fine(dims[0]), fine(dims[1]), m.ext_fraction, voxel_size[0] / double(r));
  auto mesh_z = build_mesh_1d(nz_fine, z_ext, voxel_size[2] / double(r));
  Model model{SpdeDiscretization(std::move(mesh_s), std::move(mesh_z)), {}};
  model.a = build_observation_map(model.disc.mesh_s, model.disc.mesh_z, dims, r);
  return model;
}

namespace {

double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

double positive(ConfigReader& r, std::string const& key) {
  double const v = r.get<double>(key);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("config field '" + r.field(key) + "' must be positive");
  return v;
}

}  // namespace

OscParams read_params(ConfigReader r, Model const& model) {
  OscParams p;
  p.theta_s = r.get<double>("theta_s");
  p.kappa_s = std::sqrt(positive(r, "kappa2_s"));
  p.theta_z = r.get<double>("theta_z");
  p.kappa_z = std::sqrt(positive(r, "kappa2_z"));
  p.sigma = r.has("sigma") ? positive(r, "sigma") : 1.0;
  p.tau = 1.0;
  p.validate();

  auto const unit_tau = [&] {
    OscParams q = p;
    q.tau = 1.0;
    return unit_variance_tau(build_precision(q, model.disc), model.a);
  };
  auto const& tau2 = r.raw("tau2");
  std::optional<double> tau0;
  if (tau2.is_string() && tau2.get<std::string>() == "unit") {
    tau0 = unit_tau();
    p.tau = *tau0;
  } else if (tau2.is_number() && tau2.get<double>() > 0.0) {
    p.tau = std::sqrt(tau2.get<double>());
  } else {
    throw ConfigError("config field '" + r.field("tau2") + "' must be a positive number or \"unit\"");
  }

  if (r.has("u") == r.has("volume_fraction")) {
    throw ConfigError("config needs exactly one of '" + r.field("u") + "' and '" + r.field("volume_fraction") + "'");
  }
  if (r.has("u")) {
    p.u = r.get<double>("u");
  } else {
    double const vf = r.get<double>("volume_fraction");
    if (!(vf > 0.0 && vf < 1.0)) throw ConfigError("config field '" + r.field("volume_fraction") + "' must lie in (0,1)");
    if (!tau0) tau0 = unit_tau();
    double const field_sd = *tau0 / p.tau;
    p.u = normal_quantile(1.0 - vf) * std::sqrt(field_sd * field_sd + p.sigma * p.sigma);
  }
  r.finish();
  p.validate();
  return p;
}

json params_json(OscParams const& p) {
  return {{"theta_s", p.theta_s},
          {"kappa2_s", p.kappa_s * p.kappa_s},
          {"theta_z", p.theta_z},
          {"kappa2_z", p.kappa_z * p.kappa_z},
          {"tau2", p.tau * p.tau},
          {"u", p.u},
          {"sigma", p.sigma}};
}

int read_filter_size(ConfigReader& r, std::string const& key, std::string const& fallback) {
  json const v = r.has(key) ? r.raw(key) : json(fallback);
  if (v.is_string()) {
    auto const s = v.get<std::string>();
    if (s == "none") return 0;
    if (s == "auto") return -1;
  } else if (v.is_number_integer()) {
    int const n = v.get<int>();
    if (n == 3 || n == 5) return n;
  }
  throw ConfigError("config field '" + r.field(key) + "' must be 3, 5, \"auto\" or \"none\"");
}

int resolve_filter_size(int configured, double kappa_s, double spacing) {
  return configured < 0 ? choose_filter_size(kappa_s, spacing) : configured;
}

SimulatedStructure simulate_structure(Model const& model, OscParams const& p, VoxelSize const& voxel_size,
                                      std::uint64_t seed, std::string const& name, std::size_t k,
                                      int filter_size, std::optional<double> target_vf) {
  auto const prec = build_precision(p, model.disc);
  RandomStream rng_w(seed, name + "-w", k);
  RandomStream rng_y(seed, name + "-y", k);
  auto const w = sample_gmrf_prior(prec, rng_w);
  SimulatedStructure s;
  s.latent = latent_voxel_field(w, model.a, voxel_size);
  s.y = simulate_noisy_binary(w, model.a, p, rng_y, voxel_size);
  int const n = resolve_filter_size(filter_size, p.kappa_s, voxel_size[0]);
  if (n > 0) s.filtered = mean_filter_rethreshold(s.y, n, target_vf ? *target_vf : volume_fraction(s.y));
  return s;
}

void write_json(std::filesystem::path const& path, json const& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

json read_json(std::filesystem::path const& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (json::parse_error const& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string format_double(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string mean_sd_cell(std::vector<double> const& values) {
  if (values.empty()) return "NA";
  double m = 0.0;
  for (double v : values) m += v;
  m /= double(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  double const sd = values.size() > 1 ? std::sqrt(ss / double(values.size() - 1)) : 0.0;
  return format_double(m, 3) + " (" + format_double(sd, 3) + ")";
}

}  // namespace porogen::cli
