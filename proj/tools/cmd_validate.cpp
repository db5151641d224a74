#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "porogen/mcmc.hpp"
#include "porogen/microstructure.hpp"
#include "porogen/validation.hpp"

namespace porogen::cli {

namespace {

struct CurveSpec {
  std::string name;
  std::function<std::vector<double>(BinaryVolume const&)> eval;
  std::vector<double> x;
};

std::vector<std::string> read_names(ConfigReader& r, std::string const& key, std::vector<std::string> fallback) {
  auto const v = r.get<std::vector<std::string>>(key, fallback);
  if (v.empty()) throw ConfigError("config field '" + r.field(key) + "' must not be empty");
  return v;
}

Phase phase_from_string(std::string const& s) {
  if (s == "pore") return Phase::pore;
  if (s == "matrix") return Phase::matrix;
  throw ConfigError("unknown phase '" + s + "' (expected pore or matrix)");
}

void write_curve_csv(std::filesystem::path const& path, std::string const& x_name, std::vector<double> const& x,
                     std::vector<double> const& data, Envelope const& env) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << x_name << ",value,lower,upper\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << format_exact(x[i]) << ',' << format_exact(data[i]) << ',' << format_exact(env.lower[i]) << ','
       << format_exact(env.upper[i]) << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace

void cmd_validate(GlobalOptions const& g) {
  auto cfg = ConfigReader::from_file(g.config);
  auto const data_path = cfg.path("data");
  auto const fit_dir = cfg.path("fit");
  std::size_t const n_sims = positive_count(cfg, "n_sims", 100);
  if (n_sims < kMinEnvelopeCurves) {
    throw ConfigError("config field 'n_sims' must be at least " + std::to_string(kMinEnvelopeCurves));
  }
  double const alpha = cfg.get<double>("alpha", 0.05);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config field 'alpha' must lie in (0,1)");
  double const burn = cfg.get<double>("burn_in_fraction", 0.5);
  if (!(burn >= 0.0 && burn < 1.0)) throw ConfigError("config field 'burn_in_fraction' must lie in [0,1)");
  int const filter_cfg = read_filter_size(cfg, "filter_size", "none");
  auto const element_names = read_names(cfg, "elements", {"sphere", "line_x", "line_y", "line_z"});
  auto const phase_names = read_names(cfg, "phases", {"pore", "matrix"});
  std::vector<Element> elements;
  std::vector<Phase> phases;
  for (auto const& e : element_names) elements.push_back(element_from_string(e));
  for (auto const& p : phase_names) phases.push_back(phase_from_string(p));

  auto const y_data = read_binary_volume(data_path);
  auto const [nx, ny, nz] = y_data.dims();
  std::size_t const max_lag_s = positive_count(cfg, "max_lag_s", std::max<std::size_t>(1, std::min(nx, ny) / 2));
  std::size_t const max_lag_z = positive_count(cfg, "max_lag_z", std::max<std::size_t>(1, nz / 2));
  std::size_t const size_n_max = positive_count(cfg, "size_n_max", 6);
  cfg.finish();

  auto const header = read_trace_header(fit_dir / "trace");
  if (header.at("dims").get<Dims>() != y_data.dims()) {
    throw DimensionError("validate: data dims differ from the fitted volume");
  }
  MeshSettings mesh;
  {
    ConfigReader m(header.at("mesh"), "mesh", {});
    mesh = MeshSettings::read(m, true);
    m.finish();
  }
  auto const trace = read_trace(fit_dir / "trace");
  std::size_t const n_rows = trace.rows.size();
  std::size_t const first = std::min(n_rows - 1, std::size_t(std::floor(burn * double(n_rows))));
  auto const model = build_model(y_data.dims(), y_data.voxel_size(), mesh);
  VoxelSize const vs = y_data.voxel_size();

  // Posterior draws, in simulation order.
  RandomStream rng_draw(g.seed, "validate-draw");
  std::vector<OscParams> draws(n_sims);
  double kappa_s_mean = 0.0;
  for (std::size_t i = first; i < n_rows; ++i) kappa_s_mean += trace.rows[i].params.kappa_s;
  kappa_s_mean /= double(n_rows - first);
  for (auto& d : draws) {
    std::size_t const pick = first + std::min(n_rows - first - 1, std::size_t(rng_draw.uniform() * double(n_rows - first)));
    d = trace.rows[pick].params;
  }

  int const filter_size = resolve_filter_size(filter_cfg, kappa_s_mean, vs[0]);
  BinaryVolume data = y_data;
  std::optional<double> target_vf;
  if (filter_size > 0) {
    target_vf = volume_fraction(y_data);
    data = mean_filter_rethreshold(y_data, filter_size, *target_vf);
  }

  std::vector<CurveSpec> curves;
  {
    std::vector<double> lags_s(max_lag_s + 1), lags_z(max_lag_z + 1);
    for (std::size_t i = 0; i <= max_lag_s; ++i) lags_s[i] = double(i) * vs[0];
    for (std::size_t i = 0; i <= max_lag_z; ++i) lags_z[i] = double(i) * vs[2];
    curves.push_back({"cov_s", [=](BinaryVolume const& v) { return empirical_cov_splane(v, max_lag_s).values; }, lags_s});
    curves.push_back({"cov_z", [=](BinaryVolume const& v) { return empirical_cov_zline(v, max_lag_z).values; }, lags_z});
    std::vector<double> lambdas(size_n_max);
    for (std::size_t i = 0; i < size_n_max; ++i) lambdas[i] = double(i + 1);
    for (auto ph : phases) {
      for (auto el : elements) {
        curves.push_back({"size_" + to_string(el) + "_" + to_string(ph),
                          [=](BinaryVolume const& v) { return size_distribution(v, el, ph, size_n_max).survival; },
                          lambdas});
      }
    }
  }

  std::vector<std::vector<std::vector<double>>> sim_curves(curves.size(), std::vector<std::vector<double>>(n_sims));
  std::vector<double> sim_vf(n_sims), sim_sa(n_sims);
  parallel_for(n_sims, g.threads, [&](std::size_t k) {
    auto const s = simulate_structure(model, draws[k], vs, g.seed, "validate", k, filter_size, target_vf);
    BinaryVolume const& v = filter_size > 0 ? s.filtered : s.y;
    for (std::size_t c = 0; c < curves.size(); ++c) sim_curves[c][k] = curves[c].eval(v);
    sim_vf[k] = volume_fraction(v);
    sim_sa[k] = surface_area(v);
  });

  std::filesystem::create_directories(g.out);
  bool all_pass = true;
  json tests = json::array();
  for (std::size_t c = 0; c < curves.size(); ++c) {
    auto const env = simultaneous_envelope(sim_curves[c], alpha);
    auto const value = curves[c].eval(data);
    bool const pass = env.contains(value);
    all_pass = all_pass && pass;
    tests.push_back({{"name", curves[c].name},
                     {"pass", pass},
                     {"beta", env.beta},
                     {"fraction_inside", env.fraction_inside},
                     {"csv", curves[c].name + ".csv"}});
    write_curve_csv(g.out / (curves[c].name + ".csv"), c < 2 ? "lag" : "lambda", curves[c].x, value, env);
  }

  json report;
  report["command"] = "validate";
  report["seed"] = g.seed;
  report["n_sims"] = n_sims;
  report["alpha"] = alpha;
  report["filter_size"] = filter_size;
  report["tests"] = tests;
  report["pass"] = all_pass;
  report["table"] = {
      {"volume_fraction", {{"data", format_double(volume_fraction(data), 3)}, {"model", mean_sd_cell(sim_vf)}}},
      {"surface_area", {{"data", format_double(surface_area(data), 3)}, {"model", mean_sd_cell(sim_sa)}}}};
  write_json(g.out / "validate.json", report);
  if (!all_pass) throw ValidationFailure("validate: the data leave at least one envelope");
}

}  // namespace porogen::cli
