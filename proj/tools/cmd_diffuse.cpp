#include <cstdio>
#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "porogen/diffusion.hpp"

namespace porogen::cli {

namespace {

std::vector<std::filesystem::path> ensemble_paths(std::filesystem::path const& dir, std::string const& field) {
  auto const summary = read_json(dir / "simulate.json");
  std::vector<std::filesystem::path> out;
  for (auto const& m : summary.at("members")) {
    if (!m.contains(field)) {
      throw ConfigError("ensemble member " + std::to_string(m.at("index").get<std::size_t>()) + " has no '" + field +
                        "' volume");
    }
    out.push_back(dir / m.at(field).get<std::string>());
  }
  return out;
}

}  // namespace

void cmd_diffuse(GlobalOptions const& g) {
  auto cfg = ConfigReader::from_file(g.config);
  auto const data_path = cfg.path_optional("data");
  std::vector<std::filesystem::path> members;
  if (cfg.has("ensemble")) {
    auto const dir = cfg.path("ensemble");
    members = ensemble_paths(dir, cfg.get<std::string>("ensemble_field", "filtered"));
  }
  if (cfg.has("volumes")) {
    auto const list = cfg.get<std::vector<std::string>>("volumes");
    for (auto const& p : list) {
      std::filesystem::path q(p);
      members.push_back(q.is_absolute() ? q : cfg.base() / q);
    }
  }
  if (!data_path && members.empty()) throw ConfigError("config needs 'data', 'ensemble' or 'volumes'");
  double const u_j = cfg.get<double>("u_J", 0.01);
  double const alpha = cfg.get<double>("alpha", 0.01);
  std::size_t const n_bins = positive_count(cfg, "n_bins", 20);
  double const n_sd = cfg.get<double>("n_sd", 4.0);
  if (!(n_sd > 0.0)) throw ConfigError("config field 'n_sd' must be positive");
  DiffusionOptions opts;
  opts.lateral = lateral_boundary_from_string(cfg.get<std::string>("lateral", "no_flux"));
  opts.tol = cfg.get<double>("tol", opts.tol);
  if (!(opts.tol > 0.0)) throw ConfigError("config field 'tol' must be positive");
  bool const write_flux = cfg.get<bool>("write_flux", false);
  cfg.finish();

  std::filesystem::create_directories(g.out);
  auto const solve = [&](std::filesystem::path const& p) {
    auto f = solve_diffusion(read_binary_volume(p), opts);
    f.concentration.clear();
    f.concentration.shrink_to_fit();
    return f;
  };

  std::vector<FluxField> fields(members.size());
  parallel_for(members.size(), g.threads, [&](std::size_t k) { fields[k] = solve(members[k]); });
  std::optional<FluxField> data;
  if (data_path) data = solve(*data_path);

  json report;
  report["command"] = "diffuse";
  report["header"] = {{"u_J", u_j},
                      {"alpha", alpha},
                      {"n_bins", n_bins},
                      {"n_sd", n_sd},
                      {"lateral", to_string(opts.lateral)},
                      {"tol", opts.tol}};

  HistogramGrid grid;
  if (!fields.empty()) {
    grid = ensemble_grid(fields, n_bins, n_sd);
  } else {
    FluxMoments m;
    m.add(*data);
    grid = m.grid(n_bins, n_sd);
  }

  json hists;
  if (data) {
    report["data"] = {{"d_eff", effective_diffusion(*data)},
                      {"percolating", data->percolating},
                      {"iterations", data->iterations},
                      {"max_divergence", data->max_divergence}};
    hists["data"] = to_json(flux_histogram(*data, grid));
    if (write_flux) write_flux_field(g.out / "flux_data", *data);
  }

  bool pass = true;
  if (!fields.empty()) {
    std::vector<double> d_eff(fields.size());
    std::vector<FluxHistogram3D> member_hists(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      d_eff[k] = effective_diffusion(fields[k]);
      member_hists[k] = flux_histogram(fields[k], grid);
    }
    std::vector<double> mean(grid.size(), 0.0);
    for (auto const& h : member_hists)
      for (std::size_t b = 0; b < mean.size(); ++b) mean[b] += h.values[b] / double(member_hists.size());
    hists["ensemble_mean"] = to_json(FluxHistogram3D{grid, mean});
    {
      std::ofstream os(g.out / "d_eff.csv");
      if (!os) throw IoError("cannot write d_eff.csv");
      os << "member,d_eff\n";
      for (std::size_t k = 0; k < d_eff.size(); ++k) os << k << ',' << format_exact(d_eff[k]) << '\n';
    }
    report["ensemble"] = {{"n", fields.size()}, {"d_eff", mean_sd_cell(d_eff)}, {"d_eff_csv", "d_eff.csv"}};
    if (write_flux) {
      for (std::size_t k = 0; k < fields.size(); ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "flux_%04zu", k);
        write_flux_field(g.out / buf, fields[k]);
      }
    }
    auto const ex = excursion_sets(member_hists, u_j, alpha);
    report["excursion"] = to_json(ex);
    if (data) {
      auto const c = containment_test(ex, flux_histogram(*data, grid));
      report["containment"] = to_json(c);
      pass = c.pass;
    }
  }
  write_json(g.out / "histograms.json", hists);
  write_json(g.out / "diffuse.json", report);
  if (!pass) throw ValidationFailure("diffuse: the data histogram violates the excursion sets");
}

}  // namespace porogen::cli
