#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "commands.hpp"
#include "porogen/microstructure.hpp"

namespace porogen::cli {

namespace {

std::string member_dir(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sim_%04zu", k);
  return buf;
}

}  // namespace

void cmd_simulate(GlobalOptions const& g) {
  auto cfg = ConfigReader::from_file(g.config);
  auto const& dims_j = cfg.raw("dims");
  if (!dims_j.is_array() || dims_j.size() != 3 ||
      !std::all_of(dims_j.begin(), dims_j.end(), [](json const& d) { return d.is_number_unsigned(); })) {
    throw ConfigError("config field 'dims' must hold three non-negative integers");
  }
  Dims const dims{dims_j[0].get<std::size_t>(), dims_j[1].get<std::size_t>(), dims_j[2].get<std::size_t>()};
  VoxelSize vs{1.0, 1.0, 1.0};
  if (cfg.has("voxel_size")) {
    auto const v = cfg.get<std::vector<double>>("voxel_size");
    if (v.size() != 3 || !(v[0] > 0 && v[1] > 0 && v[2] > 0)) {
      throw ConfigError("config field 'voxel_size' must hold three positive numbers");
    }
    vs = {v[0], v[1], v[2]};
  }
  auto const mesh = MeshSettings::read(cfg, true);
  std::size_t const n_sims = positive_count(cfg, "n_sims", 1);
  std::optional<double> target_vf;
  if (cfg.has("target_vf")) {
    target_vf = cfg.get<double>("target_vf");
    if (!(*target_vf > 0.0 && *target_vf <= 1.0)) throw ConfigError("config field 'target_vf' must lie in (0,1]");
  }
  int const filter_cfg = read_filter_size(cfg, "filter_size", "auto");
  bool const write_latent = cfg.get<bool>("write_latent", false);
  auto params_cfg = cfg.child("params");
  cfg.finish();

  auto const model = build_model(dims, vs, mesh);
  auto const p = read_params(params_cfg, model);
  int const filter_size = resolve_filter_size(filter_cfg, p.kappa_s, vs[0]);

  std::filesystem::create_directories(g.out);
  std::vector<json> members(n_sims);
  parallel_for(n_sims, g.threads, [&](std::size_t k) {
    auto const s = simulate_structure(model, p, vs, g.seed, "sim", k, filter_size, target_vf);
    auto const dir = member_dir(k);
    std::filesystem::create_directories(g.out / dir);
    json prov{{"command", "simulate"}, {"seed", g.seed}, {"index", k}};
    json m{{"index", k}, {"y", dir + "/y.pgv"}, {"volume_fraction_y", volume_fraction(s.y)}};
    write_volume(g.out / dir / "y.pgv", s.y, prov);
    if (filter_size > 0) {
      write_volume(g.out / dir / "filtered.pgv", s.filtered, prov);
      m["filtered"] = dir + "/filtered.pgv";
      m["volume_fraction_filtered"] = volume_fraction(s.filtered);
    }
    if (write_latent) {
      write_volume(g.out / dir / "latent.pgv", s.latent, prov);
      m["latent"] = dir + "/latent.pgv";
    }
    members[k] = std::move(m);
  });

  json summary;
  summary["command"] = "simulate";
  summary["seed"] = g.seed;
  summary["dims"] = dims;
  summary["voxel_size"] = vs;
  summary["mesh"] = mesh.to_json();
  summary["params"] = params_json(p);
  summary["filter_size"] = filter_size;
  summary["target_vf"] = target_vf ? json(*target_vf) : json(nullptr);
  summary["members"] = members;
  write_json(g.out / "simulate.json", summary);
}

}  // namespace porogen::cli
