#include <filesystem>

#include "commands.hpp"
#include "porogen/ingest.hpp"
#include "porogen/microstructure.hpp"

namespace porogen::cli {

namespace {

std::array<std::size_t, 3> read_triple(ConfigReader& r, std::string const& key, std::size_t fallback,
                                       bool positive) {
  if (!r.has(key)) return {fallback, fallback, fallback};
  auto const& v = r.raw(key);
  std::array<std::size_t, 3> out{};
  bool ok = v.is_array() && v.size() == 3;
  for (std::size_t i = 0; ok && i < 3; ++i) {
    ok = v[i].is_number_integer() && v[i].get<std::int64_t>() >= (positive ? 1 : 0);
    if (ok) out[i] = v[i].get<std::size_t>();
  }
  if (!ok) throw ConfigError("config field '" + r.field(key) + "' must be an array of three integers");
  return out;
}

}  // namespace

void cmd_ingest(GlobalOptions const& g) {
  auto cfg = ConfigReader::from_file(g.config);
  auto const input = cfg.path("input");
  DepthThresholdSpec spec;
  spec.quantile = cfg.get<double>("quantile", spec.quantile);
  spec.poly_degree = cfg.get<int>("poly_degree", spec.poly_degree);
  spec.validate();
  std::optional<std::array<std::array<std::size_t, 3>, 3>> window;
  if (auto w = cfg.child_optional("window")) {
    auto const origin = read_triple(*w, "origin", 0, false);
    auto const dims = read_triple(*w, "dims", 0, true);
    auto const stride = read_triple(*w, "stride", 1, true);
    w->finish();
    window = {origin, dims, stride};
  }
  cfg.finish();

  auto const gray = read_gray_volume(input);
  auto const fit = depth_threshold_fit(gray, spec);
  BinaryVolume out = fit.volume;
  if (window) out = extract_window(out, (*window)[0], (*window)[1], (*window)[2]);

  json replay;
  replay["input"] = std::filesystem::absolute(input).lexically_normal().string();
  replay["quantile"] = spec.quantile;
  replay["poly_degree"] = spec.poly_degree;
  if (window) replay["window"] = {{"origin", (*window)[0]}, {"dims", (*window)[1]}, {"stride", (*window)[2]}};

  json prov;
  prov["command"] = "ingest";
  prov["config"] = replay;
  prov["coefficients"] = fit.coefficients;
  prov["layer_quantiles"] = fit.layer_quantiles;
  std::vector<std::size_t> constant, excluded;
  for (std::size_t z = 0; z < fit.constant_layer.size(); ++z) {
    if (fit.constant_layer[z]) constant.push_back(z);
    if (!fit.used_in_fit[z]) excluded.push_back(z);
  }
  prov["constant_layers"] = constant;
  prov["layers_excluded_from_fit"] = excluded;
  prov["volume_fraction"] = volume_fraction(out);

  std::filesystem::create_directories(g.out);
  write_volume(g.out / "volume.pgv", out, prov);
}

}  // namespace porogen::cli
