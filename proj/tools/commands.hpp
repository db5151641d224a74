#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "porogen/mesh.hpp"
#include "porogen/spde.hpp"
#include "porogen/volume.hpp"

namespace porogen::cli {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::filesystem::path config;
  std::filesystem::path out;
  // fit only: continue from the checkpoint in <out>/trace.
  bool resume = false;
};

// A command finished but one of its statistical tests failed (exit code 4).
class ValidationFailure : public Error {
 public:
  using Error::Error;
};

void cmd_ingest(GlobalOptions const& g);
void cmd_simulate(GlobalOptions const& g);
void cmd_fit(GlobalOptions const& g);
void cmd_validate(GlobalOptions const& g);
void cmd_diffuse(GlobalOptions const& g);
void cmd_report(GlobalOptions const& g);

// Runs fn(0..n-1) on up to `threads` workers. Rethrows the exception of the
// lowest failing index.
void parallel_for(std::size_t n, std::size_t threads, std::function<void(std::size_t)> const& fn);

// Mesh settings shared by simulate, fit and validate.
struct MeshSettings {
  double ext_fraction = 0.12;
  // Exterior depth nodes on each side; default_z_extension when absent.
  std::optional<std::size_t> z_extension;
  std::size_t refinement = 1;

  static MeshSettings read(ConfigReader& r, bool allow_refinement);
  json to_json() const;
};

struct Model {
  SpdeDiscretization disc;
  ObservationMap a;
};

// Meshes over the voxel lattice of `dims`, node spacing voxel_size / refinement.
// Requires voxel_size[0] == voxel_size[1].
Model build_model(Dims const& dims, VoxelSize const& voxel_size, MeshSettings const& m);

// Oscillating parameters in the user-facing form: theta_s, kappa2_s, theta_z,
// kappa2_z, tau2 (or "unit"), and u or volume_fraction, plus optional sigma.
OscParams read_params(ConfigReader r, Model const& model);
json params_json(OscParams const& p);

// Filter size: "none" -> 0, 3, 5 or "auto" (from kappa_s and the voxel size).
int read_filter_size(ConfigReader& r, std::string const& key, std::string const& fallback);
int resolve_filter_size(int configured, double kappa_s, double spacing);

struct SimulatedStructure {
  GrayVolume latent;
  BinaryVolume y;
  BinaryVolume filtered;  // empty when no filter
};

// Draws w from the prior and thresholds it; streams "<name>-w" and
// "<name>-y" with index k.
SimulatedStructure simulate_structure(Model const& model, OscParams const& p, VoxelSize const& voxel_size,
                                      std::uint64_t seed, std::string const& name, std::size_t k,
                                      int filter_size, std::optional<double> target_vf);

void write_json(std::filesystem::path const& path, json const& j);
json read_json(std::filesystem::path const& path);
// Fixed-precision decimal, independent of the locale.
std::string format_double(double v, int digits);
// 17 significant digits; reads back to the same double.
std::string format_exact(double v);
// "mean (sd)" with three decimals.
std::string mean_sd_cell(std::vector<double> const& values);

}  // namespace porogen::cli
