#pragma once

#include <array>
#include <vector>

#include "porogen/error.hpp"
#include "porogen/volume.hpp"

namespace porogen {

struct DepthThresholdSpec {
  double quantile = 0.7;
  int poly_degree = 2;

  void validate() const;
};

struct DepthThresholdFit {
  BinaryVolume volume;
  // t(z) = sum_k coefficients[k] * z^k, z the layer index.
  std::vector<double> coefficients;
  std::vector<double> layer_quantiles;
  // Layers whose intensities are all equal (degenerate quantile).
  std::vector<bool> constant_layer;
  // Layers that took part in the least-squares fit.
  std::vector<bool> used_in_fit;

  double threshold(double z) const;
};

// Nearest-rank quantile: the ceil(q n)-th smallest value (1-based).
double nearest_rank_quantile(std::vector<double> values, double q);

DepthThresholdFit depth_threshold_fit(GrayVolume const& g, DepthThresholdSpec const& spec);
BinaryVolume depth_threshold(GrayVolume const& g, DepthThresholdSpec const& spec);

// Strided crop; voxel_size scaled by the stride.
template <class T>
Volume<T> extract_window(Volume<T> const& v, std::array<std::size_t, 3> origin, Dims dims,
                         std::array<std::size_t, 3> stride = {1, 1, 1}) {
  for (int a = 0; a < 3; ++a) {
    if (stride[a] == 0) throw ConfigError("extract_window: stride must be positive");
    if (dims[a] == 0) throw ConfigError("extract_window: window dims must be positive");
    if (origin[a] >= v.dims()[a] || origin[a] + (dims[a] - 1) * stride[a] >= v.dims()[a]) {
      throw OutOfBounds("extract_window: window exceeds the volume");
    }
  }
  auto vs = v.voxel_size();
  for (int a = 0; a < 3; ++a) vs[a] *= double(stride[a]);
  Volume<T> out(dims, T{}, vs);
  for (std::size_t z = 0; z < dims[2]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[0]; ++x)
        out(x, y, z) = v(origin[0] + x * stride[0], origin[1] + y * stride[1], origin[2] + z * stride[2]);
  return out;
}

}  // namespace porogen
