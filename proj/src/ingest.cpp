#include "porogen/ingest.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace porogen {

namespace {

// Intensities closer than this (relative to the layer's scale) count as equal.
constexpr double kRelTol = 1e-12;

}  // namespace

void DepthThresholdSpec::validate() const {
  if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("depth threshold quantile must lie in (0,1)");
  if (poly_degree < 0 || poly_degree > 6) throw ConfigError("depth threshold poly_degree must lie in [0,6]");
}

double DepthThresholdFit::threshold(double z) const {
  double t = 0.0;
  for (std::size_t k = coefficients.size(); k-- > 0;) t = t * z + coefficients[k];
  return t;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DimensionError("quantile of an empty set");
  auto const n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * double(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(rank - 1), values.end());
  return values[rank - 1];
}

DepthThresholdFit depth_threshold_fit(GrayVolume const& g, DepthThresholdSpec const& spec) {
  spec.validate();
  std::size_t const nz = g.nz();
  std::size_t const ncoef = std::size_t(spec.poly_degree) + 1;
  if (nz < ncoef) throw DimensionError("depth_threshold: need at least poly_degree + 1 layers");
  std::size_t const layer = g.nx() * g.ny();
  if (layer == 0) throw DimensionError("depth_threshold: empty layers");

  DepthThresholdFit fit;
  fit.layer_quantiles.resize(nz);
  fit.constant_layer.resize(nz);
  std::vector<double> values(layer);
  for (std::size_t z = 0; z < nz; ++z) {
    std::copy_n(g.data().begin() + std::ptrdiff_t(z * layer), layer, values.begin());
    auto const [lo, hi] = std::minmax_element(values.begin(), values.end());
    double const scale = std::max(std::abs(*lo), std::abs(*hi));
    fit.constant_layer[z] = *hi - *lo <= kRelTol * scale;
    fit.layer_quantiles[z] = nearest_rank_quantile(values, spec.quantile);
  }
  // Drop degenerate layers only when enough informative ones remain.
  std::size_t const informative = std::size_t(std::count(fit.constant_layer.begin(), fit.constant_layer.end(), false));
  fit.used_in_fit.assign(nz, true);
  if (informative >= std::max<std::size_t>(ncoef, 3)) {
    for (std::size_t z = 0; z < nz; ++z) fit.used_in_fit[z] = !fit.constant_layer[z];
  }
  std::size_t const rows = std::size_t(std::count(fit.used_in_fit.begin(), fit.used_in_fit.end(), true));
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ncoef));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
  for (std::size_t z = 0, r = 0; z < nz; ++z) {
    if (!fit.used_in_fit[z]) continue;
    double p = 1.0;
    for (std::size_t k = 0; k < ncoef; ++k, p *= double(z)) design(Eigen::Index(r), Eigen::Index(k)) = p;
    rhs(Eigen::Index(r)) = fit.layer_quantiles[z];
    ++r;
  }
  Eigen::VectorXd const coef = design.colPivHouseholderQr().solve(rhs);
  fit.coefficients.assign(coef.data(), coef.data() + coef.size());

  fit.volume = BinaryVolume(g.dims(), 0, g.voxel_size());
  for (std::size_t z = 0; z < nz; ++z) {
    double const t = fit.threshold(double(z));
    double const slack = kRelTol * std::abs(t);
    for (std::size_t i = 0; i < layer; ++i) {
      std::size_t const idx = z * layer + i;
      fit.volume[idx] = g[idx] >= t - slack ? 1 : 0;
    }
  }
  return fit;
}

BinaryVolume depth_threshold(GrayVolume const& g, DepthThresholdSpec const& spec) {
  return depth_threshold_fit(g, spec).volume;
}

}  // namespace porogen
