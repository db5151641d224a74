#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace porogen {

// out = Op(in)
using LinearMap = std::function<void(std::span<double const>, std::span<double>)>;

struct PcgOptions {
  double tol = 1e-8;
  // 0 selects the default cap of 10 * sqrt(n).
  std::size_t max_iter = 0;
};

struct PcgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  // Relative residual ||b - A x|| / ||b|| at exit.
  double residual = 0.0;
};

std::size_t default_max_iter(std::size_t n);

// Preconditioned conjugate gradients. Deterministic for fixed inputs.
// Throws ConvergenceFailure (carrying the best iterate) when the cap is hit and
// NumericalBreakdown on NaN/Inf or a non-positive curvature step.
PcgResult pcg(LinearMap const& apply_system, LinearMap const& apply_precond_inverse,
              std::span<double const> b, PcgOptions const& options = {},
              std::span<double const> x0 = {});

}  // namespace porogen
