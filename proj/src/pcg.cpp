#include "porogen/pcg.hpp"

#include <algorithm>
#include <cmath>

#include "porogen/error.hpp"
#include "porogen/sparse.hpp"

namespace porogen {

std::size_t default_max_iter(std::size_t n) {
  return std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(10.0 * std::sqrt(double(n)))));
}

PcgResult pcg(LinearMap const& apply_system, LinearMap const& apply_precond_inverse,
              std::span<double const> b, PcgOptions const& options, std::span<double const> x0) {
  if (!(options.tol > 0.0)) throw ConfigError("pcg: tol must be positive");
  std::size_t const n = b.size();
  std::size_t const max_iter = options.max_iter ? options.max_iter : default_max_iter(n);

  PcgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) {
    if (x0.size() != n) throw DimensionError("pcg: initial guess has wrong length");
    res.x.assign(x0.begin(), x0.end());
  }
  double const bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    return res;
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  if (x0.empty()) {
    r.assign(b.begin(), b.end());
  } else {
    apply_system(res.x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  }
  double rnorm = norm2(r);
  res.residual = rnorm / bnorm;
  if (res.residual <= options.tol) return res;

  apply_precond_inverse(r, z);
  p = z;
  double rz = dot(r, z);
  std::vector<double> best = res.x;
  double best_res = res.residual;

  for (std::size_t k = 1; k <= max_iter; ++k) {
    apply_system(p, ap);
    double const pap = dot(p, ap);
    if (!std::isfinite(pap) || !std::isfinite(rz)) throw NumericalBreakdown("pcg: non-finite value");
    if (pap <= 0.0) throw NumericalBreakdown("pcg: operator is not positive definite");
    double const alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    rnorm = norm2(r);
    res.iterations = k;
    res.residual = rnorm / bnorm;
    if (!std::isfinite(res.residual)) throw NumericalBreakdown("pcg: non-finite residual");
    if (res.residual <= options.tol) return res;
    if (res.residual < best_res) {
      best_res = res.residual;
      best = res.x;
    }
    apply_precond_inverse(r, z);
    double const rz_new = dot(r, z);
    double const beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw ConvergenceFailure("pcg: iteration cap reached", std::move(best), max_iter, best_res);
}

}  // namespace porogen
