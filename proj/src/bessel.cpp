#include "porogen/bessel.hpp"

#include <cmath>
#include <numbers>

namespace porogen {

namespace {

constexpr double kSwitchModulus = 12.0;

std::complex<double> k0_series(std::complex<double> z) {
  std::complex<double> const q = 0.25 * z * z;
  std::complex<double> term = 1.0;  // (z^2/4)^k / (k!)^2
  std::complex<double> i0 = 1.0;
  std::complex<double> tail = 0.0;
  double harmonic = 0.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (double(k) * double(k));
    harmonic += 1.0 / k;
    i0 += term;
    tail += term * harmonic;
    if (std::abs(term) * (1.0 + harmonic) < 1e-18 * std::abs(i0)) break;
  }
  return -(std::log(0.5 * z) + std::numbers::egamma) * i0 + tail;
}

std::complex<double> k0_asymptotic(std::complex<double> z) {
  std::complex<double> sum = 1.0;
  std::complex<double> term = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    double const a = double(2 * k - 1);
    std::complex<double> next = term * (-(a * a)) / (8.0 * k * z);
    double const mag = std::abs(next);
    if (mag >= prev) break;
    term = next;
    sum += term;
    prev = mag;
    if (mag < 1e-17) break;
  }
  return std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * sum;
}

}  // namespace

std::complex<double> bessel_k0(std::complex<double> z) {
  return std::abs(z) <= kSwitchModulus ? k0_series(z) : k0_asymptotic(z);
}

}  // namespace porogen
