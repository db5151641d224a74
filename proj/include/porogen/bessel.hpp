#pragma once

#include <complex>

namespace porogen {

// Modified Bessel function of the second kind, order zero, for complex
// arguments with Re z > 0 (|arg z| < pi/2). Ascending series for |z| <= 12,
// optimally truncated asymptotic expansion beyond.
std::complex<double> bessel_k0(std::complex<double> z);

}  // namespace porogen
