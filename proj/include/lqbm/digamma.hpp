// digamma.hpp: complex digamma function psi(z)
//
// Upward recurrence psi(z) = psi(z+1) - 1/z until Re z >= 10, then the
// asymptotic expansion
//   psi(z) ~ ln z - 1/(2z) - sum_{k=1}^{8} B_{2k} / (2k z^{2k}).
// Arguments far out on the negative half-plane are first reflected with
// psi(z) = psi(1-z) - pi cot(pi z) so the recurrence stays short.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "lqbm/error.hpp"

namespace lqbm {

namespace detail {

// B_{2k} / (2k) for k = 1..8
inline constexpr std::array<double, 8> kDigammaSeries = {
    1.0 / 12.0,     -1.0 / 120.0, 1.0 / 252.0,  -1.0 / 240.0,
    1.0 / 132.0,    -691.0 / 32760.0, 1.0 / 12.0, -3617.0 / 8160.0,
};

inline constexpr double kShiftThreshold = 10.0;
inline constexpr double kReflectBelow = -20.0;

inline bool is_pole(std::complex<double> z) {
    return z.imag() == 0.0 && z.real() <= 0.0 && std::floor(z.real()) == z.real();
}

inline std::complex<double> digamma_asymptotic(std::complex<double> z) {
    const std::complex<double> inv = 1.0 / z;
    const std::complex<double> inv2 = inv * inv;
    // Horner in 1/z^2
    std::complex<double> series = 0.0;
    for (auto it = kDigammaSeries.rbegin(); it != kDigammaSeries.rend(); ++it) {
        series = series * inv2 + *it;
    }
    series *= inv2;
    return std::log(z) - 0.5 * inv - series;
}

} // namespace detail

inline std::complex<double> digamma(std::complex<double> z) {
    if (detail::is_pole(z)) {
        std::ostringstream os;
        os << "digamma: pole at z = " << z.real();
        throw Error(ErrorKind::Numerical, Reason::Pole, os.str());
    }
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw numerical_error(Reason::NonFinite, "digamma: non-finite argument");
    }
    if (z.real() < detail::kReflectBelow) {
        const double pi = std::numbers::pi;
        return digamma(1.0 - z) - pi * std::cos(pi * z) / std::sin(pi * z);
    }
    std::complex<double> shift = 0.0;
    while (z.real() < detail::kShiftThreshold) {
        shift += 1.0 / z;
        z += 1.0;
    }
    return detail::digamma_asymptotic(z) - shift;
}

inline double digamma(double x) {
    return digamma(std::complex<double>(x, 0.0)).real();
}

} // namespace lqbm
