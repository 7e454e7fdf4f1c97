// Independent reference computations shared by the test suites.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace oracle {

inline constexpr long double kEulerGamma = 0.577215664901532860606512090082402431L;

// psi(z) = -gamma + sum_{n>=0} (1/(n+1) - 1/(n+z)); the tail beyond N terms is
// psi(N+z) - psi(N+1), taken from the leading asymptotic expansion.
inline std::complex<double> digamma_series(std::complex<double> z, long n_terms = 10'000'000) {
    using C = std::complex<long double>;
    const C zz(z.real(), z.imag());
    C sum = 0.0L;
    for (long n = n_terms - 1; n >= 0; --n) sum += 1.0L / (n + 1.0L) - 1.0L / (static_cast<long double>(n) + zz);
    const long double N = static_cast<long double>(n_terms);
    const C tail = std::log((N + zz) / (N + 1.0L)) - 0.5L / (N + zz) + 0.5L / (N + 1.0L);
    const C r = -kEulerGamma + sum + tail;
    return {static_cast<double>(r.real()), static_cast<double>(r.imag())};
}

// Re psi(i y) = -gamma + y^2 sum_{n>=1} 1 / (n (n^2 + y^2)), tail ~ y^2 / (2 N^2).
inline double re_digamma_imag(double y, long n_terms = 10'000'000) {
    const long double yy = static_cast<long double>(y) * y;
    long double sum = 0.0L;
    for (long n = n_terms; n >= 1; --n) {
        const long double k = static_cast<long double>(n);
        sum += 1.0L / (k * (k * k + yy));
    }
    const long double N = static_cast<long double>(n_terms);
    sum += 1.0L / (2.0L * N * N);
    return static_cast<double>(-kEulerGamma + yy * sum);
}

// Classic fourth-order Runge–Kutta with a fixed step.
template <class F, class V>
V rk4(F&& f, V y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    double t = t0;
    for (int i = 0; i < steps; ++i) {
        const V k1 = f(t, y);
        V tmp = y;
        for (std::size_t j = 0; j < y.size(); ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
        const V k2 = f(t + 0.5 * h, tmp);
        for (std::size_t j = 0; j < y.size(); ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
        const V k3 = f(t + 0.5 * h, tmp);
        for (std::size_t j = 0; j < y.size(); ++j) tmp[j] = y[j] + h * k3[j];
        const V k4 = f(t + h, tmp);
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        t += h;
    }
    return y;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace oracle
