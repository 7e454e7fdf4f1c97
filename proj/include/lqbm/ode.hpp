// ode.hpp: adaptive Dormand–Prince 5(4) integrator with PI step control
//
// Steps are clipped so that every requested output time is hit exactly;
// no dense output is used. Failures are reported, not thrown, so callers can
// keep the partial trajectory.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "lqbm/error.hpp"

namespace lqbm {

template <std::size_t N>
using Vec = std::array<double, N>;

struct OdeOptions {
    double rtol{1e-9};
    double atol{1e-9};
    double h_init{0.0};  // 0 picks a starting step automatically
    double h_max{std::numeric_limits<double>::infinity()};
    std::size_t max_steps{20'000'000};
};

struct OdeOutcome {
    Reason reason{Reason::None};
    double t_reached{0.0};
    std::size_t accepted{0};
    std::size_t rejected{0};
    std::string message;

    bool ok() const { return reason == Reason::None; }
};

namespace detail {

// Dormand–Prince tableau
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// error weights b - b*
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

template <std::size_t N>
double error_norm(const Vec<N>& err, const Vec<N>& y0, const Vec<N>& y1, const OdeOptions& o) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = err[i] / sc;
        s += q * q;
    }
    return std::sqrt(s / static_cast<double>(N));
}

template <std::size_t N>
bool all_finite(const Vec<N>& y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

} // namespace detail

// Integrates y' = f(t, y) from t0 through every time in `outputs` (ascending,
// each >= t0). `on_output(t, y)` fires at each output time. `on_step(t, y)`
// fires after each accepted step and may return a Reason other than None to
// stop the run (used for blow-up and state-collapse guards).
template <std::size_t N, class F, class Out, class Guard>
OdeOutcome integrate(F&& f, Vec<N> y, double t0, std::span<const double> outputs,
                     const OdeOptions& opt, Out&& on_output, Guard&& on_step) {
    using namespace detail;
    OdeOutcome res;
    res.t_reached = t0;
    if (outputs.empty()) return res;
    if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw validation_error("integrate: tolerances must be > 0");

    double t = t0;
    Vec<N> k1 = f(t, y);
    if (!all_finite(k1) || !all_finite(y)) {
        res.reason = Reason::NonFinite;
        res.message = "non-finite initial state or derivative";
        return res;
    }

    const double span = outputs.back() - t0;
    double h = opt.h_init;
    if (h <= 0.0) {
        // Hairer's two-norm heuristic for the first step
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt.atol + opt.rtol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / N);
        d1 = std::sqrt(d1 / N);
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, std::max(span, 1e-12) * 0.1);
    }
    h = std::min(h, opt.h_max);

    double err_old = 1e-4;
    std::size_t next = 0;
    while (next < outputs.size() && outputs[next] <= t) {
        on_output(outputs[next], y);
        ++next;
    }

    Vec<N> yt, k2, k3, k4, k5, k6, k7, y1, err;
    while (next < outputs.size()) {
        if (res.accepted + res.rejected >= opt.max_steps) {
            res.reason = Reason::StiffnessFailure;
            res.message = "step budget exhausted";
            return res;
        }
        const double target = outputs[next];
        bool clipped = false;
        double hs = h;
        if (t + hs >= target) {
            hs = target - t;
            clipped = true;
        }
        if (hs < 1e-14 * std::max(1.0, std::abs(t))) {
            res.reason = Reason::StiffnessFailure;
            res.message = "step size underflow at t = " + std::to_string(t);
            return res;
        }

        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * a21 * k1[i];
        k2 = f(t + c2 * hs, yt);
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
        k3 = f(t + c3 * hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = f(t + c4 * hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = f(t + c5 * hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = f(t + hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            y1[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        k7 = f(t + hs, y1);
        for (std::size_t i = 0; i < N; ++i)
            err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

        double en = error_norm(err, y, y1, opt);
        if (!std::isfinite(en) || !all_finite(y1) || !all_finite(k7)) en = 1e10;

        if (en <= 1.0) {
            t = clipped ? target : t + hs;
            y = y1;
            k1 = k7;
            ++res.accepted;
            res.t_reached = t;
            const double fac11 = std::pow(en, 0.17);
            double fac = fac11 / std::pow(err_old, 0.04);
            fac = std::clamp(fac / 0.9, 0.2, 10.0);
            // a clipped step says nothing about the natural step size
            if (!clipped) h = hs / fac;
            h = std::min(h, opt.h_max);
            err_old = std::max(en, 1e-4);

            while (next < outputs.size() && outputs[next] <= t) {
                on_output(outputs[next], y);
                ++next;
            }
            const Reason stop = on_step(t, y);
            if (stop != Reason::None) {
                res.reason = stop;
                res.message = "stopped by guard at t = " + std::to_string(t);
                return res;
            }
        } else {
            ++res.rejected;
            const double fac = std::clamp(std::pow(en, 0.2) / 0.9, 1.0, 10.0);
            h = hs / fac;
        }
    }
    return res;
}

template <std::size_t N, class F, class Out>
OdeOutcome integrate(F&& f, const Vec<N>& y, double t0, std::span<const double> outputs,
                     const OdeOptions& opt, Out&& on_output) {
    return integrate<N>(std::forward<F>(f), y, t0, outputs, opt, std::forward<Out>(on_output),
                        [](double, const Vec<N>&) { return Reason::None; });
}

} // namespace lqbm
