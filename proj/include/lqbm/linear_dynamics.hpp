// linear_dynamics.hpp: moment dynamics of the linear-coupling Lindblad equation
//
// Second moments are central and carried as (dx2, dp2, rho) with
//   dx2 = 2 <X^2>,  dp2 = 2 <P^2>,  rho = -<XP>_sym / (sigma_X sigma_P).
// Internally the ODEs are written for (<X>, <P>, <X^2>, <XP>_sym, <P^2>),
// where they are linear:
//   d<X>/dt    = <P> - r G <X>
//   d<P>/dt    = -<X> - (2 - r) G <P>
//   d<X^2>/dt  = -2 r G <X^2> + 2 <XP> + D_PP
//   d<XP>/dt   = <P^2> - <X^2> - 2 G <XP> - D_XP
//   d<P^2>/dt  = -2 <XP> - (4 - 2r) G <P^2> + D_XX

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "lqbm/coefficients.hpp"
#include "lqbm/error.hpp"
#include "lqbm/ode.hpp"

namespace lqbm {

struct FirstMoments {
    double x{0.0};
    double p{0.0};
};

struct GaussianState {
    double dx2{1.0};
    double dp2{1.0};
    double rho{0.0};

    double hup_product() const { return std::sqrt(dx2 * dp2); }
    // Robertson–Schrödinger in adimensional form
    double rs_determinant() const { return dx2 * dp2 * (1.0 - rho * rho); }
    bool physical(double slack = 1e-9) const {
        return dx2 > 0.0 && dp2 > 0.0 && std::abs(rho) <= 1.0 && rs_determinant() >= 1.0 - slack;
    }
};

// Symmetric-ordered central second moments.
struct SecondMoments {
    double xx{0.5};
    double xp{0.0};
    double pp{0.5};
};

inline SecondMoments to_moments(const GaussianState& s) {
    return {0.5 * s.dx2, -0.5 * s.rho * std::sqrt(s.dx2 * s.dp2), 0.5 * s.dp2};
}

inline GaussianState to_gaussian(const SecondMoments& m) {
    GaussianState s{2.0 * m.xx, 2.0 * m.pp, 0.0};
    const double den = std::sqrt(s.dx2 * s.dp2);
    if (den > 0.0) s.rho = -2.0 * m.xp / den;
    return s;
}

struct MomentRates {
    double dx{};    // d<X>/dt
    double dp{};    // d<P>/dt
    double ddx2{};  // d(dx2)/dt
    double ddp2{};  // d(dp2)/dt
    double drho{};  // d(rho)/dt
};

struct MomentTrajectory {
    std::vector<double> times;
    std::vector<FirstMoments> first;
    std::vector<GaussianState> second;
};

// ---- first moments ---------------------------------------------------------

// Renormalized trap frequency of the kinetic-momentum oscillator equation
// x'' + 2 G x' + w^2 x = 0.
inline double effective_frequency(double gamma, double r) {
    return std::sqrt(1.0 - r * (r - 2.0) * gamma * gamma);
}

namespace detail {

// cos(b t) and sin(b t)/b for b = sqrt(arg); the overdamped branch (arg < 0)
// continues to cosh and sinh/|b|.
inline std::pair<double, double> osc_pair(double arg, double t) {
    if (arg > 0.0) {
        const double b = std::sqrt(arg);
        return {std::cos(b * t), std::sin(b * t) / b};
    }
    if (arg < 0.0) {
        const double b = std::sqrt(-arg);
        return {std::cosh(b * t), std::sinh(b * t) / b};
    }
    return {1.0, t};
}

} // namespace detail

inline FirstMoments first_moments_analytic(double t, double x0, double p0, double gamma, double r) {
    if (t < 0.0) throw validation_error("first_moments_analytic: t must be >= 0");
    const double k = (1.0 - r) * gamma;
    const auto [cs, sn] = detail::osc_pair(1.0 - k * k, t);
    const double env = std::exp(-gamma * t);
    return {env * (x0 * cs + (p0 + k * x0) * sn), env * (p0 * cs - (x0 + k * p0) * sn)};
}

// ---- generator-level moment equations --------------------------------------

inline Vec<5> raw_moment_rhs(const Vec<5>& m, const LinearLmeCoefficients& c, double r) {
    const double G = c.gamma;
    return {
        m[1] - r * G * m[0],
        -m[0] - (2.0 - r) * G * m[1],
        -2.0 * r * G * m[2] + 2.0 * m[3] + c.d_pp,
        m[4] - m[2] - 2.0 * G * m[3] - c.d_xp,
        -2.0 * m[3] - (4.0 - 2.0 * r) * G * m[4] + c.d_xx,
    };
}

inline Vec<5> pack(const FirstMoments& f, const GaussianState& s) {
    const SecondMoments m = to_moments(s);
    return {f.x, f.p, m.xx, m.xp, m.pp};
}

inline void unpack(const Vec<5>& v, FirstMoments& f, GaussianState& s) {
    f = {v[0], v[1]};
    s = to_gaussian({v[2], v[3], v[4]});
}

inline MomentRates moment_ode_rhs(const FirstMoments& f, const GaussianState& s,
                                  const LinearLmeCoefficients& c, double r) {
    if (!(s.dx2 > 0.0) || !(s.dp2 > 0.0)) throw validation_error("moment_ode_rhs: dx2 and dp2 must be > 0");
    const Vec<5> d = raw_moment_rhs(pack(f, s), c, r);
    MomentRates out;
    out.dx = d[0];
    out.dp = d[1];
    out.ddx2 = 2.0 * d[2];
    out.ddp2 = 2.0 * d[4];
    // rho = -2 <XP> / sqrt(dx2 dp2)
    const double root = std::sqrt(s.dx2 * s.dp2);
    out.drho = -2.0 * d[3] / root - 0.5 * s.rho * (out.ddx2 / s.dx2 + out.ddp2 / s.dp2);
    return out;
}

// ---- time integration ------------------------------------------------------

inline std::vector<double> uniform_times(double t_max, std::size_t samples) {
    if (samples < 2) return {t_max};
    std::vector<double> ts(samples);
    for (std::size_t i = 0; i < samples; ++i)
        ts[i] = t_max * static_cast<double>(i) / static_cast<double>(samples - 1);
    ts.back() = t_max;
    return ts;
}

inline MomentTrajectory evolve_moments(const FirstMoments& init_f, const GaussianState& init_s,
                                       const LinearLmeCoefficients& c, double r, double t_max,
                                       double tol, std::vector<double> times = {}) {
    if (!(t_max > 0.0)) throw validation_error("evolve_moments: t_max must be > 0");
    if (!(tol > 0.0)) throw validation_error("evolve_moments: tol must be > 0");
    if (!(init_s.dx2 > 0.0) || !(init_s.dp2 > 0.0) || std::abs(init_s.rho) > 1.0)
        throw validation_error("evolve_moments: initial Gaussian state is not valid");
    if (times.empty()) times = uniform_times(t_max, 201);
    if (!std::is_sorted(times.begin(), times.end()) ||
        std::adjacent_find(times.begin(), times.end()) != times.end() || times.front() < 0.0)
        throw validation_error("evolve_moments: output times must be strictly increasing and >= 0");

    MomentTrajectory traj;
    traj.times.reserve(times.size());
    OdeOptions opt;
    opt.rtol = tol;
    opt.atol = tol;
    const auto rhs = [&](double, const Vec<5>& m) { return raw_moment_rhs(m, c, r); };
    const auto out = [&](double t, const Vec<5>& m) {
        FirstMoments f;
        GaussianState s;
        unpack(m, f, s);
        traj.times.push_back(t);
        traj.first.push_back(f);
        traj.second.push_back(s);
    };
    const OdeOutcome res = integrate<5>(rhs, pack(init_f, init_s), 0.0, times, opt, out);
    if (!res.ok()) throw numerical_error(res.reason, "evolve_moments: " + res.message);
    return traj;
}

// Integrates in windows of 10/Gamma until the relative change of every second
// moment over one window drops below `rel_change`.
struct StationaryRun {
    GaussianState state;
    double t_reached{};
    bool converged{};
};

inline StationaryRun evolve_to_stationary(const LinearLmeCoefficients& c, double r, double tol = 1e-12,
                                          double rel_change = 1e-10, std::size_t max_windows = 200) {
    if (!(c.gamma > 0.0)) throw validation_error("evolve_to_stationary: Gamma must be > 0");
    const double window = 10.0 / c.gamma;
    Vec<5> m = pack({}, GaussianState{});
    OdeOptions opt;
    opt.rtol = tol;
    opt.atol = tol;
    const auto rhs = [&](double, const Vec<5>& v) { return raw_moment_rhs(v, c, r); };
    StationaryRun run;
    double t = 0.0;
    for (std::size_t w = 0; w < max_windows; ++w) {
        const Vec<5> prev = m;
        const std::array<double, 1> tout{t + window};
        const OdeOutcome res =
            integrate<5>(rhs, m, t, tout, opt, [&](double, const Vec<5>& v) { m = v; });
        if (!res.ok()) throw numerical_error(res.reason, "evolve_to_stationary: " + res.message);
        t += window;
        const double scale = std::sqrt(std::abs(m[2] * m[4]));
        const double change = std::max({std::abs(m[2] - prev[2]) / std::abs(m[2]),
                                        std::abs(m[4] - prev[4]) / std::abs(m[4]),
                                        std::abs(m[3] - prev[3]) / scale});
        if (change < rel_change) {
            run.converged = true;
            break;
        }
    }
    run.t_reached = t;
    run.state = to_gaussian({m[2], m[3], m[4]});
    return run;
}

// ---- stationary states -----------------------------------------------------

// Closed form for r = 0; a non-positive variance is returned as computed
// (only the BMME variant can produce one).
inline GaussianState stationary_from_closed_form(double gamma, double d_xx, double d_xp, double d_pp) {
    if (!(gamma > 0.0)) throw validation_error("stationary state requires Gamma > 0");
    const double sx2 = (d_xx - 4.0 * gamma * d_xp + (4.0 * gamma * gamma + 1.0) * d_pp) / (4.0 * gamma);
    const double sp2 = (d_xx + d_pp) / (4.0 * gamma);
    GaussianState s{2.0 * sx2, 2.0 * sp2, 0.0};
    if (d_pp != 0.0) s.rho = 0.5 * d_pp / std::sqrt(sx2 * sp2);
    return s;
}

inline GaussianState stationary_gaussian(const LinearLmeCoefficients& c) {
    return stationary_from_closed_form(c.gamma, c.d_xx, c.d_xp, c.d_pp);
}

struct BmmeStationary {
    GaussianState state;
    bool hup_violation{};  // dx2 dp2 < 1, or a variance that is not positive
};

inline BmmeStationary bmme_stationary(const LinearLmeCoefficients& c) {
    BmmeStationary out;
    out.state = stationary_from_closed_form(c.gamma, c.d_xx, c.d_xp, 0.0);
    const GaussianState& s = out.state;
    out.hup_violation = !(s.dx2 > 0.0 && s.dp2 > 0.0 && s.dx2 * s.dp2 >= 1.0);
    return out;
}

// Checks a trajectory against the kinetic-momentum picture: x' = P~ with
// P~ = <P> - r G <X>, and x'' + 2 G x' + w_eff^2 x = 0. The second-order
// equation is solved in closed form from the trajectory's own initial data,
// so the residual measures how well the integrated flow obeys it.
inline double kinetic_momentum_check(const MomentTrajectory& traj, const LinearLmeCoefficients& c, double r) {
    if (traj.times.empty()) return 0.0;
    const double G = c.gamma;
    const double w = effective_frequency(G, r);
    const double t0 = traj.times.front();
    const double x0 = traj.first.front().x;
    const double v0 = traj.first.front().p - r * G * x0;  // kinetic momentum
    const double scale = std::max({std::abs(x0), std::abs(v0), 1e-300});
    const double disc = w * w - G * G;
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i] - t0;
        const auto [cs, sn] = detail::osc_pair(disc, t);
        const double env = std::exp(-G * t);
        const double x = env * (x0 * cs + (v0 + G * x0) * sn);
        // derivative of the closed form
        const double v = env * (v0 * cs - (G * v0 + w * w * x0) * sn);
        const double px = traj.first[i].p - r * G * traj.first[i].x;
        worst = std::max({worst, std::abs(traj.first[i].x - x) / scale, std::abs(px - v) / scale});
    }
    return worst;
}

} // namespace lqbm
