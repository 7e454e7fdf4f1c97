// phase_space.hpp: diagnostics of a Gaussian Wigner function
//
// Covariance in adimensional form: [[dx2, -rho dx dp], [-rho dx dp, dp2]].

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>

#include "lqbm/coefficients.hpp"
#include "lqbm/error.hpp"
#include "lqbm/linear_dynamics.hpp"

namespace lqbm {

struct PrincipalAxes {
    double dl2{};
    double dL2{};
    std::optional<double> theta;  // empty for an isotropic state
};

inline PrincipalAxes principal_axes(const GaussianState& s) {
    if (!(s.dx2 > 0.0) || !(s.dp2 > 0.0) || !(std::abs(s.rho) <= 1.0))
        throw validation_error("principal_axes: state needs dx2 > 0, dp2 > 0, |rho| <= 1");
    const double a = s.dx2;
    const double c = s.dp2;
    const double b = -s.rho * std::sqrt(a * c);
    const double disc = std::hypot(a - c, 2.0 * b);
    PrincipalAxes out;
    out.dL2 = 0.5 * (a + c + disc);
    // det / dL2 avoids the cancellation in (a + c - disc)
    out.dl2 = (a * c - b * b) / out.dL2;
    if (disc > 1e-14 * (a + c)) {
        double th = 0.5 * std::atan2(2.0 * b, a - c);
        if (th <= 0.0) th += std::numbers::pi;
        out.theta = th;
    }
    return out;
}

inline double eccentricity(double dl2, double dL2) {
    if (!(dl2 > 0.0) || !(dL2 >= dl2)) throw validation_error("eccentricity: need 0 < dl2 <= dL2");
    return std::sqrt(1.0 - dl2 / dL2);
}

struct CoolingResult {
    double chi{};
    bool zero_temperature{};  // tau = 0, coth replaced by its limit 1
};

inline CoolingResult cooling_parameter(double dl2, double dL2, double tau) {
    if (tau < 0.0) throw validation_error("cooling_parameter: tau must be >= 0");
    return {std::sqrt(dl2 * dL2) / thermal_factor(tau), tau == 0.0};
}

// Limit T -> 0 followed by gamma -> 0 of dx dp = dl dL.
inline double zero_temperature_product(double lam) {
    if (!(lam > 0.0)) throw validation_error("zero_temperature_product: lam must be > 0");
    const double l = std::log(lam);
    return 1.25 + l * l / (std::numbers::pi * std::numbers::pi);
}

struct PhaseSpaceDiagnostics {
    double dx2{};
    double dp2{};
    double rho{};
    double dl2{};
    double dL2{};
    double eta{};
    std::optional<double> theta;
    double chi{};
    double hup_product{};
    bool genuine_squeezing{};
    bool cooled{};
    bool zero_temperature{};
};

inline PhaseSpaceDiagnostics diagnose(const GaussianState& s, double tau) {
    const PrincipalAxes ax = principal_axes(s);
    PhaseSpaceDiagnostics d;
    d.dx2 = s.dx2;
    d.dp2 = s.dp2;
    d.rho = s.rho;
    d.dl2 = ax.dl2;
    d.dL2 = ax.dL2;
    d.eta = eccentricity(ax.dl2, ax.dL2);
    d.theta = ax.theta;
    const CoolingResult cr = cooling_parameter(ax.dl2, ax.dL2, tau);
    d.chi = cr.chi;
    d.zero_temperature = cr.zero_temperature;
    d.hup_product = s.hup_product();
    d.genuine_squeezing = ax.dl2 < 1.0;
    d.cooled = cr.chi < 1.0;
    return d;
}

// Stationary linear-coupling state at p and its diagnostics.
inline PhaseSpaceDiagnostics stationary_diagnostics(const ModelParams& p) {
    return diagnose(stationary_gaussian(linear_lme_coefficients(p)), p.tau);
}

enum class MinQuantity { Dl2, Chi };

struct MinResult {
    double value{};
    double tau{};
};

namespace detail {

inline double quantity_at(MinQuantity q, double g, double lam, double tau) {
    const PhaseSpaceDiagnostics d = stationary_diagnostics({g, lam, tau, 0.0});
    const double v = q == MinQuantity::Dl2 ? d.dl2 : d.chi;
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "min_over_temperature: non-finite value at (g=" << g << ", lam=" << lam << ", tau=" << tau << ")";
        throw numerical_error(Reason::NonFinite, os.str());
    }
    return v;
}

} // namespace detail

// Grid scan over tau followed by golden-section refinement around the grid
// argmin, in log tau when the bracket is strictly positive.
inline MinResult min_over_temperature(MinQuantity q, double g, double lam, std::span<const double> tau_grid,
                                      double rel_tol = 1e-4) {
    if (tau_grid.empty()) throw validation_error("min_over_temperature: empty tau grid");
    for (std::size_t i = 1; i < tau_grid.size(); ++i)
        if (!(tau_grid[i] > tau_grid[i - 1])) throw validation_error("min_over_temperature: tau grid must ascend");

    std::size_t best = 0;
    double best_v = detail::quantity_at(q, g, lam, tau_grid[0]);
    for (std::size_t i = 1; i < tau_grid.size(); ++i) {
        const double v = detail::quantity_at(q, g, lam, tau_grid[i]);
        if (v < best_v) {
            best_v = v;
            best = i;
        }
    }
    if (tau_grid.size() < 2) return {best_v, tau_grid[best]};

    const double lo = tau_grid[best == 0 ? 0 : best - 1];
    const double hi = tau_grid[std::min(best + 1, tau_grid.size() - 1)];
    const bool logscale = lo > 0.0;
    const auto to_u = [&](double t) { return logscale ? std::log(t) : t; };
    const auto from_u = [&](double u) { return logscale ? std::exp(u) : u; };
    const auto f = [&](double u) { return detail::quantity_at(q, g, lam, from_u(u)); };

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = to_u(lo), b = to_u(hi);
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200; ++it) {
        const double width = std::abs(from_u(b) - from_u(a));
        if (width <= rel_tol * std::max(std::abs(from_u(0.5 * (a + b))), 1e-300)) break;
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    MinResult r{best_v, tau_grid[best]};
    const double um = 0.5 * (a + b);
    const double fm = f(um);
    if (fm < r.value) r = {fm, from_u(um)};
    if (f1 < r.value) r = {f1, from_u(x1)};
    if (f2 < r.value) r = {f2, from_u(x2)};
    return r;
}

} // namespace lqbm
