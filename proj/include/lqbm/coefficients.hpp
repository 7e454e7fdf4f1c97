// coefficients.hpp: bath model parameters and master-equation coefficients
//
// Everything is in natural units hbar = m = Omega = k_B = 1, so a model is
// fully described by the dimensionless triple (gamma/Omega, Lambda/Omega,
// k_B T / hbar Omega) plus the counter-term weight r.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>

#include "lqbm/digamma.hpp"
#include "lqbm/error.hpp"

namespace lqbm {

struct ModelParams {
    double g{0.1};     // damping ratio gamma / Omega
    double lam{10.0};  // cutoff ratio Lambda / Omega
    double tau{1.0};   // temperature ratio k_B T / (hbar Omega)
    double r{0.0};     // counter-term weight

    // Outside the perturbative regime (gamma <~ Omega) results are still
    // computed but should be read with care.
    bool perturbative_warning() const { return g > 1.0; }
};

inline void validate(const ModelParams& p) {
    std::ostringstream os;
    if (!(p.g > 0.0) || !std::isfinite(p.g)) os << "g must be > 0 (got " << p.g << "); ";
    if (!(p.lam > 0.0) || !std::isfinite(p.lam)) os << "lam must be > 0 (got " << p.lam << "); ";
    if (!(p.tau >= 0.0) || !std::isfinite(p.tau)) os << "tau must be >= 0 (got " << p.tau << "); ";
    if (!std::isfinite(p.r)) os << "r must be finite; ";
    if (std::string m = os.str(); !m.empty()) throw validation_error("ModelParams: " + m.substr(0, m.size() - 2));
}

// coth(1 / (2 tau)); the tau -> 0 limit is 1.
inline double thermal_factor(double tau) {
    if (tau <= 0.0) return 1.0;
    return 1.0 / std::tanh(0.5 / tau);
}

// Lorentz-Drude spectral density J(omega) in natural units.
inline double spectral_density(double omega, const ModelParams& p) {
    if (omega < 0.0) throw validation_error("spectral_density: omega must be >= 0");
    return (p.g / std::numbers::pi) * omega / (1.0 + omega * omega / (p.lam * p.lam));
}

// Coefficients of the Born-Markov master equation.
struct BmmeCoefficients {
    double c_p{};
    double c_x{};
    double d_x{};
    double d_p{};
};

// pi tau / lam + psi(lam / (2 pi tau)) - Re psi(i / (2 pi tau)).
// At tau = 0 the two digamma terms are replaced by their large-argument
// asymptotics, which leaves ln(lam).
inline double momentum_diffusion_bracket(double lam, double tau) {
    if (tau == 0.0) return std::log(lam);
    const double two_pi_tau = 2.0 * std::numbers::pi * tau;
    const double psi_cut = digamma(lam / two_pi_tau);
    const double psi_trap = digamma(std::complex<double>(0.0, 1.0 / two_pi_tau)).real();
    return std::numbers::pi * tau / lam + psi_cut - psi_trap;
}

inline BmmeCoefficients bmme_coefficients(const ModelParams& p) {
    validate(p);
    BmmeCoefficients b;
    b.c_p = 0.5 * p.g * p.lam * p.lam / (1.0 + p.lam * p.lam);
    b.c_x = -p.lam * b.c_p;
    b.d_x = b.c_p * thermal_factor(p.tau);
    b.d_p = (2.0 * b.c_p / std::numbers::pi) * momentum_diffusion_bracket(p.lam, p.tau);
    return b;
}

// Generator coefficients of the linear-coupling Lindblad equation.
struct LinearLmeCoefficients {
    double gamma{};  // damping Gamma
    double d_xx{};
    double d_xp{};
    double d_pp{};
};

inline LinearLmeCoefficients linear_lme_coefficients(const BmmeCoefficients& b) {
    if (!(b.d_x > 0.0)) throw validation_error("linear_lme_coefficients: d_XX = 2 d_x must be > 0");
    LinearLmeCoefficients c;
    c.gamma = b.c_p;
    c.d_xx = 2.0 * b.d_x;
    c.d_xp = b.d_p;
    c.d_pp = (c.gamma * c.gamma + c.d_xp * c.d_xp) / c.d_xx;
    return c;
}

inline LinearLmeCoefficients linear_lme_coefficients(const ModelParams& p) {
    return linear_lme_coefficients(bmme_coefficients(p));
}

// Single Lindblad operator A = alpha X + beta P with alpha > 0, Im beta > 0.
struct LindbladPair {
    double alpha{};
    std::complex<double> beta{};
};

inline LindbladPair lindblad_alpha_beta(const LinearLmeCoefficients& c) {
    if (!(c.d_xx > 0.0)) throw validation_error("lindblad_alpha_beta: d_XX must be > 0");
    const double alpha = std::sqrt(c.d_xx);
    return {alpha, {c.d_xp / alpha, c.gamma / alpha}};
}

// Forward map: D_XX = |alpha|^2, D_XP = Re(alpha* beta), D_PP = |beta|^2,
// Gamma = Im(alpha* beta).
inline LinearLmeCoefficients coefficients_from_operator(const LindbladPair& op) {
    const std::complex<double> ab = op.alpha * op.beta;
    return {ab.imag(), op.alpha * op.alpha, ab.real(), std::norm(op.beta)};
}

// Base coefficients of the quadratic-coupling BMME. Their temperature and
// cutoff dependence is not computed here; callers supply them.
struct QuadraticBaseCoefficients {
    double d_xx{};
    double d_xp{};
    double d_pp{};
    double c_xp{};
    double c_pp{};

    QuadraticBaseCoefficients scaled(double s) const {
        return {s * d_xx, s * d_xp, s * d_pp, s * c_xp, s * c_pp};
    }
};

inline void validate(const QuadraticBaseCoefficients& q) {
    if (!std::isfinite(q.d_xx) || !std::isfinite(q.d_xp) || !std::isfinite(q.d_pp) ||
        !std::isfinite(q.c_xp) || !std::isfinite(q.c_pp)) {
        throw validation_error("QuadraticBaseCoefficients: all entries must be finite");
    }
    if (!(q.d_xx > 0.0)) throw validation_error("QuadraticBaseCoefficients: d_xx must be > 0");
}

// Dissipator coefficients of the quadratic-coupling Lindblad equation built
// from A = mu X^2 + nu {X,P} + eps P^2.
struct QuadraticLmeCoefficients {
    double d_mu{};
    double d_nu{};
    double d_eps{};
    double d_munu{};
    double d_mueps{};
    double d_epsnu{};
    double c_munu{};
    double c_mueps{};
    double c_epsnu{};

    QuadraticLmeCoefficients scaled(double s) const {
        return {s * d_mu,    s * d_nu,    s * d_eps,   s * d_munu, s * d_mueps,
                s * d_epsnu, s * c_munu, s * c_mueps, s * c_epsnu};
    }
};

inline QuadraticLmeCoefficients quadratic_lme_coefficients(const QuadraticBaseCoefficients& q) {
    validate(q);
    QuadraticLmeCoefficients c;
    c.d_mueps = q.d_pp;
    c.d_munu = q.d_xp;
    c.c_mueps = q.c_pp;
    c.c_munu = q.c_xp;
    c.d_mu = 2.0 * q.d_xx;
    c.d_epsnu = (c.d_munu * c.d_mueps + c.c_munu * c.c_mueps) / c.d_mu;
    c.c_epsnu = (c.c_munu * c.d_mueps - c.d_munu * c.c_mueps) / c.d_mu;
    c.d_eps = (c.d_mueps * c.d_mueps + c.c_mueps * c.c_mueps) / c.d_mu;
    c.d_nu = (c.d_munu * c.d_munu + c.c_munu * c.c_munu) / c.d_mu;
    return c;
}

} // namespace lqbm
