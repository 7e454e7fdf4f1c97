// quadratic_dynamics.hpp: Gaussian closure for quadratic system–bath coupling
//
// State (dx2, dp2, c) with c = dx dp rho = -2 <XP>_sym. Writing x = dx2,
// p = dp2, w = x p + 2 c^2 (the Wick combination), the closed equations are
//   dx/dt = 2 [4 Cen (1 + w) + 2 Deps p + 4 Dnu x - c]
//   dp/dt = 2 [2 Dmu x - 4 Cmn (1 + w) + 6 Cme c p + c + 4 p (Dnu - Dme)]
//   dc/dt = -[4 Cme (1 - w / 2) + p (1 - 8 Den) + 12 Cmn c x
//             + (8 Dme - 12 Cen p) c - (1 + 8 Dmn) x]
// (short names: Cen = C_epsnu, Cmn = C_munu, Cme = C_mueps, Den = D_epsnu,
// Dme = D_mueps, Dmn = D_munu).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "lqbm/coefficients.hpp"
#include "lqbm/error.hpp"
#include "lqbm/linear_dynamics.hpp"
#include "lqbm/ode.hpp"

namespace lqbm {

struct QuadraticClosureState {
    double dx2{1.0};
    double dp2{1.0};
    double c{0.0};

    double rho() const { return c / std::sqrt(dx2 * dp2); }
    double rs_determinant() const { return dx2 * dp2 - c * c; }
    GaussianState gaussian() const { return {dx2, dp2, rho()}; }
    Vec<3> vec() const { return {dx2, dp2, c}; }
    static QuadraticClosureState from(const Vec<3>& v) { return {v[0], v[1], v[2]}; }
    static QuadraticClosureState from(const GaussianState& s) {
        return {s.dx2, s.dp2, s.rho * std::sqrt(s.dx2 * s.dp2)};
    }
};

inline Vec<3> closure_rates(const Vec<3>& s, const QuadraticLmeCoefficients& q) {
    const double x = s[0], p = s[1], c = s[2];
    const double w = x * p + 2.0 * c * c;
    const double f1 = 4.0 * q.c_epsnu * (1.0 + w) + 2.0 * q.d_eps * p + 4.0 * q.d_nu * x - c;
    const double f2 = 2.0 * q.d_mu * x - 4.0 * q.c_munu * (1.0 + w) + 6.0 * q.c_mueps * c * p + c +
                      4.0 * p * (q.d_nu - q.d_mueps);
    const double f3 = 4.0 * q.c_mueps + p - 8.0 * q.d_epsnu * p + 12.0 * q.c_munu * c * x +
                      (8.0 * q.d_mueps - 12.0 * q.c_epsnu * p) * c - (1.0 + 8.0 * q.d_munu) * x -
                      2.0 * q.c_mueps * w;
    return {2.0 * f1, 2.0 * f2, -f3};
}

inline Vec<3> closure_rhs(const QuadraticClosureState& s, const QuadraticLmeCoefficients& q) {
    if (!(s.dx2 > 0.0) || !(s.dp2 > 0.0)) {
        std::ostringstream os;
        os << "closure_rhs: state collapse (dx2=" << s.dx2 << ", dp2=" << s.dp2 << ")";
        throw numerical_error(Reason::StateCollapse, os.str());
    }
    return closure_rates(s.vec(), q);
}

// d(rates)/d(dx2, dp2, c)
inline Eigen::Matrix3d closure_jacobian(const QuadraticClosureState& s, const QuadraticLmeCoefficients& q) {
    const double x = s.dx2, p = s.dp2, c = s.c;
    Eigen::Matrix3d J;
    J(0, 0) = 2.0 * (4.0 * q.c_epsnu * p + 4.0 * q.d_nu);
    J(0, 1) = 2.0 * (4.0 * q.c_epsnu * x + 2.0 * q.d_eps);
    J(0, 2) = 2.0 * (16.0 * q.c_epsnu * c - 1.0);
    J(1, 0) = 2.0 * (2.0 * q.d_mu - 4.0 * q.c_munu * p);
    J(1, 1) = 2.0 * (6.0 * q.c_mueps * c + 4.0 * (q.d_nu - q.d_mueps) - 4.0 * q.c_munu * x);
    J(1, 2) = 2.0 * (6.0 * q.c_mueps * p + 1.0 - 16.0 * q.c_munu * c);
    J(2, 0) = -(12.0 * q.c_munu * c - (1.0 + 8.0 * q.d_munu) - 2.0 * q.c_mueps * p);
    J(2, 1) = -(1.0 - 8.0 * q.d_epsnu - 12.0 * q.c_epsnu * c - 2.0 * q.c_mueps * x);
    J(2, 2) = -(12.0 * q.c_munu * x + 8.0 * q.d_mueps - 12.0 * q.c_epsnu * p - 8.0 * q.c_mueps * c);
    return J;
}

// ---- time integration ------------------------------------------------------

enum class ConvergenceStatus { Converged, Oscillatory, Diverged };

inline std::string_view status_name(ConvergenceStatus s) {
    switch (s) {
        case ConvergenceStatus::Converged: return "converged";
        case ConvergenceStatus::Oscillatory: return "oscillatory";
        case ConvergenceStatus::Diverged: return "diverged";
    }
    return "unknown";
}

struct ConvergenceReport {
    ConvergenceStatus status{ConvergenceStatus::Diverged};
    std::optional<QuadraticClosureState> terminal;  // set when Converged
    double window_variation{};
    double t_reached{};
    Reason failure{Reason::None};  // state collapse or integrator failure
    double min_rs_determinant{};   // min of dx2 dp2 - c^2 along the run
};

struct ClosureTrajectory {
    std::vector<double> times;
    std::vector<QuadraticClosureState> states;
};

struct ClosureRun {
    ClosureTrajectory trajectory;
    ConvergenceReport report;
};

struct ClosureOptions {
    double window_fraction{0.2};
    double converged_below{1e-6};
    double blowup{1e8};
    std::size_t samples{2001};
};

inline ClosureRun evolve_closure(const QuadraticClosureState& init, const QuadraticLmeCoefficients& q,
                                 double t_max, double tol, const ClosureOptions& o = {}) {
    if (!(t_max > 0.0)) throw validation_error("evolve_closure: t_max must be > 0");
    if (!(tol > 0.0)) throw validation_error("evolve_closure: tol must be > 0");
    if (!(init.dx2 > 0.0) || !(init.dp2 > 0.0) || init.c * init.c > init.dx2 * init.dp2)
        throw validation_error("evolve_closure: initial state needs dx2, dp2 > 0 and c^2 <= dx2 dp2");

    ClosureRun run;
    auto& tr = run.trajectory;
    auto& rep = run.report;
    rep.min_rs_determinant = init.rs_determinant();
    const std::vector<double> times = uniform_times(t_max, std::max<std::size_t>(o.samples, 10));
    OdeOptions opt;
    opt.rtol = tol;
    opt.atol = tol;
    bool blew_up = false;
    const auto rhs = [&](double, const Vec<3>& v) { return closure_rates(v, q); };
    const auto out = [&](double t, const Vec<3>& v) {
        tr.times.push_back(t);
        tr.states.push_back(QuadraticClosureState::from(v));
    };
    const auto guard = [&](double, const Vec<3>& v) {
        const double x = v[0], p = v[1], c = v[2];
        if (!(x > 0.0) || !(p > 0.0) || c * c > x * p) return Reason::StateCollapse;
        rep.min_rs_determinant = std::min(rep.min_rs_determinant, x * p - c * c);
        if (std::max({std::abs(x), std::abs(p), std::abs(c)}) > o.blowup) {
            blew_up = true;
            return Reason::NonFinite;
        }
        return Reason::None;
    };
    const OdeOutcome res = integrate<3>(rhs, init.vec(), 0.0, times, opt, out, guard);
    rep.t_reached = res.t_reached;

    if (blew_up) {
        rep.status = ConvergenceStatus::Diverged;
        rep.window_variation = std::numeric_limits<double>::infinity();
        return run;
    }
    if (!res.ok()) {
        rep.status = ConvergenceStatus::Diverged;
        rep.failure = res.reason;
        rep.window_variation = std::numeric_limits<double>::infinity();
        return run;
    }

    // trailing-window test
    const double t_start = (1.0 - o.window_fraction) * t_max;
    const auto first = std::lower_bound(tr.times.begin(), tr.times.end(), t_start) - tr.times.begin();
    const std::size_t n = tr.states.size();
    const std::size_t mid = static_cast<std::size_t>(first) + (n - static_cast<std::size_t>(first)) / 2;
    double variation = 0.0;
    bool growing = false;
    for (int k = 0; k < 3; ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, amax = 0.0;
        double first_half = 0.0, second_half = 0.0;
        for (std::size_t i = static_cast<std::size_t>(first); i < n; ++i) {
            const double v = tr.states[i].vec()[k];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            amax = std::max(amax, std::abs(v));
            double& half = i < mid ? first_half : second_half;
            half = std::max(half, std::abs(v));
        }
        // c can sit at zero; measure it against the variance scale instead
        const double scale = k == 2 ? std::max(amax, std::sqrt(tr.states.back().dx2 * tr.states.back().dp2)) : amax;
        if (scale > 0.0) variation = std::max(variation, (hi - lo) / scale);
        const double last = std::abs(tr.states.back().vec()[k]);
        if (second_half > 1.05 * first_half && last >= 0.999 * second_half) growing = true;
    }
    rep.window_variation = variation;
    if (variation < o.converged_below) {
        rep.status = ConvergenceStatus::Converged;
        rep.terminal = tr.states.back();
    } else {
        rep.status = growing ? ConvergenceStatus::Diverged : ConvergenceStatus::Oscillatory;
    }
    return run;
}

// ---- stationary roots ------------------------------------------------------

struct NewtonOptions {
    double residual_below{1e-12};
    std::size_t max_iterations{200};
    int max_halvings{30};
};

struct NewtonResult {
    QuadraticClosureState root;
    double residual{};
    std::size_t iterations{};
};

inline double residual_norm(const Vec<3>& r) { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); }

inline NewtonResult stationary_newton(const QuadraticLmeCoefficients& q, const QuadraticClosureState& guess,
                                      const NewtonOptions& o = {}) {
    if (!(guess.dx2 > 0.0) || !(guess.dp2 > 0.0))
        throw validation_error("stationary_newton: guess needs dx2 > 0 and dp2 > 0");
    Vec<3> s = guess.vec();
    Vec<3> r = closure_rates(s, q);
    double rn = residual_norm(r);
    for (std::size_t it = 0; it < o.max_iterations; ++it) {
        if (rn < o.residual_below) return {QuadraticClosureState::from(s), rn, it};
        const Eigen::Matrix3d J = closure_jacobian(QuadraticClosureState::from(s), q);
        Eigen::FullPivLU<Eigen::Matrix3d> lu(J);
        if (lu.rank() < 3) throw numerical_error(Reason::SingularJacobian, "stationary_newton: singular Jacobian");
        const Eigen::Vector3d step = lu.solve(-Eigen::Vector3d(r[0], r[1], r[2]));
        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= o.max_halvings; ++h, lambda *= 0.5) {
            const Vec<3> trial{s[0] + lambda * step[0], s[1] + lambda * step[1], s[2] + lambda * step[2]};
            if (!(trial[0] > 0.0) || !(trial[1] > 0.0)) continue;
            const Vec<3> rt = closure_rates(trial, q);
            const double tn = residual_norm(rt);
            if (std::isfinite(tn) && tn < rn) {
                s = trial;
                r = rt;
                rn = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // at the rounding floor no step can lower the residual any further
            const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                                 (1.0 + std::abs(s[0]) + std::abs(s[1]) + std::abs(s[2])) * J.norm();
            if (rn < std::max(o.residual_below, floor) * 10.0)
                return {QuadraticClosureState::from(s), rn, it};
            throw numerical_error(Reason::NewtonFailure, "stationary_newton: line search failed");
        }
    }
    if (rn < o.residual_below) return {QuadraticClosureState::from(s), rn, o.max_iterations};
    throw numerical_error(Reason::NewtonFailure, "stationary_newton: no convergence within iteration limit");
}

// Linear stability of a stationary root: all Jacobian eigenvalues in the
// open left half-plane.
inline bool is_stable(const QuadraticClosureState& s, const QuadraticLmeCoefficients& q) {
    const Eigen::EigenSolver<Eigen::Matrix3d> es(closure_jacobian(s, q), false);
    for (int i = 0; i < 3; ++i)
        if (!(es.eigenvalues()[i].real() < 0.0)) return false;
    return true;
}

struct ContinuationResult {
    std::vector<QuadraticClosureState> roots;
    Reason failure{Reason::None};
    std::size_t failed_at{};  // path index where the branch was lost
    std::string message;

    bool complete() const { return failure == Reason::None; }
};

inline double relative_distance(const QuadraticClosureState& a, const QuadraticClosureState& b) {
    const double d = std::hypot(a.dx2 - b.dx2, a.dp2 - b.dp2, a.c - b.c);
    const double n = std::hypot(b.dx2, b.dp2, b.c);
    return d / n;
}

// Follows the stationary branch along a parameter path, seeding each solve
// with the previous root. The first point is trusted to sit on the branch.
inline ContinuationResult cl_branch_continuation(std::span<const QuadraticLmeCoefficients> path,
                                                 const QuadraticClosureState& start, double max_jump = 0.5,
                                                 const NewtonOptions& o = {}) {
    ContinuationResult res;
    QuadraticClosureState prev = start;
    for (std::size_t i = 0; i < path.size(); ++i) {
        NewtonResult nr;
        try {
            nr = stationary_newton(path[i], prev, o);
        } catch (const Error& e) {
            res.failure = e.reason();
            res.failed_at = i;
            res.message = e.what();
            return res;
        }
        const double jump = relative_distance(nr.root, prev);
        if (i > 0 && jump > max_jump) {
            std::ostringstream os;
            os << "branch-loss at path index " << i << ": relative jump " << jump;
            res.failure = Reason::BranchLoss;
            res.failed_at = i;
            res.message = os.str();
            return res;
        }
        res.roots.push_back(nr.root);
        prev = nr.root;
    }
    return res;
}

} // namespace lqbm
