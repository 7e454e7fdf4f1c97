// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
//
// Exit status is 0 when every failing criterion is a recorded gap (see
// kKnownGaps and README); any other failure exits 1.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lqbm/lqbm.hpp"

using namespace lqbm;

namespace {

struct Outcome {
    bool pass{};
    std::string detail;
    bool known_gap{};  // failure confined to the sub-check listed in kKnownGaps
};

const std::set<int> kKnownGaps{9, 12};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<double> log_axis(double lo, double hi, int n) { return AxisSpec{lo, hi, n, true}.values(); }
std::vector<double> lin_axis(double lo, double hi, int n) { return AxisSpec{lo, hi, n, false}.values(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// ---- 1 ------------------------------------------------------------------------

Outcome cl_limit() {
    const ModelParams p{0.1, 10.0, 1000.0, 0.0};
    const LinearLmeCoefficients c = linear_lme_coefficients(p);
    const double a = c.gamma / (p.g / 2.0), b = c.d_xx / (2.0 * p.g * p.tau);
    return {a >= 0.98 && a <= 1.02 && b >= 0.95 && b <= 1.05,
            fmt("Gamma/(g/2)=%.6f in [0.98,1.02], d_XX/(2 g tau)=%.6f in [0.95,1.05]", a, b)};
}

// ---- 2 ------------------------------------------------------------------------

Outcome coefficient_identity() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto logu = [&](double lo, double hi) { return std::exp(std::log(lo) + u(rng) * std::log(hi / lo)); };
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const ModelParams p{logu(1e-3, 2.0), logu(0.5, 200.0), logu(1e-3, 1e3), 0.0};
        const LinearLmeCoefficients c = linear_lme_coefficients(p);
        const double lhs = c.d_pp * c.d_xx;
        worst = std::max(worst, std::abs(lhs - c.gamma * c.gamma - c.d_xp * c.d_xp) / lhs);
    }
    return {worst < 1e-14, fmt("max relative residual %.3g over 10^4 draws (tol 1e-14)", worst)};
}

// ---- 3 / 4 ----------------------------------------------------------------------

struct GridPoint {
    double g, lam, tau;
};

std::vector<GridPoint> grid_20_20_5() {
    std::vector<GridPoint> pts;
    for (const double g : lin_axis(0.1, 1.0, 5))
        for (const double lam : log_axis(2.0, 100.0, 20))
            for (const double tau : log_axis(0.05, 10.0, 20)) pts.push_back({g, lam, tau});
    return pts;
}

Outcome stationary_fixed_point() {
    double worst = 0.0;
    for (const GridPoint& q : grid_20_20_5()) {
        const LinearLmeCoefficients c = linear_lme_coefficients(ModelParams{q.g, q.lam, q.tau, 0.0});
        const MomentRates r = moment_ode_rhs({}, stationary_gaussian(c), c, 0.0);
        worst = std::max({worst, std::abs(r.dx), std::abs(r.dp), std::abs(r.ddx2), std::abs(r.ddp2), std::abs(r.drho)});
    }
    return {worst < 1e-12, fmt("max |rhs| %.3g at the closed-form state over 2000 points (tol 1e-12)", worst)};
}

Outcome ode_vs_closed_form() {
    const auto pts = grid_20_20_5();
    std::vector<double> err(pts.size());
    detail::parallel_for(pts.size(), jobs(), [&](std::size_t i) {
        const GridPoint& q = pts[i];
        const LinearLmeCoefficients c = linear_lme_coefficients(ModelParams{q.g, q.lam, q.tau, 0.0});
        const double t_max = 50.0 / c.gamma;
        const MomentTrajectory tr = evolve_moments({}, GaussianState{}, c, 0.0, t_max, 1e-12, {t_max});
        const GaussianState& got = tr.second.back();
        const GaussianState want = stationary_gaussian(c);
        err[i] = std::max({rel(got.dx2, want.dx2), rel(got.dp2, want.dp2), std::abs(got.rho - want.rho)});
    });
    const double worst = *std::max_element(err.begin(), err.end());
    return {worst < 1e-6, fmt("max relative deviation %.3g after t = 50/Gamma over 2000 points (tol 1e-6)", worst)};
}

// ---- 5 ------------------------------------------------------------------------

Outcome hup_preservation() {
    const auto gs = lin_axis(0.1, 1.0, 5);
    const auto lams = log_axis(2.0, 100.0, 100);
    const auto taus = log_axis(0.05, 10.0, 100);
    double min_xp = 1e300, min_lL = 1e300, min_x = 1e300;
    for (const double g : gs)
        for (const double lam : lams)
            for (const double tau : taus) {
                const PhaseSpaceDiagnostics d = stationary_diagnostics({g, lam, tau, 0.0});
                min_xp = std::min(min_xp, d.hup_product);
                min_lL = std::min(min_lL, std::sqrt(d.dl2 * d.dL2));
                min_x = std::min(min_x, d.dx2);
            }
    const double floor = 1.0 - 1e-9;
    return {min_xp >= floor && min_lL >= floor && min_x >= floor,
            fmt("min dx*dp=%.6f, min dl*dL=%.6f, min dx^2=%.6f over 5x100x100 (floor 1-1e-9)", min_xp, min_lL, min_x)};
}

// ---- 6 ------------------------------------------------------------------------

Outcome bmme_contrast() {
    double worst = 1e300;
    std::size_t violations = 0, total = 0;
    for (const double lam : log_axis(2.0, 100.0, 50))
        for (const double tau : log_axis(0.01, 0.1, 20)) {
            const BmmeStationary b = bmme_stationary(linear_lme_coefficients(ModelParams{0.8, lam, tau, 0.0}));
            ++total;
            if (b.hup_violation) ++violations;
            const double prod = b.state.dx2 * b.state.dp2;
            worst = std::min(worst, prod > 0.0 ? std::sqrt(prod) : -std::sqrt(-prod));
        }
    return {violations > 0,
            fmt("%zu of %zu BMME states at g=0.8, tau<=0.1 violate dx*dp>=1; smallest product %.4f", violations, total,
                worst)};
}

// ---- 7 ------------------------------------------------------------------------

Outcome zero_temperature() {
    double worst = 0.0;
    std::string parts;
    for (const double lam : {1.0, 3.0, 10.0, 30.0}) {
        const double got = stationary_diagnostics({1e-3, lam, 1e-3, 0.0}).hup_product;
        const double want = zero_temperature_product(lam);
        worst = std::max(worst, rel(got, want));
        parts += fmt(" lam=%g: %.5f vs %.5f;", lam, got, want);
    }
    return {worst <= 0.01, fmt("max relative deviation %.4f (tol 0.01);", worst) + parts};
}

// ---- 8 ------------------------------------------------------------------------

Outcome squeezing_threshold() {
    const auto taus = log_axis(0.01, 10.0, 100);
    const auto lams = log_axis(2.0, 100.0, 50);
    std::string d;
    bool ok = true;
    for (const double g : {0.2, 0.4, 0.5, 0.8}) {
        double lowest = 1e300;
        for (const double lam : lams) lowest = std::min(lowest, min_over_temperature(MinQuantity::Dl2, g, lam, taus).value);
        const bool want_squeezed = g > 0.5;
        ok = ok && (want_squeezed ? lowest < 1.0 : lowest >= 1.0);
        d += fmt("g=%.1f: min dl^2=%.5f (%s); ", g, lowest, want_squeezed ? "need < 1" : "need >= 1");
    }
    return {ok, d};
}

// ---- 9 ------------------------------------------------------------------------

Outcome cooling_boundary_convergence() {
    const AxisSpec tau{0.05, 10.0, 60, true}, lam{2.0, 100.0, 60, true};
    const BoundaryResult weak = cooling_boundary(1e-3, tau, lam, jobs());
    const BoundaryResult strong = cooling_boundary(0.8, tau, lam, jobs());
    const bool weak_ok = weak.hausdorff_steps < 2.0;
    const bool strong_ok = strong.hausdorff_steps > 5.0;
    Outcome o{weak_ok && strong_ok,
              fmt("g=1e-3: Hausdorff %.3g steps (need < 2; LME segments %zu, BMME %zu); g=0.8: %.3g steps (need > 5)",
                  weak.hausdorff_steps, weak.lme.segments.size(), weak.bmme.segments.size(), strong.hausdorff_steps)};
    // the recorded gap: no chi = 1 crossing of the Lindblad state at weak coupling
    o.known_gap = !o.pass && strong_ok && weak.lme.segments.empty();
    return o;
}

// ---- 10 -----------------------------------------------------------------------

Outcome fock_oracle() {
    const int N = 60;
    const FockOperators f = build_operators(N);
    const ModelParams p{0.8, 10.0, 0.5, 0.0};
    const LinearLmeCoefficients c = linear_lme_coefficients(p);
    EvolveOptions o;
    o.method = EvolveMethod::Rk4;
    const EvolveReport lme = evolve_density(fock_state(N, 0), linear_lme_generator(c, 0.0, f), 60.0, f, o);
    const GaussianState got = moments_from_density(lme.final, f).central();
    const GaussianState want = stationary_gaussian(c);
    const double mom = std::max({rel(got.dx2, want.dx2), rel(got.dp2, want.dp2), rel(got.rho, want.rho)});
    const double final_min = lme.final.min_eigenvalue();

    const LinearLmeCoefficients cb = linear_lme_coefficients(ModelParams{0.8, 10.0, 0.05, 0.0});
    // the truncated Born-Markov flow runs away after t ~ 1.2, so stop before that
    const EvolveReport bm = evolve_density(fock_state(N, 0), bmme_generator(cb, f), 1.0, f, o);
    double bm_hup = 1e300;
    for (const FockMoments& m : bm.moments)
        bm_hup = std::min(bm_hup, std::sqrt(std::max(0.0, (m.xx - m.x * m.x) * (m.pp - m.p * m.p))));

    const bool ok = lme.trace_err < 1e-10 && final_min >= -1e-8 && lme.min_eig >= -1e-8 && mom < 1e-3 &&
                    bm.min_eig < -1e-6;
    return {ok, fmt("LME: trace err %.2g, min eig %.2g (terminal %.2g), moment deviation %.2g, trunc pop %.2g; "
                    "BMME tau=0.05: min eig %.3g at t=%.2f, min sigma_x sigma_p %.4f, trace err %.2g",
                    lme.trace_err, lme.min_eig, final_min, mom, lme.trunc_pop, bm.min_eig, bm.min_eig_time, bm_hup,
                    bm.trace_err)};
}

// ---- 11 -----------------------------------------------------------------------

Outcome appendix_b() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
    const auto c = [&] { return cplx(u(rng), u(rng)); };
    const auto gaussian = [&] {
        const double x = 0.3 + 3.0 * u01(rng), p = (1.0 + 2.0 * u01(rng)) / x;
        const double rmax = std::sqrt(std::max(0.0, 1.0 - 1.0 / (x * p)));
        return GaussianState{x, p, (2.0 * u01(rng) - 1.0) * rmax};
    };

    const int N = 10;
    const FockOperators f = build_operators(N);
    double worst_frob = 0.0, worst_eig = 1e300;
    std::size_t rejected = 0;
    for (int i = 0; i < 10000; ++i) {
        const QuadraticLindbladOp L{c(), c(), c(), c(), c(), c()};
        try {
            const Factorization fz = factorize_quadratic(L);
            worst_frob = std::max(worst_frob, (product_matrix(fz.d1, fz.d2, N) - L.matrix(f) - fz.eta_adjustment * f.id).norm());
            worst_eig = std::min(worst_eig, gaussian_dissipator_matrix(fz.d1, fz.d2, gaussian()).min_eig);
        } catch (const Error&) {
            ++rejected;
        }
    }

    // closure rates against the exact quadratic generator on Gaussian density matrices
    const int M = 90;
    const FockOperators fm = build_operators(M);
    double worst_wick = 0.0;
    for (int i = 0; i < 100; ++i) {
        const QuadraticBaseCoefficients b{0.05 + std::abs(u(rng)), u(rng), u(rng), u(rng), u(rng)};
        const QuadraticLmeCoefficients q = quadratic_lme_coefficients(b.scaled(0.3));
        const double x = 1.0 + 1.5 * u01(rng), p = 1.0 + 1.5 * u01(rng);
        const QuadraticClosureState s{x, p, u(rng) * std::sqrt(x * p - 1.0)};
        const CMat drho = quadratic_lme_generator(q, fm)(gaussian_density(s.gaussian(), {}, M).data);
        const Vec<3> r = closure_rhs(s, q);
        const double gen[3] = {2.0 * expect(drho, fm.X2), 2.0 * expect(drho, fm.P2), -expect(drho, fm.XP_anti)};
        for (int k = 0; k < 3; ++k) worst_wick = std::max(worst_wick, std::abs(r[k] - gen[k]) / std::max(1.0, std::abs(r[k])));
    }
    const bool ok = rejected == 0 && worst_frob < 1e-10 && worst_eig >= -1e-12 && worst_wick < 1e-10;
    return {ok, fmt("factorization: max Frobenius residual %.2g (tol 1e-10), %zu rejected; min eig of Gamma~ %.3g "
                    "(floor -1e-12); Wick closure vs generator: max deviation %.2g on 100 states (tol 1e-10)",
                    worst_frob, rejected, worst_eig, worst_wick)};
}

// ---- 12 -----------------------------------------------------------------------

struct NamedSource {
    std::string name;
    QuadraticSource src;
};

Outcome quadratic_regime(const std::vector<NamedSource>& sources) {
    std::string d;
    bool a_ok = true, b_ok = true, c_ok = true;
    for (const NamedSource& ns : sources) {
        // (a) Robertson-Schroedinger along closure trajectories at g = 0.1
        const auto lams = log_axis(2.0, 20.0, 20), taus = log_axis(0.1, 10.0, 20);
        std::vector<double> worst(lams.size() * taus.size(), 1e300);
        std::vector<int> conv(worst.size(), 0);
        detail::parallel_for(worst.size(), jobs(), [&](std::size_t i) {
            const double lam = lams[i / taus.size()], tau = taus[i % taus.size()];
            const ClosureRun run = evolve_closure({}, ns.src.lme_at({0.1, lam, tau, 0.0}), 400.0, 1e-9);
            conv[i] = run.report.status == ConvergenceStatus::Converged;
            for (const auto& s : run.trajectory.states) worst[i] = std::min(worst[i], s.rs_determinant());
        });
        const double w = *std::min_element(worst.begin(), worst.end());
        const int nc = std::count(conv.begin(), conv.end(), 1);
        a_ok = a_ok && w >= 1.0 - 1e-9;

        // (b) eta along the grid diagonal, from (tau_min, lam_max) to the CL corner (tau_max, lam_min)
        std::vector<double> eta;
        std::size_t missing = 0;
        {
            const auto tau_ax = log_axis(0.1, 10.0, 100), lam_ax = log_axis(2.0, 20.0, 100);
            const std::size_t n = tau_ax.size();
            for (std::size_t k = 0; k < n; ++k) {
                const double tau = tau_ax[k], lam = lam_ax[n - 1 - k];
                const ClosureRun run = evolve_closure({}, ns.src.lme_at({0.1, lam, tau, 0.0}), 400.0, 1e-9);
                if (!run.report.terminal) {
                    ++missing;
                    continue;
                }
                const QuadraticClosureState s = stationary_newton(ns.src.lme_at({0.1, lam, tau, 0.0}), *run.report.terminal).root;
                eta.push_back(diagnose(s.gaussian(), tau).eta);
            }
        }
        std::size_t rises = 0;
        for (std::size_t k = 1; k < eta.size(); ++k)
            if (eta[k] > eta[k - 1] + 1e-9) ++rises;
        const bool mono = missing == 0 && rises == 0;
        b_ok = b_ok && mono;

        // (c) threshold scan at (lam, tau) = (16, 4)
        const ThresholdResult th = threshold_scan(ns.src, 16.0, 4.0, 0.05, 0.5, 400.0, 1e-9, 0.01);
        const bool uniform = !th.found && th.note.find("no threshold") != std::string::npos;
        c_ok = c_ok && (th.found || uniform);

        d += fmt("[%s] (a) min dx2 dp2 (1-rho^2)=%.6f over 400 trajectories, %d converged; ", ns.name.c_str(), w, nc);
        d += fmt("(b) eta %.3f -> %.3f along the diagonal, %zu rises, %zu unconverged; ", eta.empty() ? 0.0 : eta.front(),
                 eta.empty() ? 0.0 : eta.back(), rises, missing);
        d += th.found ? fmt("(c) threshold in [%.4f, %.4f] (%s above). ", th.lo, th.hi,
                            std::string(status_name(th.status_hi)).c_str())
                      : "(c) " + th.note + ". ";
    }
    Outcome o{a_ok && b_ok && c_ok, d};
    // the recorded gap: no physical coefficient set is available to decide (b)
    o.known_gap = !o.pass && a_ok && c_ok;
    return o;
}

} // namespace

int main() {
    std::printf("acceptance: %s, Eigen %d.%d.%d, %d threads\n", kLibraryVersion, EIGEN_WORLD_VERSION,
                EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION, jobs());

    std::vector<NamedSource> sources{{"linear-bmme surrogate", QuadraticSource::linear_surrogate()}};
    try {
        sources.push_back({"placeholder file", QuadraticSource::from_file(LQBM_SOURCE_DIR "/data/quadratic_placeholder.json")});
    } catch (const std::exception& e) {
        std::printf("note: placeholder coefficients unavailable (%s)\n", e.what());
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"CL-limit coefficients", cl_limit},
        {"coefficient identity", coefficient_identity},
        {"stationary fixed point", stationary_fixed_point},
        {"ODE vs closed form", ode_vs_closed_form},
        {"HUP preservation", hup_preservation},
        {"BMME contrast", bmme_contrast},
        {"zero-temperature limit", zero_temperature},
        {"squeezing threshold", squeezing_threshold},
        {"cooling-boundary convergence", cooling_boundary_convergence},
        {"Fock oracle agreement", fock_oracle},
        {"factorization, PSD and Wick equivalence", appendix_b},
        {"quadratic regime", [&] { return quadratic_regime(sources); }},
    };

    int unexpected = 0, passed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool gap = !o.pass && o.known_gap && kKnownGaps.count(id);
        if (o.pass) ++passed;
        else if (!gap) ++unexpected;
        std::printf("%s %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), secs,
                    o.detail.c_str());
        if (gap) std::printf("     %2d recorded gap, see README\n", id);
        std::fflush(stdout);
    }
    std::printf("summary: %d/%zu PASS, %d unexpected FAIL\n", passed, criteria.size(), unexpected);
    return unexpected == 0 ? 0 : 1;
}
