// sweep.hpp: parameter grids, figure presets, boundaries, threshold scans
//
// A sweep evaluates one pure pipeline per grid cell. Cells are addressed by
// (g index, lam index, tau index) with tau fastest; workers write only their
// own slot, so the result never depends on the number of threads.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "lqbm/coefficients.hpp"
#include "lqbm/error.hpp"
#include "lqbm/fock.hpp"
#include "lqbm/io.hpp"
#include "lqbm/linear_dynamics.hpp"
#include "lqbm/phase_space.hpp"
#include "lqbm/quadratic_dynamics.hpp"
#include "lqbm/quadratic_source.hpp"

namespace lqbm {

inline constexpr const char* kLibraryVersion = "1.0.0";

enum class SweepMode { Linear, Quadratic, Oracle, CheckLindblad };
enum class Quantity { Theta, Eta, Chi, Dl2, Hup, MinDl2, MinChi, Convergence };

inline const std::map<std::string, SweepMode>& mode_names() {
    static const std::map<std::string, SweepMode> m{{"linear", SweepMode::Linear},
                                                    {"quadratic", SweepMode::Quadratic},
                                                    {"oracle", SweepMode::Oracle},
                                                    {"check-lindblad", SweepMode::CheckLindblad}};
    return m;
}

inline const std::map<std::string, Quantity>& quantity_names() {
    static const std::map<std::string, Quantity> m{
        {"theta", Quantity::Theta}, {"eta", Quantity::Eta},         {"chi", Quantity::Chi},
        {"dl2", Quantity::Dl2},     {"hup", Quantity::Hup},         {"min_dl2", Quantity::MinDl2},
        {"min_chi", Quantity::MinChi}, {"convergence", Quantity::Convergence}};
    return m;
}

template <class E>
std::string name_of(const std::map<std::string, E>& m, E v) {
    for (const auto& [k, e] : m)
        if (e == v) return k;
    return "unknown";
}

struct AxisSpec {
    double lo{1.0};
    double hi{1.0};
    int n{1};
    bool log{true};

    std::vector<double> values() const {
        std::vector<double> v(static_cast<std::size_t>(n));
        if (n == 1) {
            v[0] = lo;
            return v;
        }
        for (int i = 0; i < n; ++i) {
            const double f = static_cast<double>(i) / (n - 1);
            v[static_cast<std::size_t>(i)] =
                log ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))) : lo + f * (hi - lo);
        }
        v.front() = lo;
        v.back() = hi;
        return v;
    }
};

struct SweepTolerances {
    double ode{1e-9};
    double window{1e-6};
    double newton{1e-12};
    double branch_jump{0.5};
};

struct SweepConfig {
    std::string preset;
    SweepMode mode{SweepMode::Linear};
    Quantity quantity{Quantity::Theta};
    std::vector<double> g{0.8};
    AxisSpec tau{0.05, 4.0, 100, true};
    AxisSpec lam{2.0, 20.0, 100, true};
    double r{0.0};
    SweepTolerances tol;
    double t_max{400.0};  // closure horizon
    nlohmann::json quadratic;  // inline coefficient object, or null
    std::string quadratic_path;
    int fock_dim{60};
    double fock_t_max{60.0};
    double fock_dt{0.005};
    std::string output;

    nlohmann::json to_json() const;
    static SweepConfig from_json(const nlohmann::json& j);
    void validate() const;

    QuadraticSource quadratic_source() const {
        if (!quadratic_path.empty()) return QuadraticSource::from_file(quadratic_path);
        if (!quadratic.is_null()) return QuadraticSource::from_json(quadratic);
        throw validation_error("quadratic_coefficients: required for quadratic mode");
    }
};

namespace detail {

inline nlohmann::json axis_json(const AxisSpec& a) {
    return {{"lo", a.lo}, {"hi", a.hi}, {"n", a.n}, {"scale", a.log ? "log" : "linear"}};
}

inline AxisSpec parse_axis(const nlohmann::json& j, const std::string& where, AxisSpec a) {
    if (!j.is_object()) throw validation_error(where + ": expected an object {lo, hi, n, scale}");
    for (const auto& [k, v] : j.items()) {
        if (k == "lo" || k == "hi") {
            if (!v.is_number()) throw validation_error(where + "." + k + ": must be a number");
            (k == "lo" ? a.lo : a.hi) = v.get<double>();
        } else if (k == "n") {
            if (!v.is_number_integer()) throw validation_error(where + ".n: must be an integer");
            a.n = v.get<int>();
        } else if (k == "scale") {
            if (v != "log" && v != "linear") throw validation_error(where + ".scale: must be \"log\" or \"linear\"");
            a.log = v == "log";
        } else {
            throw validation_error(where + "." + k + ": unknown field");
        }
    }
    return a;
}

inline double number_at(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw validation_error(where + ": must be a number");
    return v.get<double>();
}

} // namespace detail

// Figure-reproduction presets; grid resolution for the 2-D figures is 100 x 100.
inline const std::map<std::string, nlohmann::json>& presets() {
    using nlohmann::json;
    static const std::map<std::string, json> p{
        {"fig1", {{"mode", "linear"}, {"quantity", "theta"}, {"g", 0.8},
                  {"tau_range", {{"lo", 0.05}, {"hi", 4.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 20.0}, {"n", 100}, {"scale", "log"}}}}},
        {"fig2", {{"mode", "linear"}, {"quantity", "eta"}, {"g", 0.8},
                  {"tau_range", {{"lo", 0.05}, {"hi", 4.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 20.0}, {"n", 100}, {"scale", "log"}}}}},
        {"fig3", {{"mode", "linear"}, {"quantity", "min_dl2"}, {"g", {0.2, 0.4, 0.5, 0.6, 0.8, 1.0}},
                  {"tau_range", {{"lo", 0.01}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 100.0}, {"n", 100}, {"scale", "log"}}}}},
        {"fig4", {{"mode", "linear"}, {"quantity", "chi"}, {"g", 0.8},
                  {"tau_range", {{"lo", 0.05}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 100.0}, {"n", 100}, {"scale", "log"}}}}},
        {"fig5", {{"mode", "linear"}, {"quantity", "min_chi"}, {"g", {0.2, 0.4, 0.6, 0.8, 1.0}},
                  {"tau_range", {{"lo", 0.01}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 100.0}, {"n", 100}, {"scale", "log"}}}}},
        {"fig6", {{"mode", "quadratic"}, {"quantity", "eta"}, {"g", 0.1},
                  {"tau_range", {{"lo", 0.1}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 20.0}, {"n", 100}, {"scale", "log"}}},
                  {"quadratic_coefficients", {{"surrogate", "linear-bmme"}}}}},
        {"fig7", {{"mode", "quadratic"}, {"quantity", "chi"}, {"g", 0.1},
                  {"tau_range", {{"lo", 0.1}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 20.0}, {"n", 100}, {"scale", "log"}}},
                  {"quadratic_coefficients", {{"surrogate", "linear-bmme"}}}}},
        {"fig8", {{"mode", "quadratic"}, {"quantity", "convergence"},
                  {"g", {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5}},
                  {"tau_range", {{"lo", 4.0}, {"hi", 4.0}, {"n", 1}, {"scale", "linear"}}},
                  {"lam_range", {{"lo", 16.0}, {"hi", 16.0}, {"n", 1}, {"scale", "linear"}}},
                  {"quadratic_coefficients", {{"surrogate", "linear-bmme"}}}}},
        {"fig9", {{"mode", "quadratic"}, {"quantity", "hup"}, {"g", 0.1},
                  {"tau_range", {{"lo", 0.1}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                  {"lam_range", {{"lo", 2.0}, {"hi", 20.0}, {"n", 100}, {"scale", "log"}}},
                  {"quadratic_coefficients", {{"surrogate", "linear-bmme"}}}}},
        {"quadratic-theta", {{"mode", "quadratic"}, {"quantity", "theta"}, {"g", 0.1},
                             {"tau_range", {{"lo", 0.1}, {"hi", 10.0}, {"n", 100}, {"scale", "log"}}},
                             {"lam_range", {{"lo", 2.0}, {"hi", 20.0}, {"n", 100}, {"scale", "log"}}},
                             {"quadratic_coefficients", {{"surrogate", "linear-bmme"}}}}},
    };
    return p;
}

inline nlohmann::json SweepConfig::to_json() const {
    nlohmann::json j;
    j["preset"] = preset;
    j["mode"] = name_of(mode_names(), mode);
    j["quantity"] = name_of(quantity_names(), quantity);
    j["g"] = g;
    j["tau_range"] = detail::axis_json(tau);
    j["lam_range"] = detail::axis_json(lam);
    j["r"] = r;
    j["tolerances"] = {{"ode", tol.ode}, {"window", tol.window}, {"newton", tol.newton},
                       {"branch_jump", tol.branch_jump}};
    j["t_max"] = t_max;
    j["quadratic_coefficients"] = quadratic;
    j["quadratic_coefficients_path"] = quadratic_path;
    j["fock_dim"] = fock_dim;
    j["fock_t_max"] = fock_t_max;
    j["fock_dt"] = fock_dt;
    j["output"] = output;
    return j;
}

inline SweepConfig SweepConfig::from_json(const nlohmann::json& in) {
    if (!in.is_object()) throw validation_error("config: expected a JSON object");
    SweepConfig c;
    nlohmann::json j = nlohmann::json::object();
    if (in.contains("preset") && !in.at("preset").get<std::string>().empty()) {
        const std::string name = in.at("preset").get<std::string>();
        const auto it = presets().find(name);
        if (it == presets().end()) throw validation_error("preset: unknown preset '" + name + "'");
        j = it->second;
        c.preset = name;
    }
    j.update(in);
    for (const auto& [k, v] : j.items()) {
        if (k == "preset") continue;
        if (k == "mode") {
            const auto it = mode_names().find(v.get<std::string>());
            if (it == mode_names().end()) throw validation_error("mode: unknown mode " + v.dump());
            c.mode = it->second;
        } else if (k == "quantity") {
            const auto it = quantity_names().find(v.get<std::string>());
            if (it == quantity_names().end()) throw validation_error("quantity: unknown quantity " + v.dump());
            c.quantity = it->second;
        } else if (k == "g") {
            c.g.clear();
            if (v.is_array()) {
                for (std::size_t i = 0; i < v.size(); ++i)
                    c.g.push_back(detail::number_at(v[i], "g[" + std::to_string(i) + "]"));
            } else {
                c.g.push_back(detail::number_at(v, "g"));
            }
        } else if (k == "tau_range") {
            c.tau = detail::parse_axis(v, "tau_range", c.tau);
        } else if (k == "lam_range") {
            c.lam = detail::parse_axis(v, "lam_range", c.lam);
        } else if (k == "r") {
            c.r = detail::number_at(v, "r");
        } else if (k == "tolerances") {
            if (!v.is_object()) throw validation_error("tolerances: expected an object");
            for (const auto& [tk, tv] : v.items()) {
                const double d = detail::number_at(tv, "tolerances." + tk);
                if (tk == "ode") c.tol.ode = d;
                else if (tk == "window") c.tol.window = d;
                else if (tk == "newton") c.tol.newton = d;
                else if (tk == "branch_jump") c.tol.branch_jump = d;
                else throw validation_error("tolerances." + tk + ": unknown field");
            }
        } else if (k == "t_max") {
            c.t_max = detail::number_at(v, "t_max");
        } else if (k == "quadratic_coefficients") {
            if (v.is_string()) c.quadratic_path = v.get<std::string>();
            else c.quadratic = v;
        } else if (k == "quadratic_coefficients_path") {
            c.quadratic_path = v.get<std::string>();
        } else if (k == "fock_dim") {
            if (!v.is_number_integer()) throw validation_error("fock_dim: must be an integer");
            c.fock_dim = v.get<int>();
        } else if (k == "fock_t_max") {
            c.fock_t_max = detail::number_at(v, "fock_t_max");
        } else if (k == "fock_dt") {
            c.fock_dt = detail::number_at(v, "fock_dt");
        } else if (k == "output") {
            c.output = v.get<std::string>();
        } else {
            throw validation_error(k + ": unknown field");
        }
    }
    c.validate();
    return c;
}

inline void SweepConfig::validate() const {
    const auto check_axis = [](const AxisSpec& a, const std::string& where, bool allow_zero) {
        if (a.n < 1) throw validation_error(where + ".n: must be >= 1");
        if (!std::isfinite(a.lo) || !std::isfinite(a.hi)) throw validation_error(where + ": bounds must be finite");
        if (allow_zero ? a.lo < 0.0 : !(a.lo > 0.0)) throw validation_error(where + ".lo: must be positive");
        if (a.hi < a.lo) throw validation_error(where + ".hi: must be >= lo");
        if (a.log && !(a.lo > 0.0)) throw validation_error(where + ".scale: log axis needs lo > 0");
    };
    check_axis(tau, "tau_range", false);
    check_axis(lam, "lam_range", false);
    if (g.empty()) throw validation_error("g: at least one value required");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(g[i] > 0.0) || !std::isfinite(g[i]))
            throw validation_error("g[" + std::to_string(i) + "]: must be > 0");
    if (!std::isfinite(r)) throw validation_error("r: must be finite");
    if (!(tol.ode > 0.0)) throw validation_error("tolerances.ode: must be > 0");
    if (!(tol.window > 0.0)) throw validation_error("tolerances.window: must be > 0");
    if (!(tol.newton > 0.0)) throw validation_error("tolerances.newton: must be > 0");
    if (!(tol.branch_jump > 0.0)) throw validation_error("tolerances.branch_jump: must be > 0");
    if (!(t_max > 0.0)) throw validation_error("t_max: must be > 0");
    if (fock_dim < 4) throw validation_error("fock_dim: must be >= 4");
    if (!(fock_t_max > 0.0)) throw validation_error("fock_t_max: must be > 0");
    if (!(fock_dt > 0.0)) throw validation_error("fock_dt: must be > 0");

    const bool min_q = quantity == Quantity::MinDl2 || quantity == Quantity::MinChi;
    if (mode == SweepMode::Linear && quantity == Quantity::Convergence)
        throw validation_error("quantity: 'convergence' needs mode 'quadratic'");
    if (mode == SweepMode::Quadratic && min_q)
        throw validation_error("quantity: minimum-over-temperature scans are defined for mode 'linear'");
    if (mode == SweepMode::Quadratic && quadratic.is_null() && quadratic_path.empty())
        throw validation_error("quadratic_coefficients: required for quadratic mode");
}

// ---- grid cells --------------------------------------------------------------

struct ErrorCell {
    Reason reason{Reason::None};
    std::string message;
};

struct QuadraticCell {
    QuadraticClosureState state;
    PhaseSpaceDiagnostics diag;
    bool stable{};
};

struct MinCell {
    double value{};
    double tau{};
};

struct OracleCell {
    double trace_err{}, min_eig{}, trunc_pop{}, hup_product{};
    bool trusted{}, hup_pass{};
    FockMoments final;
};

struct LindbladCheckCell {
    double identity_residual{};   // |d_PP d_XX - Gamma^2 - d_XP^2| / (d_PP d_XX)
    double roundtrip_residual{};  // alpha/beta forward map vs coefficients
    double lme_kappa_min_eig{};   // Kossakowski matrix on {X, P}
    double bmme_kappa_min_eig{};  // same with D_PP = 0
};

using CellValue =
    std::variant<ErrorCell, PhaseSpaceDiagnostics, QuadraticCell, ConvergenceReport, MinCell, OracleCell, LindbladCheckCell>;

struct Cell {
    double g{}, lam{}, tau{};
    CellValue value;

    bool ok() const { return !std::holds_alternative<ErrorCell>(value); }
};

struct GridResult {
    SweepConfig config;
    std::vector<double> g, lam, tau;  // tau is empty for minimum-over-temperature grids
    std::vector<Cell> cells;
    nlohmann::json metadata;

    std::size_t expected_cells() const { return g.size() * lam.size() * std::max<std::size_t>(tau.size(), 1); }
};

namespace detail {

template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline ErrorCell error_cell(const std::exception& e) {
    if (const auto* le = dynamic_cast<const Error*>(&e)) return {le->reason(), le->what()};
    return {Reason::InvalidInput, e.what()};
}

// Kossakowski matrix of the linear generator on the operator pair {X, P}.
inline double kossakowski_min_eig(double d_xx, double d_xp, double d_pp, double gamma) {
    const double tr = d_xx + d_pp;
    const double det = d_xx * d_pp - d_xp * d_xp - gamma * gamma;
    return 0.5 * tr - std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
}

inline CellValue linear_cell(const SweepConfig& c, double g, double lam, double tau) {
    const ModelParams p{g, lam, tau, c.r};
    switch (c.mode) {
        case SweepMode::Linear:
            return stationary_diagnostics(p);
        case SweepMode::CheckLindblad: {
            const LinearLmeCoefficients k = linear_lme_coefficients(p);
            LindbladCheckCell out;
            out.identity_residual = std::abs(k.d_pp * k.d_xx - k.gamma * k.gamma - k.d_xp * k.d_xp) / (k.d_pp * k.d_xx);
            const LinearLmeCoefficients back = coefficients_from_operator(lindblad_alpha_beta(k));
            out.roundtrip_residual = std::max({std::abs(back.gamma - k.gamma) / k.gamma,
                                               std::abs(back.d_xx - k.d_xx) / k.d_xx,
                                               std::abs(back.d_xp - k.d_xp) / std::max(std::abs(k.d_xp), 1e-300),
                                               std::abs(back.d_pp - k.d_pp) / k.d_pp});
            out.lme_kappa_min_eig = kossakowski_min_eig(k.d_xx, k.d_xp, k.d_pp, k.gamma);
            out.bmme_kappa_min_eig = kossakowski_min_eig(k.d_xx, k.d_xp, 0.0, k.gamma);
            return out;
        }
        case SweepMode::Oracle: {
            const LinearLmeCoefficients k = linear_lme_coefficients(p);
            const FockOperators ops = build_operators(c.fock_dim);
            const LindbladGenerator gen = linear_lme_generator(k, c.r, ops);
            EvolveOptions o;
            o.dt = c.fock_dt;
            o.method = EvolveMethod::Rk4;
            const EvolveReport rep = evolve_density(fock_state(c.fock_dim, 0), Generator(gen), c.fock_t_max, ops, o);
            OracleCell out;
            out.trace_err = rep.trace_err;
            out.min_eig = rep.min_eig;
            out.trunc_pop = rep.trunc_pop;
            out.trusted = rep.trusted;
            out.final = rep.moments.back();
            if (!rep.trusted)
                return ErrorCell{Reason::TruncationUntrusted,
                                 "top-level population " + format_double(rep.trunc_pop) + " exceeds the trust gate"};
            const HupCertificate h = hup_certificate(rep.final, ops);
            out.hup_product = h.product;
            out.hup_pass = h.pass;
            return out;
        }
        case SweepMode::Quadratic: break;
    }
    throw validation_error("linear_cell: unsupported mode");
}

} // namespace detail

// Stationary CL-branch roots along one lam row. The row is traversed from
// the largest tau (closest to the classical corner), where the root is
// obtained by time integration from the ground state, toward lower tau by
// continuation.
inline std::vector<CellValue> quadratic_row(const SweepConfig& c, const QuadraticSource& src, double g, double lam,
                                            const std::vector<double>& taus) {
    std::vector<CellValue> out(taus.size(), ErrorCell{Reason::NotConverged, "not evaluated"});
    if (taus.empty()) return out;
    std::vector<QuadraticLmeCoefficients> path;
    path.reserve(taus.size());
    try {
        for (auto it = taus.rbegin(); it != taus.rend(); ++it) path.push_back(src.lme_at({g, lam, *it, c.r}));
    } catch (const std::exception& e) {
        for (auto& v : out) v = detail::error_cell(e);
        return out;
    }
    ClosureOptions co;
    co.converged_below = c.tol.window;
    const ClosureRun start = evolve_closure({}, path.front(), c.t_max, c.tol.ode, co);
    if (start.report.status != ConvergenceStatus::Converged) {
        const Reason why = start.report.failure != Reason::None ? start.report.failure : Reason::NotConverged;
        for (auto& v : out)
            v = ErrorCell{why, "no stationary start at tau=" + format_double(taus.back()) + " (" +
                                   std::string(status_name(start.report.status)) + ")"};
        return out;
    }
    NewtonOptions no;
    no.residual_below = c.tol.newton;
    const ContinuationResult cr = cl_branch_continuation(path, *start.report.terminal, c.tol.branch_jump, no);
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const std::size_t ti = taus.size() - 1 - k;
        if (k < cr.roots.size()) {
            const QuadraticClosureState& s = cr.roots[k];
            try {
                QuadraticCell qc;
                qc.state = s;
                qc.diag = diagnose(s.gaussian(), taus[ti]);
                qc.stable = is_stable(s, path[k]);
                out[ti] = qc;
            } catch (const std::exception& e) {
                out[ti] = detail::error_cell(e);
            }
        } else {
            out[ti] = ErrorCell{cr.failure, cr.message};
        }
    }
    return out;
}

inline GridResult run_sweep(const SweepConfig& cfg, int jobs = 1) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    GridResult res;
    res.config = cfg;
    res.g = cfg.g;
    res.lam = cfg.lam.values();
    const std::vector<double> taus = cfg.tau.values();
    const bool min_q = cfg.quantity == Quantity::MinDl2 || cfg.quantity == Quantity::MinChi;
    if (!min_q) res.tau = taus;

    const std::size_t nt = std::max<std::size_t>(res.tau.size(), 1);
    res.cells.resize(res.expected_cells());
    const auto index = [&](std::size_t gi, std::size_t li, std::size_t ti) { return (gi * res.lam.size() + li) * nt + ti; };

    if (min_q) {
        const MinQuantity mq = cfg.quantity == Quantity::MinDl2 ? MinQuantity::Dl2 : MinQuantity::Chi;
        detail::parallel_for(res.cells.size(), jobs, [&](std::size_t i) {
            const std::size_t gi = i / res.lam.size(), li = i % res.lam.size();
            Cell& cell = res.cells[i];
            cell.g = res.g[gi];
            cell.lam = res.lam[li];
            try {
                const MinResult m = min_over_temperature(mq, cell.g, cell.lam, taus);
                cell.tau = m.tau;
                cell.value = MinCell{m.value, m.tau};
            } catch (const std::exception& e) {
                cell.value = detail::error_cell(e);
            }
        });
    } else if (cfg.mode == SweepMode::Quadratic && cfg.quantity == Quantity::Convergence) {
        const QuadraticSource src = cfg.quadratic_source();
        ClosureOptions co;
        co.converged_below = cfg.tol.window;
        detail::parallel_for(res.cells.size(), jobs, [&](std::size_t i) {
            const std::size_t ti = i % nt, li = (i / nt) % res.lam.size(), gi = i / (nt * res.lam.size());
            Cell& cell = res.cells[i];
            cell.g = res.g[gi];
            cell.lam = res.lam[li];
            cell.tau = res.tau[ti];
            try {
                const auto q = src.lme_at({cell.g, cell.lam, cell.tau, cfg.r});
                cell.value = evolve_closure({}, q, cfg.t_max, cfg.tol.ode, co).report;
            } catch (const std::exception& e) {
                cell.value = detail::error_cell(e);
            }
        });
    } else if (cfg.mode == SweepMode::Quadratic) {
        const QuadraticSource src = cfg.quadratic_source();
        const std::size_t rows = res.g.size() * res.lam.size();
        detail::parallel_for(rows, jobs, [&](std::size_t row) {
            const std::size_t gi = row / res.lam.size(), li = row % res.lam.size();
            const std::vector<CellValue> vals = quadratic_row(cfg, src, res.g[gi], res.lam[li], res.tau);
            for (std::size_t ti = 0; ti < nt; ++ti) {
                Cell& cell = res.cells[index(gi, li, ti)];
                cell.g = res.g[gi];
                cell.lam = res.lam[li];
                cell.tau = res.tau[ti];
                cell.value = vals[ti];
            }
        });
    } else {
        detail::parallel_for(res.cells.size(), jobs, [&](std::size_t i) {
            const std::size_t ti = i % nt, li = (i / nt) % res.lam.size(), gi = i / (nt * res.lam.size());
            Cell& cell = res.cells[i];
            cell.g = res.g[gi];
            cell.lam = res.lam[li];
            cell.tau = res.tau[ti];
            try {
                cell.value = detail::linear_cell(cfg, cell.g, cell.lam, cell.tau);
            } catch (const std::exception& e) {
                cell.value = detail::error_cell(e);
            }
        });
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string canon = cfg.to_json().dump();
    res.metadata = {{"config_hash", hex64(fnv1a64(canon))},
                    {"config", cfg.to_json()},
                    {"library_version", kLibraryVersion},
                    {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__},
                    {"grid", {{"g", res.g.size()}, {"lam", res.lam.size()}, {"tau", res.tau.size()}}},
                    {"cells", res.cells.size()},
                    {"wall_time_s", wall},
                    {"jobs", jobs}};
    if (cfg.mode == SweepMode::Quadratic) {
        res.metadata["quadratic_source"] = cfg.quadratic_source().describe();
    }
    if (!cfg.preset.empty())
        res.metadata["note"] = "figure grids use 100 x 100 cells; the original resolution is not stated";
    return res;
}

// ---- records and emission ----------------------------------------------------

using Field = std::pair<std::string, nlohmann::json>;

inline std::vector<std::string> columns_for(const SweepConfig& c) {
    if (c.quantity == Quantity::MinDl2 || c.quantity == Quantity::MinChi)
        return {"g", "lam", "quantity", "min_value", "argmin_tau", "status"};
    if (c.mode == SweepMode::Quadratic && c.quantity == Quantity::Convergence)
        return {"g", "status", "terminal_dx2", "terminal_dp2", "terminal_c", "window_variation", "tau", "lam", "t_reached",
                "failure"};
    if (c.mode == SweepMode::Oracle)
        return {"tau", "lam", "g", "trace_err", "min_eig", "trunc_pop", "hup_product", "trusted", "hup_pass", "status"};
    if (c.mode == SweepMode::CheckLindblad)
        return {"tau", "lam", "g", "identity_residual", "roundtrip_residual", "lme_kappa_min_eig", "bmme_kappa_min_eig", "status"};
    std::vector<std::string> cols{"tau", "lam", "g",   "dx2",         "dp2", "rho",   "dl2",    "dL2",
                                  "eta", "theta_over_pi", "chi", "hup_product", "genuine_squeezing", "cooled", "status"};
    if (c.mode == SweepMode::Quadratic) cols.insert(cols.end(), {"terminal_c", "stable"});
    return cols;
}

namespace detail {

inline void diag_fields(std::map<std::string, nlohmann::json>& f, const PhaseSpaceDiagnostics& d) {
    f["dx2"] = d.dx2;
    f["dp2"] = d.dp2;
    f["rho"] = d.rho;
    f["dl2"] = d.dl2;
    f["dL2"] = d.dL2;
    f["eta"] = d.eta;
    f["theta_over_pi"] = d.theta ? nlohmann::json(*d.theta / std::numbers::pi) : nlohmann::json("isotropic");
    f["chi"] = d.chi;
    f["hup_product"] = d.hup_product;
    f["genuine_squeezing"] = d.genuine_squeezing;
    f["cooled"] = d.cooled;
}

} // namespace detail

// One record per cell with the columns of columns_for(); missing values in
// error cells are null and the status column carries the reason code.
inline std::vector<Field> record(const SweepConfig& c, const Cell& cell) {
    std::map<std::string, nlohmann::json> f;
    f["g"] = cell.g;
    f["lam"] = cell.lam;
    f["tau"] = cell.tau;
    f["status"] = "ok";
    f["quantity"] = name_of(quantity_names(), c.quantity);
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ErrorCell>) {
                f["status"] = std::string(reason_code(v.reason));
                f["message"] = v.message;
            } else if constexpr (std::is_same_v<T, PhaseSpaceDiagnostics>) {
                detail::diag_fields(f, v);
            } else if constexpr (std::is_same_v<T, QuadraticCell>) {
                detail::diag_fields(f, v.diag);
                f["terminal_c"] = v.state.c;
                f["stable"] = v.stable;
            } else if constexpr (std::is_same_v<T, ConvergenceReport>) {
                f["status"] = v.failure == Reason::StateCollapse ? std::string(reason_code(v.failure))
                                                                 : std::string(status_name(v.status));
                if (v.failure != Reason::None) f["failure"] = std::string(reason_code(v.failure));
                if (v.terminal) {
                    f["terminal_dx2"] = v.terminal->dx2;
                    f["terminal_dp2"] = v.terminal->dp2;
                    f["terminal_c"] = v.terminal->c;
                }
                f["window_variation"] = v.window_variation;
                f["t_reached"] = v.t_reached;
            } else if constexpr (std::is_same_v<T, MinCell>) {
                f["min_value"] = v.value;
                f["argmin_tau"] = v.tau;
            } else if constexpr (std::is_same_v<T, OracleCell>) {
                f["trace_err"] = v.trace_err;
                f["min_eig"] = v.min_eig;
                f["trunc_pop"] = v.trunc_pop;
                f["hup_product"] = v.hup_product;
                f["trusted"] = v.trusted;
                f["hup_pass"] = v.hup_pass;
            } else if constexpr (std::is_same_v<T, LindbladCheckCell>) {
                f["identity_residual"] = v.identity_residual;
                f["roundtrip_residual"] = v.roundtrip_residual;
                f["lme_kappa_min_eig"] = v.lme_kappa_min_eig;
                f["bmme_kappa_min_eig"] = v.bmme_kappa_min_eig;
            }
        },
        cell.value);
    std::vector<Field> out;
    for (const auto& col : columns_for(c)) {
        const auto it = f.find(col);
        out.emplace_back(col, it == f.end() ? nlohmann::json() : it->second);
    }
    if (f.count("message")) out.emplace_back("message", f["message"]);
    return out;
}

inline std::string csv_field(const nlohmann::json& v) {
    if (v.is_null()) return "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return format_double(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline std::string grid_csv(const GridResult& g) {
    CsvTable t;
    t.header = columns_for(g.config);
    for (const auto& cell : g.cells) {
        CsvRow row;
        for (const auto& [name, val] : record(g.config, cell))
            if (name != "message") row.push_back(csv_field(val));
        t.rows.push_back(std::move(row));
    }
    return to_csv(t);
}

inline nlohmann::json grid_json(const GridResult& g) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : g.cells) {
        nlohmann::json r = nlohmann::json::object();
        for (const auto& [name, val] : record(g.config, cell)) r[name] = val;
        cells.push_back(std::move(r));
    }
    return {{"axes", {{"g", g.g}, {"lam", g.lam}, {"tau", g.tau}}},
            {"config_hash", g.metadata.value("config_hash", "")},
            {"cells", cells}};
}

enum class OutputFormat { Csv, Json };

// Writes <dir>/<stem>.csv|json and the sidecar <dir>/<stem>.meta.json.
inline std::vector<std::filesystem::path> emit(const GridResult& g, const std::filesystem::path& dir,
                                               const std::string& stem, OutputFormat fmt) {
    std::vector<std::filesystem::path> written;
    const auto data = dir / (stem + (fmt == OutputFormat::Csv ? ".csv" : ".json"));
    write_text(data, fmt == OutputFormat::Csv ? grid_csv(g) : grid_json(g).dump(1) + "\n");
    written.push_back(data);
    const auto meta = dir / (stem + ".meta.json");
    write_text(meta, g.metadata.dump(1) + "\n");
    written.push_back(meta);
    return written;
}

// ---- cooling boundary ----------------------------------------------------------

struct Point2 {
    double x{}, y{};  // grid-index coordinates (x along tau, y along lam)
};

struct Contour {
    std::vector<std::pair<Point2, Point2>> segments;
};

// Marching squares for the zero level of f[y][x].
inline Contour marching_squares(const std::vector<std::vector<double>>& f) {
    Contour c;
    if (f.size() < 2 || f[0].size() < 2) return c;
    const auto interp = [](double a, double b) { return a / (a - b); };
    for (std::size_t y = 0; y + 1 < f.size(); ++y)
        for (std::size_t x = 0; x + 1 < f[y].size(); ++x) {
            const double v00 = f[y][x], v10 = f[y][x + 1], v01 = f[y + 1][x], v11 = f[y + 1][x + 1];
            std::vector<Point2> pts;
            const double xd = static_cast<double>(x), yd = static_cast<double>(y);
            if ((v00 < 0) != (v10 < 0)) pts.push_back({xd + interp(v00, v10), yd});
            if ((v10 < 0) != (v11 < 0)) pts.push_back({xd + 1.0, yd + interp(v10, v11)});
            if ((v01 < 0) != (v11 < 0)) pts.push_back({xd + interp(v01, v11), yd + 1.0});
            if ((v00 < 0) != (v01 < 0)) pts.push_back({xd, yd + interp(v00, v01)});
            if (pts.size() == 2) {
                c.segments.push_back({pts[0], pts[1]});
            } else if (pts.size() == 4) {
                // saddle: pair according to the centre value
                const double centre = 0.25 * (v00 + v10 + v01 + v11);
                if ((centre < 0) == (v00 < 0)) {
                    c.segments.push_back({pts[0], pts[1]});
                    c.segments.push_back({pts[2], pts[3]});
                } else {
                    c.segments.push_back({pts[0], pts[3]});
                    c.segments.push_back({pts[1], pts[2]});
                }
            }
        }
    return c;
}

namespace detail {

inline std::vector<Point2> sample(const Contour& c, int per_segment = 4) {
    std::vector<Point2> pts;
    for (const auto& [a, b] : c.segments)
        for (int k = 0; k <= per_segment; ++k) {
            const double f = static_cast<double>(k) / per_segment;
            pts.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
        }
    return pts;
}

} // namespace detail

// Symmetric Hausdorff distance in grid steps; infinite if either is empty.
inline double hausdorff(const Contour& a, const Contour& b) {
    const auto pa = detail::sample(a), pb = detail::sample(b);
    if (pa.empty() || pb.empty()) return std::numeric_limits<double>::infinity();
    const auto directed = [](const std::vector<Point2>& from, const std::vector<Point2>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(pa, pb), directed(pb, pa));
}

struct BoundaryResult {
    std::vector<double> tau, lam;
    Contour lme;   // chi = 1 of the Lindblad stationary state
    Contour bmme;  // chi = 1 of the Born–Markov stationary state (D_XP = 0)
    double hausdorff_steps{};
    std::string note;

    // grid-index point to (tau, lam), interpolating on the axis scale
    std::pair<double, double> to_params(const Point2& p, bool log_tau = true, bool log_lam = true) const {
        const auto at = [](const std::vector<double>& ax, double idx, bool lg) {
            const auto i = static_cast<std::size_t>(std::clamp(std::floor(idx), 0.0, double(ax.size() - 1)));
            const std::size_t j = std::min(i + 1, ax.size() - 1);
            const double f = idx - static_cast<double>(i);
            return lg ? std::exp((1 - f) * std::log(ax[i]) + f * std::log(ax[j])) : (1 - f) * ax[i] + f * ax[j];
        };
        return {at(tau, p.x, log_tau), at(lam, p.y, log_lam)};
    }
};

inline BoundaryResult cooling_boundary(double g, const AxisSpec& tau_axis, const AxisSpec& lam_axis, int jobs = 1) {
    BoundaryResult br;
    br.tau = tau_axis.values();
    br.lam = lam_axis.values();
    std::vector<std::vector<double>> f_lme(br.lam.size(), std::vector<double>(br.tau.size()));
    std::vector<std::vector<double>> f_bmme = f_lme;
    detail::parallel_for(br.lam.size(), jobs, [&](std::size_t li) {
        for (std::size_t ti = 0; ti < br.tau.size(); ++ti) {
            const ModelParams p{g, br.lam[li], br.tau[ti], 0.0};
            const LinearLmeCoefficients k = linear_lme_coefficients(p);
            f_lme[li][ti] = diagnose(stationary_gaussian(k), p.tau).chi - 1.0;
            // Born–Markov: chi < 1 exactly when D_XP > 0, independent of g
            f_bmme[li][ti] = -k.d_xp;
        }
    });
    br.lme = marching_squares(f_lme);
    br.bmme = marching_squares(f_bmme);
    br.hausdorff_steps = hausdorff(br.lme, br.bmme);
    if (br.lme.segments.empty()) br.note += "no chi = 1 crossing for the Lindblad state on this grid; ";
    if (br.bmme.segments.empty()) br.note += "no chi = 1 crossing for the Born-Markov state on this grid; ";
    return br;
}

inline std::string boundary_csv(const BoundaryResult& b) {
    CsvTable t;
    t.header = {"curve", "segment", "tau", "lam"};
    const auto add = [&](const char* name, const Contour& c) {
        for (std::size_t s = 0; s < c.segments.size(); ++s)
            for (const Point2& p : {c.segments[s].first, c.segments[s].second}) {
                const auto [tau, lam] = b.to_params(p);
                t.rows.push_back({name, std::to_string(s), format_double(tau), format_double(lam)});
            }
    };
    add("lme", b.lme);
    add("bmme", b.bmme);
    return to_csv(t);
}

// ---- non-convergence threshold ---------------------------------------------------

struct ThresholdResult {
    bool found{};
    double lo{}, hi{};  // bracket: converged at lo, not converged at hi
    ConvergenceStatus status_lo{}, status_hi{};
    std::size_t evaluations{};
    std::string note;
};

using CoefficientsAtG = std::function<QuadraticLmeCoefficients(double g)>;

inline bool closure_converges(const CoefficientsAtG& at, double g, double t_max, double tol,
                              ConvergenceStatus* status = nullptr) {
    const ClosureRun run = evolve_closure({}, at(g), t_max, tol);
    if (status) *status = run.report.status;
    return run.report.status == ConvergenceStatus::Converged;
}

// Bisection on the convergence classifier in g until the bracket is at most
// `width` wide.
inline ThresholdResult threshold_scan(const CoefficientsAtG& at, double g_lo, double g_hi, double t_max = 400.0,
                                      double tol = 1e-9, double width = 0.01) {
    if (!(g_lo > 0.0) || !(g_hi > g_lo)) throw validation_error("threshold_scan: need 0 < g_lo < g_hi");
    if (!(width > 0.0)) throw validation_error("threshold_scan: width must be > 0");
    ThresholdResult r;
    ConvergenceStatus s_lo{}, s_hi{};
    const bool c_lo = closure_converges(at, g_lo, t_max, tol, &s_lo);
    const bool c_hi = closure_converges(at, g_hi, t_max, tol, &s_hi);
    r.evaluations = 2;
    r.lo = g_lo;
    r.hi = g_hi;
    r.status_lo = s_lo;
    r.status_hi = s_hi;
    if (c_lo == c_hi) {
        r.note = std::string("no threshold: classifier uniform over range (") + (c_lo ? "converged" : "not converged") + ")";
        return r;
    }
    if (!c_lo) r.note = "inverted: converges at the upper end only";
    double a = g_lo, b = g_hi;
    while (b - a > width) {
        const double m = 0.5 * (a + b);
        ConvergenceStatus sm{};
        const bool cm = closure_converges(at, m, t_max, tol, &sm);
        ++r.evaluations;
        if (cm == c_lo) {
            a = m;
            r.status_lo = sm;
        } else {
            b = m;
            r.status_hi = sm;
        }
    }
    r.found = true;
    r.lo = a;
    r.hi = b;
    return r;
}

inline ThresholdResult threshold_scan(const QuadraticSource& src, double lam, double tau, double g_lo, double g_hi,
                                      double t_max = 400.0, double tol = 1e-9, double width = 0.01) {
    return threshold_scan([&](double g) { return src.lme_at({g, lam, tau, 0.0}); }, g_lo, g_hi, t_max, tol, width);
}

} // namespace lqbm
