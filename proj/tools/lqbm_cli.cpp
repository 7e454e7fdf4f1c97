// lqbm: command-line front end
//
// Exit codes: 0 success, 1 validation, 2 numerical failure, 3 I/O.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lqbm/lqbm.hpp"

namespace {

using nlohmann::json;
using namespace lqbm;

struct Globals {
    std::string config;
    std::string out;
    std::string format{"csv"};
    int jobs{1};
    std::optional<std::uint64_t> seed;
    json cfg = json::object();
};

// Parameter value from the flag if given, else from the config file, else the default.
struct Param {
    std::optional<double> flag;
    double value(const Globals& g, const char* key, double fallback) const {
        if (flag) return *flag;
        if (g.cfg.contains(key)) {
            const auto& v = g.cfg.at(key);
            if (!v.is_number()) throw validation_error(std::string("config.") + key + ": must be a number");
            return v.get<double>();
        }
        return fallback;
    }
};

struct PointArgs {
    Param g, lam, tau, r;
    ModelParams resolve(const Globals& gl) const {
        ModelParams p{g.value(gl, "g", 0.1), lam.value(gl, "lam", 10.0), tau.value(gl, "tau", 1.0),
                      r.value(gl, "r", 0.0)};
        validate(p);
        return p;
    }
};

void add_point(CLI::App* sub, PointArgs& a) {
    sub->add_option("--g", a.g.flag, "coupling g (gamma/Omega)");
    sub->add_option("--lam", a.lam.flag, "cutoff lam (Lambda/Omega)");
    sub->add_option("--tau", a.tau.flag, "temperature tau (k_B T / hbar Omega)");
    sub->add_option("--r", a.r.flag, "counter-term weight r");
}

OutputFormat output_format(const Globals& g) {
    if (g.format == "csv") return OutputFormat::Csv;
    if (g.format == "json") return OutputFormat::Json;
    throw validation_error("--format: must be csv or json");
}

// Writes to <out>/<stem>.<ext> when --out is given, otherwise to stdout.
void deliver(const Globals& g, const std::string& stem, const std::string& csv, const json& j) {
    const bool as_json = output_format(g) == OutputFormat::Json;
    const std::string text = as_json ? j.dump(1) + "\n" : csv;
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    const auto path = std::filesystem::path(g.out) / (stem + (as_json ? ".json" : ".csv"));
    write_text(path, text);
    std::cerr << "wrote " << path.string() << "\n";
}

std::string kv_csv(const json& j) {
    CsvTable t;
    CsvRow row;
    for (const auto& [k, v] : j.items()) {
        t.header.push_back(k);
        row.push_back(csv_field(v));
    }
    t.rows.push_back(row);
    return to_csv(t);
}

json diag_json(const PhaseSpaceDiagnostics& d) {
    return {{"dx2", d.dx2},
            {"dp2", d.dp2},
            {"rho", d.rho},
            {"dl2", d.dl2},
            {"dL2", d.dL2},
            {"eta", d.eta},
            {"theta_over_pi", d.theta ? json(*d.theta / std::numbers::pi) : json("isotropic")},
            {"chi", d.chi},
            {"hup_product", d.hup_product},
            {"genuine_squeezing", d.genuine_squeezing},
            {"cooled", d.cooled}};
}

QuadraticSource quadratic_source(const Globals& g, const std::string& path) {
    if (!path.empty()) return QuadraticSource::from_file(path);
    if (g.cfg.contains("quadratic_coefficients")) {
        const auto& v = g.cfg.at("quadratic_coefficients");
        return v.is_string() ? QuadraticSource::from_file(v.get<std::string>()) : QuadraticSource::from_json(v);
    }
    throw validation_error("--coefficients: quadratic coefficients are required (file or config entry)");
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Validation: return 1;
        case ErrorKind::Numerical: return 2;
        case ErrorKind::Io: return 3;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lindblad quantum Brownian motion toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals gl;
    app.add_option("--config", gl.config, "JSON configuration file");
    app.add_option("--out", gl.out, "output directory (stdout when omitted)");
    app.add_option("--format", gl.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--jobs", gl.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", gl.seed, "seed for random initial states (oracle only)");

    // coeffs
    PointArgs coeffs_p;
    auto* coeffs = app.add_subcommand("coeffs", "BMME and Lindblad coefficients at one parameter point");
    add_point(coeffs, coeffs_p);

    // evolve-linear
    PointArgs el_p;
    double el_tmax = 50.0, el_x0 = 0.0, el_p0 = 0.0, el_dx2 = 1.0, el_dp2 = 1.0, el_rho = 0.0, el_tol = 1e-9;
    std::size_t el_samples = 201;
    auto* evolve_linear = app.add_subcommand("evolve-linear", "moment trajectory of the linear-coupling LME");
    add_point(evolve_linear, el_p);
    evolve_linear->add_option("--t-max", el_tmax, "final time");
    evolve_linear->add_option("--samples", el_samples, "output samples");
    evolve_linear->add_option("--x0", el_x0);
    evolve_linear->add_option("--p0", el_p0);
    evolve_linear->add_option("--dx2", el_dx2, "initial 2<X^2>");
    evolve_linear->add_option("--dp2", el_dp2, "initial 2<P^2>");
    evolve_linear->add_option("--rho", el_rho, "initial correlation");
    evolve_linear->add_option("--tol", el_tol, "integrator tolerance");

    // stationary-linear
    PointArgs sl_p;
    bool sl_bmme = false;
    auto* stationary_linear = app.add_subcommand("stationary-linear", "stationary Gaussian state and diagnostics");
    add_point(stationary_linear, sl_p);
    stationary_linear->add_flag("--bmme", sl_bmme, "also report the Born-Markov stationary state");

    // evolve-quadratic
    PointArgs eq_p;
    std::string eq_coeffs;
    double eq_tmax = 400.0, eq_tol = 1e-9;
    std::size_t eq_samples = 2001;
    auto* evolve_quadratic = app.add_subcommand("evolve-quadratic", "Gaussian-closure trajectory, quadratic coupling");
    add_point(evolve_quadratic, eq_p);
    evolve_quadratic->add_option("--coefficients", eq_coeffs, "quadratic coefficient JSON file");
    evolve_quadratic->add_option("--t-max", eq_tmax);
    evolve_quadratic->add_option("--tol", eq_tol);
    evolve_quadratic->add_option("--samples", eq_samples);

    // stationary-quadratic
    PointArgs sq_p;
    std::string sq_coeffs;
    double sq_tmax = 400.0;
    auto* stationary_quadratic = app.add_subcommand("stationary-quadratic", "CL-branch stationary root of the closure");
    add_point(stationary_quadratic, sq_p);
    stationary_quadratic->add_option("--coefficients", sq_coeffs, "quadratic coefficient JSON file");
    stationary_quadratic->add_option("--t-max", sq_tmax, "horizon of the seeding evolution");

    // sweep
    std::string sw_preset;
    auto* sweep = app.add_subcommand("sweep", "parameter grid (preset or --config)");
    sweep->add_option("--preset", sw_preset, "fig1 ... fig9, quadratic-theta");

    // boundary
    double bd_g = 0.8;
    std::vector<double> bd_tau{0.05, 10.0, 100}, bd_lam{2.0, 100.0, 100};
    auto* boundary = app.add_subcommand("boundary", "chi = 1 cooling boundary, LME vs BMME");
    boundary->add_option("--g", bd_g);
    boundary->add_option("--tau-range", bd_tau, "lo hi n (log scale)")->expected(3);
    boundary->add_option("--lam-range", bd_lam, "lo hi n (log scale)")->expected(3);

    // threshold
    std::string th_coeffs;
    double th_lam = 16.0, th_tau = 4.0, th_tmax = 400.0, th_tol = 1e-9;
    std::vector<double> th_g{0.05, 1.0};
    auto* threshold = app.add_subcommand("threshold", "bisection for the closure non-convergence threshold in g");
    threshold->add_option("--lam", th_lam);
    threshold->add_option("--tau", th_tau);
    threshold->add_option("--g-range", th_g, "lo hi")->expected(2);
    threshold->add_option("--coefficients", th_coeffs, "quadratic coefficient JSON file");
    threshold->add_option("--t-max", th_tmax);
    threshold->add_option("--tol", th_tol);

    // oracle
    PointArgs or_p;
    int or_dim = 60;
    double or_tmax = 60.0, or_dt = 0.005;
    bool or_bmme = false;
    auto* oracle = app.add_subcommand("oracle", "truncated-Fock density-matrix evolution");
    add_point(oracle, or_p);
    oracle->add_option("--dim", or_dim, "Fock dimension");
    oracle->add_option("--t-max", or_tmax);
    oracle->add_option("--dt", or_dt);
    oracle->add_flag("--bmme", or_bmme, "use the Born-Markov generator");

    // check-lindblad
    PointArgs cl_p;
    auto* check = app.add_subcommand("check-lindblad", "identity and positivity checks of the Lindblad coefficients");
    add_point(check, cl_p);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!gl.config.empty()) {
            gl.cfg = read_json(gl.config);
            if (!gl.cfg.is_object()) throw validation_error("--config: expected a JSON object");
        }
        output_format(gl);

        if (*coeffs) {
            const ModelParams p = coeffs_p.resolve(gl);
            const BmmeCoefficients b = bmme_coefficients(p);
            const LinearLmeCoefficients k = linear_lme_coefficients(b);
            const LindbladPair ab = lindblad_alpha_beta(k);
            const json j{{"g", p.g},       {"lam", p.lam},       {"tau", p.tau},           {"c_p", b.c_p},
                         {"c_x", b.c_x},   {"d_x", b.d_x},       {"d_p", b.d_p},           {"gamma", k.gamma},
                         {"d_xx", k.d_xx}, {"d_xp", k.d_xp},     {"d_pp", k.d_pp},         {"alpha", ab.alpha},
                         {"beta_re", ab.beta.real()}, {"beta_im", ab.beta.imag()},
                         {"perturbative_warning", p.perturbative_warning()}};
            deliver(gl, "coeffs", kv_csv(j), j);
        } else if (*evolve_linear) {
            const ModelParams p = el_p.resolve(gl);
            const LinearLmeCoefficients k = linear_lme_coefficients(p);
            const GaussianState s0{el_dx2, el_dp2, el_rho};
            if (!s0.physical(1e-12)) throw validation_error("initial state violates dx2 dp2 (1 - rho^2) >= 1");
            const MomentTrajectory tr =
                evolve_moments({el_x0, el_p0}, s0, k, p.r, el_tmax, el_tol, uniform_times(el_tmax, el_samples));
            CsvTable t;
            t.header = {"t", "x", "p", "dx2", "dp2", "rho", "hup_product"};
            json rows = json::array();
            for (std::size_t i = 0; i < tr.times.size(); ++i) {
                const auto& f = tr.first[i];
                const auto& s = tr.second[i];
                t.rows.push_back({format_double(tr.times[i]), format_double(f.x), format_double(f.p),
                                  format_double(s.dx2), format_double(s.dp2), format_double(s.rho),
                                  format_double(s.hup_product())});
                rows.push_back({{"t", tr.times[i]}, {"x", f.x}, {"p", f.p}, {"dx2", s.dx2}, {"dp2", s.dp2},
                                {"rho", s.rho}, {"hup_product", s.hup_product()}});
            }
            const double kin = kinetic_momentum_check(tr, k, p.r);
            std::cerr << "kinetic-momentum closed-form deviation: " << kin << "\n";
            deliver(gl, "evolve_linear", to_csv(t), {{"trajectory", rows}, {"kinetic_momentum_deviation", kin}});
        } else if (*stationary_linear) {
            const ModelParams p = sl_p.resolve(gl);
            const LinearLmeCoefficients k = linear_lme_coefficients(p);
            json j = diag_json(diagnose(stationary_gaussian(k), p.tau));
            if (sl_bmme) {
                const BmmeStationary b = bmme_stationary(k);
                j["bmme_dx2"] = b.state.dx2;
                j["bmme_dp2"] = b.state.dp2;
                j["bmme_hup_product"] = b.state.hup_product();
                j["bmme_hup_violation"] = b.hup_violation;
            }
            deliver(gl, "stationary_linear", kv_csv(j), j);
        } else if (*evolve_quadratic) {
            const ModelParams p = eq_p.resolve(gl);
            const QuadraticSource src = quadratic_source(gl, eq_coeffs);
            std::cerr << "quadratic coefficients: " << src.describe() << "\n";
            ClosureOptions o;
            o.samples = eq_samples;
            const ClosureRun run = evolve_closure({}, src.lme_at(p), eq_tmax, eq_tol, o);
            CsvTable t;
            t.header = {"t", "dx2", "dp2", "c", "rho", "rs_determinant"};
            json rows = json::array();
            for (std::size_t i = 0; i < run.trajectory.times.size(); ++i) {
                const auto& s = run.trajectory.states[i];
                t.rows.push_back({format_double(run.trajectory.times[i]), format_double(s.dx2), format_double(s.dp2),
                                  format_double(s.c), format_double(s.rho()), format_double(s.rs_determinant())});
                rows.push_back({{"t", run.trajectory.times[i]}, {"dx2", s.dx2}, {"dp2", s.dp2}, {"c", s.c}});
            }
            const auto& r = run.report;
            const json rep{{"status", std::string(status_name(r.status))},
                           {"window_variation", r.window_variation},
                           {"t_reached", r.t_reached},
                           {"failure", std::string(reason_code(r.failure))},
                           {"min_rs_determinant", r.min_rs_determinant}};
            std::cerr << "status: " << rep.dump() << "\n";
            deliver(gl, "evolve_quadratic", to_csv(t), {{"trajectory", rows}, {"report", rep}});
            if (r.failure == Reason::StateCollapse) return 2;
        } else if (*stationary_quadratic) {
            const ModelParams p = sq_p.resolve(gl);
            const QuadraticSource src = quadratic_source(gl, sq_coeffs);
            const auto q = src.lme_at(p);
            const ClosureRun run = evolve_closure({}, q, sq_tmax, 1e-9);
            if (run.report.status != ConvergenceStatus::Converged)
                throw numerical_error(Reason::NotConverged, std::string("closure evolution ") +
                                                                std::string(status_name(run.report.status)) +
                                                                "; no stationary seed");
            const NewtonResult nr = stationary_newton(q, *run.report.terminal);
            json j = diag_json(diagnose(nr.root.gaussian(), p.tau));
            j["c"] = nr.root.c;
            j["residual"] = nr.residual;
            j["stable"] = is_stable(nr.root, q);
            deliver(gl, "stationary_quadratic", kv_csv(j), j);
        } else if (*sweep) {
            json cj = gl.cfg;
            if (!sw_preset.empty()) cj["preset"] = sw_preset;
            if (!cj.contains("preset") && gl.config.empty())
                throw validation_error("sweep: give --preset or --config");
            const SweepConfig cfg = SweepConfig::from_json(cj);
            const GridResult res = run_sweep(cfg, gl.jobs);
            const std::string stem = !cfg.output.empty() ? cfg.output
                                     : !cfg.preset.empty()
                                         ? cfg.preset
                                         : name_of(mode_names(), cfg.mode) + "_" + name_of(quantity_names(), cfg.quantity);
            if (gl.out.empty()) {
                std::cout << (output_format(gl) == OutputFormat::Csv ? grid_csv(res) : grid_json(res).dump(1) + "\n");
            } else {
                for (const auto& f : emit(res, gl.out, stem, output_format(gl))) std::cerr << "wrote " << f.string() << "\n";
            }
        } else if (*boundary) {
            if (bd_tau.size() != 3 || bd_lam.size() != 3) throw validation_error("--tau-range/--lam-range: lo hi n");
            const AxisSpec ta{bd_tau[0], bd_tau[1], static_cast<int>(bd_tau[2]), true};
            const AxisSpec la{bd_lam[0], bd_lam[1], static_cast<int>(bd_lam[2]), true};
            if (!(ta.lo > 0) || ta.hi < ta.lo || ta.n < 2 || !(la.lo > 0) || la.hi < la.lo || la.n < 2)
                throw validation_error("boundary: ranges must be positive with n >= 2");
            if (!(bd_g > 0)) throw validation_error("--g: must be > 0");
            const BoundaryResult b = cooling_boundary(bd_g, ta, la, gl.jobs);
            json segs = json::object();
            for (const auto& [name, c] : {std::pair<const char*, const Contour*>{"lme", &b.lme}, {"bmme", &b.bmme}}) {
                json arr = json::array();
                for (const auto& [a, e] : c->segments) {
                    const auto [t0, l0] = b.to_params(a);
                    const auto [t1, l1] = b.to_params(e);
                    arr.push_back({{t0, l0}, {t1, l1}});
                }
                segs[name] = arr;
            }
            const json j{{"g", bd_g},
                         {"hausdorff_grid_steps", std::isfinite(b.hausdorff_steps) ? json(b.hausdorff_steps) : json("inf")},
                         {"note", b.note},
                         {"segments", segs}};
            std::cerr << "Hausdorff distance (grid steps): " << b.hausdorff_steps << (b.note.empty() ? "" : "; ") << b.note
                      << "\n";
            deliver(gl, "boundary", boundary_csv(b), j);
        } else if (*threshold) {
            if (th_g.size() != 2) throw validation_error("--g-range: lo hi");
            const QuadraticSource src = quadratic_source(gl, th_coeffs);
            const ThresholdResult r = threshold_scan(src, th_lam, th_tau, th_g[0], th_g[1], th_tmax, th_tol);
            const json j{{"found", r.found},         {"g_lo", r.lo},
                         {"g_hi", r.hi},             {"status_lo", std::string(status_name(r.status_lo))},
                         {"status_hi", std::string(status_name(r.status_hi))}, {"evaluations", r.evaluations},
                         {"note", r.note}};
            deliver(gl, "threshold", kv_csv(j), j);
        } else if (*oracle) {
            const ModelParams p = or_p.resolve(gl);
            const LinearLmeCoefficients k = linear_lme_coefficients(p);
            const FockOperators ops = build_operators(or_dim);
            DensityMatrix rho0 = fock_state(or_dim, 0);
            json init{{"kind", "ground"}};
            if (gl.seed) {
                std::mt19937_64 rng(*gl.seed);
                std::uniform_real_distribution<double> u(0.0, 1.0);
                const double dx2 = 1.0 + u(rng), dp2 = 1.0 + u(rng);
                const double rho = (2.0 * u(rng) - 1.0) * std::sqrt(std::max(0.0, 1.0 - 1.0 / (dx2 * dp2)));
                const FirstMoments m{u(rng) - 0.5, u(rng) - 0.5};
                rho0 = gaussian_density({dx2, dp2, rho}, m, or_dim);
                init = {{"kind", "random-gaussian"}, {"seed", *gl.seed}, {"dx2", dx2}, {"dp2", dp2}, {"rho", rho},
                        {"x", m.x}, {"p", m.p}};
            }
            const Generator gen = or_bmme ? bmme_generator(k, ops) : Generator(linear_lme_generator(k, p.r, ops));
            EvolveOptions o;
            o.dt = or_dt;
            const EvolveReport rep = evolve_density(rho0, gen, or_tmax, ops, o);
            const GaussianState c = rep.moments.back().central();
            const GaussianState ref = stationary_gaussian(k);
            json j{{"generator", or_bmme ? "bmme" : "lme"},
                   {"initial", init},
                   {"trace_err", rep.trace_err},
                   {"hermiticity_err", rep.hermiticity_err},
                   {"min_eig", rep.min_eig},
                   {"min_eig_time", rep.min_eig_time},
                   {"trunc_pop", rep.trunc_pop},
                   {"trusted", rep.trusted},
                   {"dx2", c.dx2},
                   {"dp2", c.dp2},
                   {"rho", c.rho},
                   {"stationary_dx2", ref.dx2},
                   {"stationary_dp2", ref.dp2}};
            if (rep.min_eig >= -1e-8) {
                const HupCertificate h = hup_certificate(rep.final, ops);
                j["hup_product"] = h.product;
                j["hup_pass"] = h.pass;
            }
            json flat = j;
            flat.erase("initial");
            deliver(gl, "oracle", kv_csv(flat), j);
            if (!rep.trusted) {
                std::cerr << "warning: truncation untrusted (top-level population " << rep.trunc_pop << ")\n";
                return 2;
            }
        } else if (*check) {
            const ModelParams p = cl_p.resolve(gl);
            SweepConfig sc;
            sc.mode = SweepMode::CheckLindblad;
            sc.r = p.r;
            const CellValue v = detail::linear_cell(sc, p.g, p.lam, p.tau);
            const auto& c = std::get<LindbladCheckCell>(v);
            const json j{{"g", p.g},
                         {"lam", p.lam},
                         {"tau", p.tau},
                         {"identity_residual", c.identity_residual},
                         {"roundtrip_residual", c.roundtrip_residual},
                         {"lme_kappa_min_eig", c.lme_kappa_min_eig},
                         {"bmme_kappa_min_eig", c.bmme_kappa_min_eig}};
            deliver(gl, "check_lindblad", kv_csv(j), j);
        }
    } catch (const Error& e) {
        std::cerr << "error [" << reason_code(e.reason()) << "]: " << e.what() << "\n";
        return exit_code(e);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error [invalid-input]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
