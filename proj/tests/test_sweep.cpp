#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "lqbm/io.hpp"
#include "lqbm/phase_space.hpp"
#include "lqbm/sweep.hpp"

using namespace lqbm;
using nlohmann::json;

namespace {

std::string error_message(const json& j) {
    try {
        SweepConfig::from_json(j);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        return e.what();
    }
    ADD_FAILURE() << "accepted " << j.dump();
    return {};
}

SweepConfig small_linear(Quantity q, int n_tau, int n_lam) {
    SweepConfig c;
    c.mode = SweepMode::Linear;
    c.quantity = q;
    c.g = {0.8};
    c.tau = {0.05, 4.0, n_tau, true};
    c.lam = {2.0, 20.0, n_lam, true};
    return c;
}

std::size_t column(const CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return i;
    ADD_FAILURE() << "no column " << name;
    return 0;
}

} // namespace

TEST(Config, ErrorsNameTheField) {
    EXPECT_NE(error_message({{"tolerances", {{"odee", 1e-9}}}}).find("tolerances.odee"), std::string::npos);
    EXPECT_NE(error_message({{"g", {0.1, -0.2}}}).find("g[1]"), std::string::npos);
    EXPECT_NE(error_message({{"tau_range", {{"lo", 0.1}, {"hi", 1.0}, {"n", 0}}}}).find("tau_range.n"),
              std::string::npos);
    EXPECT_NE(error_message({{"lam_range", {{"lo", -1.0}, {"hi", 1.0}, {"n", 3}}}}).find("lam_range"),
              std::string::npos);
    EXPECT_NE(error_message({{"bogus", 1}}).find("bogus"), std::string::npos);
    EXPECT_NE(error_message({{"preset", "fig99"}}).find("fig99"), std::string::npos);
    EXPECT_NE(error_message({{"mode", "quadratic"}}).find("quadratic_coefficients"), std::string::npos);
    EXPECT_NE(error_message({{"quantity", "convergence"}}).find("quantity"), std::string::npos);
    EXPECT_NE(error_message({{"fock_dim", 2}}).find("fock_dim"), std::string::npos);
}

TEST(Config, PresetsParse) {
    for (const char* name : {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "quadratic-theta"}) {
        const SweepConfig c = SweepConfig::from_json({{"preset", name}});
        EXPECT_EQ(c.preset, name);
        if (c.quantity != Quantity::Convergence) {
            EXPECT_EQ(c.tau.n, 100) << name;
            EXPECT_EQ(c.lam.n, 100) << name;
        }
    }
    const SweepConfig f8 = SweepConfig::from_json({{"preset", "fig8"}});
    EXPECT_EQ(f8.g.size(), 10u);
    EXPECT_EQ(f8.tau.values(), std::vector<double>{4.0});
    EXPECT_EQ(f8.lam.values(), std::vector<double>{16.0});
    const SweepConfig f3 = SweepConfig::from_json({{"preset", "fig3"}});
    EXPECT_EQ(f3.g, (std::vector<double>{0.2, 0.4, 0.5, 0.6, 0.8, 1.0}));
}

TEST(Config, UserKeysOverridePreset) {
    const SweepConfig c = SweepConfig::from_json({{"preset", "fig1"}, {"g", 0.5}, {"tau_range", {{"n", 7}}}});
    EXPECT_EQ(c.g, std::vector<double>{0.5});
    EXPECT_EQ(c.tau.n, 7);
    EXPECT_DOUBLE_EQ(c.tau.lo, 0.05);
}

TEST(Config, JsonRoundTrip) {
    const SweepConfig a = SweepConfig::from_json({{"preset", "fig6"}, {"t_max", 123.0}, {"tolerances", {{"ode", 1e-8}}}});
    const SweepConfig b = SweepConfig::from_json(a.to_json());
    EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Axis, EndpointsExactAndMonotone) {
    const AxisSpec a{0.05, 4.0, 37, true};
    const auto v = a.values();
    EXPECT_EQ(v.front(), 0.05);
    EXPECT_EQ(v.back(), 4.0);
    for (std::size_t i = 1; i < v.size(); ++i) {
        EXPECT_GT(v[i], v[i - 1]);
        if (i > 1) {
            EXPECT_NEAR(v[i] / v[i - 1], v[1] / v[0], 1e-12);
        }
    }
    const auto lin = AxisSpec{1.0, 2.0, 5, false}.values();
    EXPECT_DOUBLE_EQ(lin[2], 1.5);
}

TEST(Sweep, SingleCellCsvRoundTrip) {
    SweepConfig c = small_linear(Quantity::Eta, 1, 1);
    c.tau = {0.7, 0.7, 1, false};
    c.lam = {9.0, 9.0, 1, false};
    const GridResult g = run_sweep(c);
    ASSERT_EQ(g.cells.size(), 1u);
    const CsvTable t = parse_csv(grid_csv(g));
    ASSERT_EQ(t.rows.size(), 1u);
    const PhaseSpaceDiagnostics want = stationary_diagnostics({0.8, 9.0, 0.7, 0.0});
    EXPECT_EQ(parse_double(t.rows[0][column(t, "eta")]), want.eta);
    EXPECT_EQ(parse_double(t.rows[0][column(t, "dx2")]), want.dx2);
    EXPECT_EQ(parse_double(t.rows[0][column(t, "chi")]), want.chi);
    EXPECT_EQ(t.rows[0][column(t, "status")], "ok");
}

TEST(Sweep, FiftyByFiftyLinearGrid) {
    const GridResult g = run_sweep(small_linear(Quantity::Theta, 50, 50), 4);
    const std::string csv = grid_csv(g);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2501);
    const CsvTable t = parse_csv(csv);
    const std::size_t th = column(t, "theta_over_pi"), eta = column(t, "eta");
    for (const auto& r : t.rows) {
        EXPECT_EQ(r[column(t, "status")], "ok");
        if (r[th] != "isotropic") {
            const double v = parse_double(r[th]);
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        const double e = parse_double(r[eta]);
        EXPECT_GE(e, 0.0);
        EXPECT_LT(e, 1.0);
    }
}

TEST(Sweep, CellOrderAndValuesMatchPointEvaluation) {
    SweepConfig c = small_linear(Quantity::Chi, 4, 3);
    c.g = {0.3, 0.8};
    const GridResult g = run_sweep(c);
    ASSERT_EQ(g.cells.size(), 24u);
    std::size_t i = 0;
    for (const double gv : g.g)
        for (const double lam : g.lam)
            for (const double tau : g.tau) {
                const Cell& cell = g.cells[i++];
                EXPECT_EQ(cell.g, gv);
                EXPECT_EQ(cell.lam, lam);
                EXPECT_EQ(cell.tau, tau);
                const auto& d = std::get<PhaseSpaceDiagnostics>(cell.value);
                EXPECT_EQ(d.chi, stationary_diagnostics({gv, lam, tau, 0.0}).chi);
            }
}

TEST(Sweep, DeterministicAcrossJobCounts) {
    const SweepConfig c = small_linear(Quantity::Eta, 20, 20);
    const std::string a = grid_csv(run_sweep(c, 1));
    EXPECT_EQ(a, grid_csv(run_sweep(c, 1)));
    EXPECT_EQ(a, grid_csv(run_sweep(c, 4)));

    SweepConfig q = SweepConfig::from_json({{"preset", "fig6"}, {"tau_range", {{"n", 6}}}, {"lam_range", {{"n", 5}}}});
    EXPECT_EQ(grid_csv(run_sweep(q, 1)), grid_csv(run_sweep(q, 3)));
}

TEST(Sweep, MinimumOverTemperatureGrid) {
    SweepConfig c = small_linear(Quantity::MinChi, 60, 5);
    c.g = {0.4, 0.8};
    const GridResult g = run_sweep(c);
    EXPECT_TRUE(g.tau.empty());
    ASSERT_EQ(g.cells.size(), 10u);
    const auto taus = c.tau.values();
    for (const Cell& cell : g.cells) {
        const auto& m = std::get<MinCell>(cell.value);
        for (const double t : taus) EXPECT_LE(m.value, stationary_diagnostics({cell.g, cell.lam, t, 0.0}).chi);
    }
    const CsvTable t = parse_csv(grid_csv(g));
    EXPECT_EQ(t.header, (std::vector<std::string>{"g", "lam", "quantity", "min_value", "argmin_tau", "status"}));
}

TEST(Sweep, QuadraticCellsArePhysicalOrCarryReason) {
    const SweepConfig c =
        SweepConfig::from_json({{"preset", "fig9"}, {"tau_range", {{"n", 8}}}, {"lam_range", {{"n", 6}}}});
    const GridResult g = run_sweep(c, 4);
    std::size_t ok = 0;
    for (const Cell& cell : g.cells) {
        if (const auto* q = std::get_if<QuadraticCell>(&cell.value)) {
            ++ok;
            EXPECT_GE(q->state.rs_determinant(), 1.0 - 1e-9);
            EXPECT_GE(q->diag.hup_product, 1.0 - 1e-9);
        } else {
            EXPECT_NE(std::get<ErrorCell>(cell.value).reason, Reason::None);
        }
    }
    EXPECT_GT(ok, 0u);
    EXPECT_EQ(g.metadata.at("quadratic_source"), "linear-bmme surrogate (non-physical)");
}

TEST(Sweep, ErrorCellsKeepCompleteRecords) {
    SweepConfig c = SweepConfig::from_json(
        {{"mode", "quadratic"},
         {"quantity", "eta"},
         {"g", 0.1},
         {"tau_range", {{"lo", 1.0}, {"hi", 2.0}, {"n", 2}, {"scale", "linear"}}},
         {"lam_range", {{"lo", 10.0}, {"hi", 10.0}, {"n", 1}, {"scale", "linear"}}},
         {"quadratic_coefficients",
          {{"table", {{{"g", 0.1}, {"lam", 10.0}, {"tau", 1.0}, {"d_xx", 0.1}, {"d_xp", 0.0}, {"d_pp", 0.0},
                       {"c_xp", 0.05}, {"c_pp", 0.0}}}}}}});
    const GridResult g = run_sweep(c);
    ASSERT_EQ(g.cells.size(), 2u);
    for (const Cell& cell : g.cells) EXPECT_FALSE(cell.ok());
    const CsvTable t = parse_csv(grid_csv(g));
    for (const auto& r : t.rows) {
        EXPECT_EQ(r.size(), t.header.size());
        EXPECT_EQ(r[column(t, "status")], "missing-coefficients");
        EXPECT_EQ(r[column(t, "eta")], "");
    }
    const json j = grid_json(g);
    EXPECT_TRUE(j.at("cells")[0].at("eta").is_null());
    EXPECT_TRUE(j.at("cells")[0].contains("message"));
}

TEST(Sweep, ConvergenceReportColumns) {
    SweepConfig c = SweepConfig::from_json({{"preset", "fig8"}, {"g", {0.1, 0.5}}});
    const GridResult g = run_sweep(c, 2);
    const CsvTable t = parse_csv(grid_csv(g));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][column(t, "status")], "converged");
    EXPECT_NE(t.rows[0][column(t, "terminal_dx2")], "");
    EXPECT_NE(t.rows[1][column(t, "status")], "converged");
    EXPECT_EQ(t.rows[1][column(t, "terminal_dx2")], "");
}

TEST(Sweep, EmitWritesDataAndMetadata) {
    const auto dir = std::filesystem::temp_directory_path() / "lqbm_test_emit";
    std::filesystem::remove_all(dir);
    const SweepConfig c = small_linear(Quantity::Eta, 3, 2);
    const GridResult g = run_sweep(c);
    const auto files = emit(g, dir, "grid", OutputFormat::Json);
    ASSERT_EQ(files.size(), 2u);
    const json data = read_json(dir / "grid.json");
    const json meta = read_json(dir / "grid.meta.json");
    EXPECT_EQ(data.at("cells").size(), 6u);
    EXPECT_EQ(meta.at("config_hash"), hex64(fnv1a64(c.to_json().dump())));
    EXPECT_EQ(data.at("config_hash"), meta.at("config_hash"));
    EXPECT_EQ(meta.at("cells"), 6);
    emit(g, dir, "grid", OutputFormat::Csv);
    EXPECT_EQ(read_text(dir / "grid.csv"), grid_csv(g));
    std::filesystem::remove_all(dir);
}

TEST(Contours, MarchingSquaresStraightLine) {
    std::vector<std::vector<double>> f(5, std::vector<double>(6));
    for (std::size_t y = 0; y < 5; ++y)
        for (std::size_t x = 0; x < 6; ++x) f[y][x] = static_cast<double>(x) - 2.5;
    const Contour c = marching_squares(f);
    EXPECT_EQ(c.segments.size(), 4u);
    for (const auto& [a, b] : c.segments) {
        EXPECT_DOUBLE_EQ(a.x, 2.5);
        EXPECT_DOUBLE_EQ(b.x, 2.5);
    }
    EXPECT_EQ(hausdorff(c, c), 0.0);
    Contour shifted = c;
    for (auto& [a, b] : shifted.segments) a.x += 1.0, b.x += 1.0;
    EXPECT_NEAR(hausdorff(c, shifted), 1.0, 1e-12);
    EXPECT_TRUE(std::isinf(hausdorff(c, Contour{})));
}

TEST(Contours, CoolingBoundaryAtStrongCoupling) {
    const BoundaryResult b = cooling_boundary(0.8, {0.05, 10.0, 30, true}, {2.0, 100.0, 30, true}, 4);
    EXPECT_FALSE(b.lme.segments.empty());
    EXPECT_FALSE(b.bmme.segments.empty());
    EXPECT_TRUE(std::isfinite(b.hausdorff_steps));
    // Born-Markov boundary points sit where D_XP changes sign
    for (const auto& [a, e] : b.bmme.segments) {
        const auto [tau, lam] = b.to_params(a);
        const double step = std::log(10.0 / 0.05) / 29.0;
        const double lo = linear_lme_coefficients(ModelParams{0.8, lam, tau * std::exp(-step), 0.0}).d_xp;
        const double hi = linear_lme_coefficients(ModelParams{0.8, lam, tau * std::exp(step), 0.0}).d_xp;
        const double lo_l = linear_lme_coefficients(ModelParams{0.8, lam * 1.15, tau, 0.0}).d_xp;
        const double hi_l = linear_lme_coefficients(ModelParams{0.8, lam / 1.15, tau, 0.0}).d_xp;
        EXPECT_TRUE(lo * hi <= 0.0 || lo_l * hi_l <= 0.0) << tau << " " << lam;
    }
    EXPECT_NE(boundary_csv(b).find("bmme"), std::string::npos);
}

TEST(Contours, WeakCouplingHasNoLindbladCrossing) {
    const BoundaryResult b = cooling_boundary(1e-3, {0.05, 10.0, 20, true}, {2.0, 100.0, 20, true});
    EXPECT_TRUE(b.lme.segments.empty());
    EXPECT_FALSE(b.bmme.segments.empty());
    EXPECT_TRUE(std::isinf(b.hausdorff_steps));
    EXPECT_FALSE(b.note.empty());
}

TEST(Threshold, ZeroCouplingHasNoThreshold) {
    const ThresholdResult r = threshold_scan([](double) { return QuadraticLmeCoefficients{}; }, 0.01, 1.0);
    EXPECT_FALSE(r.found);
    EXPECT_EQ(r.evaluations, 2u);
    EXPECT_NE(r.note.find("no threshold"), std::string::npos);
}

TEST(Threshold, SurrogateBracketAndToleranceStability) {
    const QuadraticSource src = QuadraticSource::linear_surrogate();
    const ThresholdResult a = threshold_scan(src, 16.0, 4.0, 0.05, 0.5, 400.0, 1e-9, 0.005);
    ASSERT_TRUE(a.found);
    EXPECT_LE(a.hi - a.lo, 0.005);
    EXPECT_EQ(a.status_lo, ConvergenceStatus::Converged);
    EXPECT_NE(a.status_hi, ConvergenceStatus::Converged);
    const ThresholdResult b = threshold_scan(src, 16.0, 4.0, 0.05, 0.5, 400.0, 0.5e-9, 0.005);
    ASSERT_TRUE(b.found);
    EXPECT_LT(std::abs(0.5 * (a.lo + a.hi) - 0.5 * (b.lo + b.hi)), 0.01);
}

TEST(Threshold, RejectsBadRange) {
    const QuadraticSource src = QuadraticSource::linear_surrogate();
    EXPECT_THROW(threshold_scan(src, 16.0, 4.0, 0.5, 0.1), Error);
    EXPECT_THROW(threshold_scan(src, 16.0, 4.0, 0.0, 0.1), Error);
}
