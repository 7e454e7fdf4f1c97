#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "lqbm/coefficients.hpp"
#include "lqbm/io.hpp"
#include "lqbm/phase_space.hpp"

using nlohmann::json;

namespace {

struct CliRun {
    int code{};
    std::string out;
};

// stderr is folded into the captured text
CliRun run(const std::string& args) {
    const std::string cmd = std::string("'") + LQBM_CLI_PATH + "' " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, {}};
    CliRun r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string data_file(const char* name) { return std::string(LQBM_SOURCE_DIR) + "/data/" + name; }

std::filesystem::path scratch(const char* name) {
    auto d = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(d);
    return d;
}

} // namespace

TEST(Cli, CoefficientsMatchLibrary) {
    const CliRun r = run("--format json coeffs --g 0.8 --lam 10 --tau 0.5");
    ASSERT_EQ(r.code, 0) << r.out;
    const json j = json::parse(r.out);
    const lqbm::LinearLmeCoefficients c = lqbm::linear_lme_coefficients(lqbm::ModelParams{0.8, 10.0, 0.5, 0.0});
    EXPECT_EQ(j.at("d_xx").get<double>(), c.d_xx);
    EXPECT_EQ(j.at("d_xp").get<double>(), c.d_xp);
    EXPECT_EQ(j.at("gamma").get<double>(), c.gamma);
    EXPECT_FALSE(j.at("perturbative_warning").get<bool>());
}

TEST(Cli, StationaryLinearCsv) {
    const CliRun r = run("stationary-linear --g 0.8 --lam 10 --tau 0.5");
    ASSERT_EQ(r.code, 0) << r.out;
    const lqbm::CsvTable t = lqbm::parse_csv(r.out);
    ASSERT_EQ(t.rows.size(), 1u);
    const auto d = lqbm::stationary_diagnostics({0.8, 10.0, 0.5, 0.0});
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == "chi") {
            EXPECT_EQ(lqbm::parse_double(t.rows[0][i]), d.chi);
        }
    }
}

TEST(Cli, ConfigSuppliesParameters) {
    const auto dir = scratch("lqbm_cli_cfg");
    std::filesystem::create_directories(dir);
    lqbm::write_text(dir / "c.json", R"({"g": 0.3, "lam": 5.0, "tau": 2.0})");
    const CliRun a = run("--format json --config '" + (dir / "c.json").string() + "' coeffs");
    const CliRun b = run("--format json coeffs --g 0.3 --lam 5 --tau 2");
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(json::parse(a.out), json::parse(b.out));
    const CliRun c = run("--format json --config '" + (dir / "c.json").string() + "' coeffs --g 0.4");
    EXPECT_EQ(json::parse(c.out).at("g").get<double>(), 0.4);
    std::filesystem::remove_all(dir);
}

TEST(Cli, SweepWritesFiles) {
    const auto dir = scratch("lqbm_cli_sweep");
    std::filesystem::create_directories(dir);
    lqbm::write_text(dir / "s.json", R"({"preset": "fig2", "tau_range": {"n": 4}, "lam_range": {"n": 3}})");
    const CliRun r = run("--config '" + (dir / "s.json").string() + "' --out '" + dir.string() + "' --jobs 2 sweep");
    ASSERT_EQ(r.code, 0) << r.out;
    bool csv = false, meta = false;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const std::string n = e.path().filename().string();
        if (n.ends_with(".meta.json")) {
            meta = true;
            EXPECT_EQ(lqbm::read_json(e.path()).at("cells"), 12);
        } else if (n.ends_with(".csv")) {
            csv = true;
            EXPECT_EQ(lqbm::parse_csv(lqbm::read_text(e.path())).rows.size(), 12u);
        }
    }
    EXPECT_TRUE(csv);
    EXPECT_TRUE(meta);
    std::filesystem::remove_all(dir);
}

TEST(Cli, ThresholdWithPlaceholder) {
    const CliRun r = run("--format json threshold --lam 16 --tau 4 --g-range 0.05 0.5 --coefficients '" +
                      data_file("quadratic_placeholder.json") + "'");
    ASSERT_EQ(r.code, 0) << r.out;
    const json j = json::parse(r.out);
    EXPECT_TRUE(j.at("found").get<bool>());
    EXPECT_LE(j.at("g_hi").get<double>() - j.at("g_lo").get<double>(), 0.01);
    EXPECT_EQ(j.at("status_lo"), "converged");
}

TEST(Cli, OracleIsSeeded) {
    const std::string args = "--format json --seed 7 oracle --g 0.5 --lam 5 --tau 1 --dim 20 --t-max 2";
    const CliRun a = run(args), b = run(args);
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out, run("--format json --seed 8 oracle --g 0.5 --lam 5 --tau 1 --dim 20 --t-max 2").out);
}

TEST(Cli, CheckLindblad) {
    const CliRun r = run("--format json check-lindblad --g 0.8 --lam 10 --tau 0.05");
    ASSERT_EQ(r.code, 0) << r.out;
    const json j = json::parse(r.out);
    EXPECT_LT(j.at("identity_residual").get<double>(), 1e-12);
    EXPECT_GE(j.at("lme_kappa_min_eig").get<double>(), -1e-12);
    EXPECT_LT(j.at("bmme_kappa_min_eig").get<double>(), 0.0);
}

TEST(Cli, ValidationErrorsExitOne) {
    EXPECT_EQ(run("coeffs --g -1").code, 1);
    EXPECT_EQ(run("coeffs --g abc").code, 1);
    EXPECT_EQ(run("no-such-command").code, 1);
    EXPECT_EQ(run("sweep --preset fig99").code, 1);
    const CliRun r = run("coeffs --tau -2");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("tau"), std::string::npos);
}

TEST(Cli, NumericalFailureExitsTwo) {
    const auto dir = scratch("lqbm_cli_num");
    std::filesystem::create_directories(dir);
    lqbm::write_text(dir / "q.json", R"({"surrogate": "linear-bmme"})");
    const CliRun r = run("stationary-quadratic --g 0.5 --lam 16 --tau 4 --coefficients '" + (dir / "q.json").string() + "'");
    EXPECT_EQ(r.code, 2) << r.out;
    std::filesystem::remove_all(dir);
}

TEST(Cli, IoFailureExitsThree) {
    EXPECT_EQ(run("--config /nonexistent/lqbm.json coeffs").code, 3);
    EXPECT_EQ(run("evolve-quadratic --coefficients /nonexistent/q.json").code, 3);
}
