#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <sstream>

#include "cavtomo/config.hpp"
#include "cavtomo/fit_io.hpp"

using namespace cavtomo;

namespace {

IniFile parse(const std::string& text) {
    std::istringstream ss(text);
    return IniFile::parse_stream(ss, "test.ini");
}

const char* kGoodConfig = R"(
# device under test
[cavity]
omega_c_ueV = 0.0
delta_omega_ueV = 63.0
kappa_h_ueV = 105.0   # broad mode
kappa_v_ueV = 86.0
eta_out = 0.53

[coupling]
eta_in = 0.96
input_state = D

[scan]
omega_min_ueV = -300
omega_max_ueV = 300
points = 201
input_intensity = 1.0
device_label = pillar-A

[noise]
kind = gaussian-relative
level = 0.01
seed = 42

[fit]
stage = full
weight_r_tot = 1.0
multistart_eta_in = 0.3, 0.9
init_kappa_h_ueV = 100.0
)";

} // namespace

TEST_CASE("a complete config loads into typed sections") {
    const RunConfig rc = load_run_config(parse(kGoodConfig));
    CHECK(rc.has_cavity);
    CHECK(rc.cavity.delta_omega == 63.0);
    CHECK(rc.cavity.kappa_v == 86.0);
    CHECK(rc.has_coupling);
    CHECK(rc.coupling.eta_in == 0.96);
    CHECK(stokes_from_jones(rc.coupling.input_state).s_da == Catch::Approx(1.0));
    CHECK(rc.has_scan);
    REQUIRE(rc.scan.omega_grid.size() == 201);
    CHECK(rc.scan.omega_grid.front() == -300.0);
    CHECK(rc.scan.omega_grid.back() == 300.0);
    CHECK(rc.device_label == "pillar-A");
    CHECK(rc.scan.noise.kind == NoiseModel::Kind::gaussian_relative);
    CHECK(rc.scan.noise.level == 0.01);
    CHECK(rc.scan.seed == 42);
    CHECK(rc.fit.stage == "full");
    REQUIRE(rc.fit.config.multistart_eta_in.size() == 2);
    CHECK(rc.fit.config.multistart_eta_in[1] == 0.9);
    CHECK(rc.fit.config.initial[kKappaH] == 100.0);
    CHECK(std::isnan(rc.fit.config.initial[kKappaV]));
}

TEST_CASE("unknown keys and sections are schema errors that name the offender") {
    CHECK_THROWS_WITH(load_run_config(parse("[cavity]\nkappa_h_ueV = 105\n"
                                            "kappa_v_ueV = 86\nkapa_h_ueV = 1\n")),
                      Catch::Matchers::ContainsSubstring("kapa_h_ueV"));
    CHECK_THROWS_WITH(load_run_config(parse("[cavities]\nx = 1\n")),
                      Catch::Matchers::ContainsSubstring("[cavities]"));
    CHECK_THROWS_WITH(load_run_config(parse("[cavity]\nkappa_h_ueV = 105\n")),
                      Catch::Matchers::ContainsSubstring("kappa_v_ueV"));
    CHECK_THROWS_AS(load_run_config(parse("[cavity]\nkappa_h_ueV = abc\n"
                                          "kappa_v_ueV = 86\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_run_config(parse("[noise]\nkind = white\n")), ConfigError);
    CHECK_THROWS_AS(load_run_config(parse("[fit]\nstage = bayesian\n")), ConfigError);
    CHECK_THROWS_AS(load_run_config(parse("[fit]\nfree = eta_inn\n")), ConfigError);
    CHECK_THROWS_AS(
        load_run_config(parse("[coupling]\neta_in = 0.9\ninput_state = D\n"
                              "input_theta_rad = 1.0\n")),
        ConfigError);
    CHECK_THROWS_AS(parse("[unclosed\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("just some text\n"), ConfigError);
}

TEST_CASE("CAVTOMO_SEED overrides the config seed") {
    setenv("CAVTOMO_SEED", "777", 1);
    const RunConfig rc = load_run_config(parse("[noise]\nseed = 3\n"));
    CHECK(rc.scan.seed == 777);
    setenv("CAVTOMO_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(load_run_config(parse("[noise]\nseed = 3\n")), ConfigError);
    unsetenv("CAVTOMO_SEED");
    const RunConfig plain = load_run_config(parse("[noise]\nseed = 3\n"));
    CHECK(plain.scan.seed == 3);
}

TEST_CASE("input state can come from Poincare angles") {
    const RunConfig rc = load_run_config(
        parse("[coupling]\neta_in = 0.5\ninput_theta_rad = 1.5707963267948966\n"
              "input_phi_rad = 1.5707963267948966\n"));
    const StokesVector s = stokes_from_jones(rc.coupling.input_state);
    CHECK(s.s_rl == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("linspace hits both endpoints exactly") {
    const auto grid = linspace(-1.5, 2.5, 9);
    REQUIRE(grid.size() == 9);
    CHECK(grid.front() == -1.5);
    CHECK(grid.back() == 2.5);
    CHECK(grid[4] == Catch::Approx(0.5).margin(1e-15));
    CHECK_THROWS_AS(linspace(0, 1, 0), InvalidArgumentError);
}

TEST_CASE("fit result serialization carries the full report") {
    FitResult fit;
    fit.converged = true;
    fit.status = "gradient below tolerance";
    fit.iterations = 12;
    fit.residual_norm = 0.25;
    fit.n_residuals = 800;
    // exactly representable values keep the %.17g output short
    fit.estimates = {0.0, 63.0, 105.0, 86.0, 0.53125, 0.75, 1.5, 0.0};
    fit.std_errors[kEtaIn] = 0.0625;
    fit.free[kEtaIn] = fit.free[kEtaOut] = true;
    fit.free_names = {"eta_out", "eta_in"};
    fit.covariance = Eigen::MatrixXd::Identity(2, 2) * 0.25;

    std::ostringstream out;
    write_fit_result(out, fit, {"example"});
    const std::string text = out.str();
    CHECK(text.find("# example") != std::string::npos);
    CHECK(text.find("converged = true") != std::string::npos);
    CHECK(text.find("param.eta_in = 0.75") != std::string::npos);
    CHECK(text.find("stderr.eta_in = 0.0625") != std::string::npos);
    CHECK(text.find("covariance_order = eta_out,eta_in") != std::string::npos);
    CHECK(text.find("residual_norm = 0.25") != std::string::npos);
    CHECK(text.find("# fixed") != std::string::npos);

    std::ostringstream branch_out;
    BranchDiagnostics diag;
    diag.candidate_low = 0.32;
    diag.candidate_high = 0.96;
    diag.chosen = BranchChoice::high;
    write_branch_diagnostics(branch_out, diag);
    CHECK(branch_out.str().find("chosen = high") != std::string::npos);
    CHECK(branch_out.str().find("ambiguous = false") != std::string::npos);
}
