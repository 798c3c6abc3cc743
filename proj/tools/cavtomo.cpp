// cavtomo command-line front end: simulate tomography scans, reconstruct
// measured datasets, run parameter fits and export plot-ready tables.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 fit did not
// converge, 5 ambiguous coupling branch.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavtomo/branch.hpp"
#include "cavtomo/config.hpp"
#include "cavtomo/dataset_io.hpp"
#include "cavtomo/fit.hpp"
#include "cavtomo/fit_io.hpp"
#include "cavtomo/manifest.hpp"
#include "cavtomo/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitAmbiguous = 5;

// CAVTOMO_OUTDIR prefixes relative output paths.
std::string resolve_output(const std::string& path) {
    const char* outdir = std::getenv("CAVTOMO_OUTDIR");
    if (!outdir || *outdir == '\0' || path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(outdir) / p).string();
}

std::vector<cavtomo::CurveRow> curve_rows_from_points(
    const std::vector<double>& omega, const std::vector<cavtomo::PointEstimate>& points) {
    std::vector<cavtomo::CurveRow> rows;
    rows.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        rows.push_back({omega[i], p.r_total, p.stokes.s_hv, p.stokes.s_da,
                        p.stokes.s_rl, p.purity});
    }
    return rows;
}

std::vector<cavtomo::CurveRow> curve_rows_from_model(
    const cavtomo::CavityParams& params, const cavtomo::CouplingConfig& coupling,
    const std::vector<double>& grid) {
    std::vector<cavtomo::CurveRow> rows;
    rows.reserve(grid.size());
    for (const auto& pt : cavtomo::scan_curves(params, coupling, grid))
        rows.push_back({pt.omega, pt.outcome.r_total, pt.outcome.stokes.s_hv,
                        pt.outcome.stokes.s_da, pt.outcome.stokes.s_rl,
                        cavtomo::degree_of_polarization(pt.outcome.stokes)});
    return rows;
}

struct SimulateArgs {
    std::string config_path;
    std::string output_path;
};

int run_simulate(const SimulateArgs& args) {
    using namespace cavtomo;
    const RunConfig rc = load_run_config(args.config_path);
    if (!rc.has_cavity || !rc.has_coupling || !rc.has_scan)
        throw ConfigError("simulate needs the [cavity], [coupling] and [scan] sections");

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.config_path = args.config_path;
    manifest.seed = rc.scan.seed;
    manifest.has_seed = true;
    const std::string out_path = resolve_output(args.output_path);
    manifest.outputs = {out_path};
    manifest.log(std::cerr);

    ScanDataset data = simulate_scan(rc.cavity, rc.coupling, rc.scan);
    data.metadata.device_label = rc.device_label;
    write_dataset_csv(out_path, data, manifest.comment_lines());
    write_metadata_sidecar(out_path, data.metadata, manifest.comment_lines());
    return kExitOk;
}

struct ReconstructArgs {
    std::string input_path;
    std::string output_path;
    std::string poincare_path;
    double noise_level = -1.0;
};

int run_reconstruct(const ReconstructArgs& args) {
    using namespace cavtomo;
    const ScanDataset data = read_dataset_csv(args.input_path);
    const double noise_level =
        args.noise_level >= 0.0 ? args.noise_level : data.metadata.noise.level;

    RunManifest manifest;
    manifest.command = "reconstruct";
    manifest.inputs = {args.input_path};
    const std::string out_path = resolve_output(args.output_path);
    manifest.outputs = {out_path};
    manifest.log(std::cerr);

    std::vector<PointEstimate> points;
    points.reserve(data.records.size());
    for (const auto& rec : data.records) {
        points.push_back(reconstruct_point(rec.sextet, rec.input_intensity, noise_level));
        if (points.back().clamped)
            std::cerr << "warning: R_tot = " << points.back().r_total_raw
                      << " clamped at omega = " << rec.omega << "\n";
    }
    for (std::size_t idx : inconsistent_points(data, noise_level))
        std::cerr << "warning: basis-pair sums disagree beyond 5x noise at omega = "
                  << data.records[idx].omega << "\n";

    const auto rows = curve_rows_from_points(data.omega_grid(), points);
    write_curves_csv(out_path, rows, manifest.comment_lines());
    if (!args.poincare_path.empty())
        write_poincare_csv(resolve_output(args.poincare_path), rows,
                           manifest.comment_lines());
    return kExitOk;
}

struct FitArgs {
    std::string config_path;
    std::string stage_override;
    std::string input_diag;
    std::string input_h;
    std::string input_v;
    std::string output_path;
    std::string branch_path;
    std::string profile_path;
    std::string curves_path;
};

int run_fit(const FitArgs& args) {
    using namespace cavtomo;
    const RunConfig rc = load_run_config(args.config_path);
    const std::string stage =
        args.stage_override.empty() ? rc.fit.stage : args.stage_override;

    RunManifest manifest;
    manifest.command = "fit --stage " + stage;
    manifest.config_path = args.config_path;
    const std::string out_path = resolve_output(args.output_path);
    manifest.outputs = {out_path};

    if (stage == "eigenmode") {
        if (args.input_h.empty() || args.input_v.empty())
            throw ConfigError("eigenmode stage needs --input-h and --input-v datasets");
        manifest.inputs = {args.input_h, args.input_v};
        manifest.log(std::cerr);
        const ScanDataset dh = read_dataset_csv(args.input_h);
        const ScanDataset dv = read_dataset_csv(args.input_v);
        const EigenmodeFit em = fit_eigenmode(dh, dv, rc.fit.config);
        write_fit_result(out_path, em.fit, manifest.comment_lines());
        const std::string profile_path = resolve_output(
            args.profile_path.empty() ? args.output_path + ".profile.csv"
                                      : args.profile_path);
        write_degeneracy_profile(profile_path, em.profile, manifest.comment_lines());
        if (em.fit.rank_deficient())
            std::cerr << "note: unresolved parameter subspace:";
        for (const auto& name : em.fit.unresolved) std::cerr << ' ' << name;
        if (em.fit.rank_deficient()) std::cerr << "\n";
        if (!em.fit.converged) {
            std::cerr << "fit did not converge: " << em.fit.status << "\n";
            return kExitNoConvergence;
        }
        return kExitOk;
    }

    if (stage != "full" && stage != "joint")
        throw ConfigError("unknown fit stage '" + stage + "'");
    if (args.input_diag.empty())
        throw ConfigError("fit needs --input with the tomography dataset");
    if (stage == "joint" && (args.input_h.empty() || args.input_v.empty()))
        throw ConfigError("joint stage needs --input-h and --input-v datasets");

    manifest.inputs = {args.input_diag};
    if (stage == "joint") {
        manifest.inputs.push_back(args.input_h);
        manifest.inputs.push_back(args.input_v);
    }
    manifest.log(std::cerr);

    const ScanDataset data = read_dataset_csv(args.input_diag);
    FitResult fit;
    if (stage == "full") {
        fit = fit_full(data, rc.fit.config);
    } else {
        const ScanDataset dh = read_dataset_csv(args.input_h);
        const ScanDataset dv = read_dataset_csv(args.input_v);
        fit = fit_joint(dh, dv, data, rc.fit.config);
    }

    // Branch diagnostics: candidates matching the measured purity dip,
    // resolved by the amplitude of the Poincare rotation.
    const auto points = reconstruct_scan(data);
    double measured_min_purity = 2.0;
    for (const auto& p : points)
        measured_min_purity = std::min(measured_min_purity, p.purity);
    const CavityParams fitted_cavity = fit.cavity();
    const JonesVector fitted_input = fit.coupling().input_state;
    const auto candidates = branch_candidates(fitted_cavity, fitted_input,
                                              measured_min_purity, data.omega_grid());
    const BranchDiagnostics diag =
        resolve_branch(data, fitted_cavity, fitted_input, candidates,
                       rc.fit.branch_ambiguity_tol);

    {
        auto out = cavtomo::detail::open_output(out_path);
        write_fit_result(out, fit, manifest.comment_lines());
        if (rc.fit.bootstrap_replicas > 0) {
            const BootstrapResult boot = parametric_bootstrap(
                data, fit, rc.fit.config, rc.fit.bootstrap_replicas, rc.scan.seed);
            write_bootstrap_result(out, boot);
        }
    }
    write_branch_diagnostics(resolve_output(args.branch_path.empty()
                                                ? args.output_path + ".branch.txt"
                                                : args.branch_path),
                             diag, manifest.comment_lines());

    // Fitted-curve table for overlay plots.
    const auto rows =
        curve_rows_from_model(fitted_cavity, fit.coupling(), data.omega_grid());
    if (args.curves_path.empty())
        write_curves_csv(std::cout, rows, manifest.comment_lines());
    else
        write_curves_csv(resolve_output(args.curves_path), rows,
                         manifest.comment_lines());

    if (fit.rank_deficient()) {
        std::cerr << "note: unresolved parameter subspace:";
        for (const auto& name : fit.unresolved) std::cerr << ' ' << name;
        std::cerr << "\n";
    }
    if (!fit.converged) {
        std::cerr << "fit did not converge: " << fit.status << "\n";
        return kExitNoConvergence;
    }
    if (diag.ambiguous) {
        std::cerr << "branch ambiguity: rotation metrics "
                  << diag.rotation_low << " / " << diag.rotation_high
                  << " both compatible with measured " << diag.rotation_measured
                  << "; keeping both candidates\n";
        return kExitAmbiguous;
    }
    return kExitOk;
}

struct PurityMapArgs {
    std::string config_path;
    std::string output_path;
    double eta_min = 0.0;
    double eta_max = 1.0;
    int eta_points = 101;
};

int run_purity_map(const PurityMapArgs& args) {
    using namespace cavtomo;
    const RunConfig rc = load_run_config(args.config_path);
    if (!rc.has_cavity || !rc.has_scan)
        throw ConfigError("purity-map needs the [cavity] and [scan] sections");
    if (!(args.eta_min >= 0.0 && args.eta_max <= 1.0 && args.eta_min < args.eta_max))
        throw ConfigError("purity-map: eta range must satisfy 0 <= min < max <= 1");

    RunManifest manifest;
    manifest.command = "purity-map";
    manifest.config_path = args.config_path;
    const std::string out_path = resolve_output(args.output_path);
    manifest.outputs = {out_path};
    manifest.log(std::cerr);

    const JonesVector input_state =
        rc.has_coupling ? rc.coupling.input_state : jones::diagonal();
    const auto curve =
        min_purity_vs_coupling(rc.cavity, input_state,
                               linspace(args.eta_min, args.eta_max, args.eta_points),
                               rc.scan.omega_grid);
    write_purity_map_csv(out_path, curve, manifest.comment_lines());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polarization-tomography toolkit for birefringent microcavities"};
    app.set_version_flag("--version", cavtomo::kVersion);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "Generate a synthetic tomography scan");
    cmd_sim->add_option("-c,--config", sim.config_path, "Run config file")->required();
    cmd_sim->add_option("-o,--output", sim.output_path, "Dataset CSV to write")->required();

    ReconstructArgs rec;
    auto* cmd_rec = app.add_subcommand(
        "reconstruct", "Reconstruct Stokes curves and reflectivity from a dataset");
    cmd_rec->add_option("-i,--input", rec.input_path, "Dataset CSV")->required();
    cmd_rec->add_option("-o,--output", rec.output_path, "Curves CSV to write")->required();
    cmd_rec->add_option("--poincare", rec.poincare_path, "Poincare trajectory CSV");
    cmd_rec->add_option("--noise-level", rec.noise_level,
                        "Relative noise level for diagnostics (default: sidecar value)");

    FitArgs fit;
    auto* cmd_fit = app.add_subcommand("fit", "Fit cavity and coupling parameters");
    cmd_fit->add_option("-c,--config", fit.config_path, "Run config file")->required();
    cmd_fit->add_option("--stage", fit.stage_override,
                        "eigenmode | full | joint (default: [fit] stage)");
    cmd_fit->add_option("-i,--input", fit.input_diag, "Tomography dataset CSV");
    cmd_fit->add_option("--input-h", fit.input_h, "Horizontal-input dataset CSV");
    cmd_fit->add_option("--input-v", fit.input_v, "Vertical-input dataset CSV");
    cmd_fit->add_option("-o,--output", fit.output_path, "Fit result file")->required();
    cmd_fit->add_option("--branch", fit.branch_path,
                        "Branch diagnostics file (default: <output>.branch.txt)");
    cmd_fit->add_option("--profile", fit.profile_path,
                        "Degeneracy profile CSV (default: <output>.profile.csv)");
    cmd_fit->add_option("--curves", fit.curves_path,
                        "Fitted-curve table (default: stdout)");

    PurityMapArgs map;
    auto* cmd_map = app.add_subcommand(
        "purity-map", "Minimum polarization purity versus input coupling");
    cmd_map->add_option("-c,--config", map.config_path, "Run config file")->required();
    cmd_map->add_option("-o,--output", map.output_path, "Curve CSV to write")->required();
    cmd_map->add_option("--eta-min", map.eta_min, "Lower input-coupling bound");
    cmd_map->add_option("--eta-max", map.eta_max, "Upper input-coupling bound");
    cmd_map->add_option("--eta-points", map.eta_points, "Grid size over eta_in");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (cmd_sim->parsed()) return run_simulate(sim);
        if (cmd_rec->parsed()) return run_reconstruct(rec);
        if (cmd_fit->parsed()) return run_fit(fit);
        if (cmd_map->parsed()) return run_purity_map(map);
    } catch (const cavtomo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cavtomo::InvalidArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cavtomo::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
