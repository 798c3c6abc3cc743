#pragma once

/**
 * Inverse problem: estimate cavity and coupling parameters from scan
 * datasets.
 *
 * The model has eight parameters,
 *   omega_c, delta_omega, kappa_h, kappa_v, eta_out, eta_in, theta, phi,
 * the last two being the Poincare angles of the input state. Fits run a
 * damped least-squares descent over the free subset, with bound-respecting
 * internal coordinates (log for linewidths, logit for the couplings) so the
 * covariance stays meaningful next to bounds like eta_in near 1.
 *
 * Stage ordering mirrors the measurement protocol: the eigenmode stage fits
 * the reflectivity of |H> and |V> scans (which pins omega_c, delta_omega and
 * the linewidths but leaves eta_in and eta_out degenerate along a fixed dip
 * depth), the full stage adds the tomography residuals of a rotated-input
 * scan, which breaks the degeneracy. A joint all-data fit combines both.
 *
 * Residuals are stacked per detuning as
 *   [w_r (R_tot - R_meas), w_hv (s_HV - ...), w_da (...), w_rl (...)]
 * with user-tunable weights. Parameter uncertainties come from the
 * central-difference Jacobian at the solution, scaled by the residual
 * variance; parametric_bootstrap provides the percentile cross-check.
 */

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "cavtomo/cavity.hpp"
#include "cavtomo/errors.hpp"
#include "cavtomo/least_squares.hpp"
#include "cavtomo/simulate.hpp"

namespace cavtomo {

// ---------------------------------------------------------------------------
// Parameter vector

enum ParamIndex : int {
    kOmegaC = 0,
    kDeltaOmega,
    kKappaH,
    kKappaV,
    kEtaOut,
    kEtaIn,
    kTheta,
    kPhi,
    kNumParams
};

inline constexpr std::array<const char*, kNumParams> kParamNames = {
    "omega_c_ueV", "delta_omega_ueV", "kappa_h_ueV", "kappa_v_ueV",
    "eta_out",     "eta_in",          "theta_rad",   "phi_rad"};

using ParamArray = std::array<double, kNumParams>;

inline int param_index(const std::string& name) {
    for (int i = 0; i < kNumParams; ++i)
        if (name == kParamNames[i]) return i;
    throw InvalidArgumentError("unknown fit parameter '" + name + "'");
}

inline CavityParams cavity_from_params(const ParamArray& p) {
    CavityParams params;
    params.omega_c = p[kOmegaC];
    params.delta_omega = p[kDeltaOmega];
    params.kappa_h = p[kKappaH];
    params.kappa_v = p[kKappaV];
    params.eta_out = p[kEtaOut];
    return params;
}

namespace detail {

// Internal (unconstrained) coordinates: log for linewidths, logit for the
// couplings, identity elsewhere.
inline double to_internal(int idx, double v) {
    switch (idx) {
        case kKappaH:
        case kKappaV:
            if (!(v > 0.0))
                throw InvalidArgumentError("linewidth initial value must be positive");
            return std::log(v);
        case kEtaOut:
        case kEtaIn: {
            const double p = std::clamp(v, 1e-12, 1.0 - 1e-12);
            return std::log(p / (1.0 - p));
        }
        default:
            return v;
    }
}

inline double from_internal(int idx, double u) {
    switch (idx) {
        case kKappaH:
        case kKappaV:
            return std::exp(u);
        case kEtaOut:
        case kEtaIn:
            return 1.0 / (1.0 + std::exp(-u));
        default:
            return u;
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fit configuration and result

struct FitConfig {
    std::array<bool, kNumParams> free{}; // all false = stage default mask
    // Initial values; NaN entries are derived from the data.
    ParamArray initial{std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
    double weight_r_tot = 1.0;
    double weight_s_hv = 1.0;
    double weight_s_da = 1.0;
    double weight_s_rl = 1.0;
    int max_iterations = 200;
    double gradient_tol = 1e-10;
    double step_tol = 1e-12;
    // Additional eta_in starting points tried by fit_full / fit_joint; the
    // best converged run wins. Empty = {0.3, 0.6, 0.95}.
    std::vector<double> multistart_eta_in;

    void validate() const {
        bool any_free = false;
        for (bool f : free) any_free |= f;
        if (!any_free)
            throw InvalidArgumentError("FitConfig: no free parameters");
        if (weight_r_tot < 0 || weight_s_hv < 0 || weight_s_da < 0 || weight_s_rl < 0)
            throw InvalidArgumentError("FitConfig: weights must be >= 0");
        if (weight_r_tot + weight_s_hv + weight_s_da + weight_s_rl <= 0)
            throw InvalidArgumentError("FitConfig: all weights are zero");
    }
};

struct FitResult {
    ParamArray estimates{};
    ParamArray std_errors{}; // 0 for fixed parameters
    std::array<bool, kNumParams> free{};
    std::vector<std::string> free_names; // row/column order of `covariance`
    Eigen::MatrixXd covariance;          // external space, free params only
    double residual_norm = 0.0;
    double sigma2 = 0.0;
    int n_residuals = 0;
    bool converged = false;
    int iterations = 0;
    std::string status;
    // Parameters spanning directions the data does not constrain; nonempty
    // means the quoted errors for these are meaningless.
    std::vector<std::string> unresolved;

    bool rank_deficient() const { return !unresolved.empty(); }

    CavityParams cavity() const { return cavity_from_params(estimates); }
    CouplingConfig coupling() const {
        return {estimates[kEtaIn],
                jones::from_poincare_angles(estimates[kTheta], estimates[kPhi])};
    }
};

// ---------------------------------------------------------------------------
// Prepared data and residuals

namespace detail {

struct PreparedScan {
    std::vector<double> omega;
    std::vector<double> r_total;       // raw (unclamped) measured reflectivity
    std::vector<StokesVector> stokes;  // measured Stokes components
    bool use_stokes = true;
    bool input_from_angles = false; // take the input state from (theta, phi)
    JonesVector fixed_input;        // used otherwise
};

inline PreparedScan prepare_scan(const ScanDataset& data, bool use_stokes,
                                 bool input_from_angles,
                                 const JonesVector& fixed_input) {
    if (data.records.empty())
        throw InsufficientDataError("fit: dataset has no records");
    PreparedScan prep;
    prep.use_stokes = use_stokes;
    prep.input_from_angles = input_from_angles;
    prep.fixed_input = fixed_input;
    prep.omega.reserve(data.records.size());
    for (const auto& rec : data.records) {
        const PointEstimate est = reconstruct_point(rec.sextet, rec.input_intensity);
        prep.omega.push_back(rec.omega);
        prep.r_total.push_back(est.r_total_raw);
        prep.stokes.push_back(est.stokes);
    }
    return prep;
}

inline int residuals_per_point(const PreparedScan& scan) {
    return scan.use_stokes ? 4 : 1;
}

inline Eigen::VectorXd model_residuals(const ParamArray& p,
                                       const std::vector<PreparedScan>& scans,
                                       const FitConfig& cfg) {
    Eigen::Index total = 0;
    for (const auto& s : scans)
        total += static_cast<Eigen::Index>(s.omega.size()) * residuals_per_point(s);
    Eigen::VectorXd r(total);

    CavityParams params = cavity_from_params(p);
    Eigen::Index k = 0;
    for (const auto& scan : scans) {
        CouplingConfig coupling;
        coupling.eta_in = p[kEtaIn];
        coupling.input_state = scan.input_from_angles
                                   ? jones::from_poincare_angles(p[kTheta], p[kPhi])
                                   : scan.fixed_input;
        for (std::size_t i = 0; i < scan.omega.size(); ++i) {
            const ReflectionOutcome out =
                reflect_unchecked(params, coupling, scan.omega[i]);
            r[k++] = cfg.weight_r_tot * (out.r_total - scan.r_total[i]);
            if (scan.use_stokes) {
                r[k++] = cfg.weight_s_hv * (out.stokes.s_hv - scan.stokes[i].s_hv);
                r[k++] = cfg.weight_s_da * (out.stokes.s_da - scan.stokes[i].s_da);
                r[k++] = cfg.weight_s_rl * (out.stokes.s_rl - scan.stokes[i].s_rl);
            }
        }
    }
    return r;
}

struct FitProblem {
    std::vector<PreparedScan> scans;
    FitConfig cfg;
    std::vector<int> free_idx;
    ParamArray values{}; // fixed entries stay, free entries are overwritten

    ParamArray expand(const Eigen::VectorXd& u) const {
        ParamArray p = values;
        for (std::size_t i = 0; i < free_idx.size(); ++i)
            p[free_idx[i]] = from_internal(free_idx[i], u[static_cast<Eigen::Index>(i)]);
        return p;
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& u) const {
        return model_residuals(expand(u), scans, cfg);
    }
};

// Runs the descent from the initial values already stored in
// problem.values and fills in covariance-based uncertainties.
inline FitResult solve(const FitProblem& problem) {
    Eigen::VectorXd u0(static_cast<Eigen::Index>(problem.free_idx.size()));
    for (std::size_t i = 0; i < problem.free_idx.size(); ++i)
        u0[static_cast<Eigen::Index>(i)] =
            to_internal(problem.free_idx[i], problem.values[problem.free_idx[i]]);

    LsqOptions opts;
    opts.max_iterations = problem.cfg.max_iterations;
    opts.gradient_tol = problem.cfg.gradient_tol;
    opts.step_tol = problem.cfg.step_tol;
    const LsqResult lsq = levenberg_marquardt(problem, u0, opts);

    FitResult result;
    result.estimates = problem.expand(lsq.x);
    for (int idx : problem.free_idx) result.free[idx] = true;
    for (int idx : problem.free_idx) result.free_names.emplace_back(kParamNames[idx]);
    result.residual_norm = lsq.residual_norm;
    result.converged = lsq.converged;
    result.iterations = lsq.iterations;
    result.status = lsq.stop_reason;

    // Uncertainties in external coordinates at the solution.
    const ParamArray& est = result.estimates;
    auto external_residuals = [&](const Eigen::VectorXd& v) {
        ParamArray p = est;
        for (std::size_t i = 0; i < problem.free_idx.size(); ++i)
            p[problem.free_idx[i]] = v[static_cast<Eigen::Index>(i)];
        return model_residuals(p, problem.scans, problem.cfg);
    };
    Eigen::VectorXd v0(static_cast<Eigen::Index>(problem.free_idx.size()));
    for (std::size_t i = 0; i < problem.free_idx.size(); ++i)
        v0[static_cast<Eigen::Index>(i)] = est[problem.free_idx[i]];
    const Eigen::MatrixXd jac = numeric_jacobian_central(external_residuals, v0);
    result.n_residuals = static_cast<int>(jac.rows());

    const CovarianceEstimate cov = covariance_from_jacobian(jac, lsq.residual_norm);
    result.covariance = cov.covariance;
    result.sigma2 = cov.sigma2;
    for (std::size_t i = 0; i < problem.free_idx.size(); ++i)
        result.std_errors[problem.free_idx[i]] = cov.std_errors[static_cast<Eigen::Index>(i)];

    // Name the parameters participating in each unresolved direction.
    for (Eigen::Index c = 0; c < cov.null_space.cols(); ++c) {
        const double peak = cov.null_space.col(c).cwiseAbs().maxCoeff();
        for (Eigen::Index j = 0; j < cov.null_space.rows(); ++j) {
            if (std::abs(cov.null_space(j, c)) >= 0.2 * peak) {
                const std::string name = kParamNames[problem.free_idx[static_cast<std::size_t>(j)]];
                if (std::find(result.unresolved.begin(), result.unresolved.end(), name) ==
                    result.unresolved.end())
                    result.unresolved.push_back(name);
            }
        }
    }
    return result;
}

// Location of the reflectivity minimum and a FWHM-style width estimate.
struct DipEstimate {
    double omega_min = 0.0;
    double depth = 0.0; // 1 - min(r_total)
    double width = 0.0;
};

inline DipEstimate estimate_dip(const PreparedScan& scan) {
    DipEstimate dip;
    std::size_t imin = 0;
    double rmin = scan.r_total[0];
    for (std::size_t i = 1; i < scan.r_total.size(); ++i)
        if (scan.r_total[i] < rmin) rmin = scan.r_total[imin = i];
    dip.omega_min = scan.omega[imin];
    dip.depth = 1.0 - rmin;
    const double half_level = 1.0 - 0.5 * dip.depth;
    double left = scan.omega.front(), right = scan.omega.back();
    for (std::size_t i = imin; i-- > 0;)
        if (scan.r_total[i] > half_level) { left = scan.omega[i]; break; }
    for (std::size_t i = imin + 1; i < scan.omega.size(); ++i)
        if (scan.r_total[i] > half_level) { right = scan.omega[i]; break; }
    dip.width = std::max(right - left, (scan.omega.back() - scan.omega.front()) / 64.0);
    return dip;
}

// eta_out reproducing a dip of depth d = 4 eta_in eta_out (1 - eta_out),
// lower branch. The result is kept a little below 1/2: the depth is
// stationary in eta_out exactly at 1/2, and a fit started on that saddle
// cannot leave it.
inline double eta_out_from_depth(double depth, double eta_in) {
    const double arg = std::clamp(1.0 - depth / std::max(eta_in, 1e-6), 0.01, 1.0);
    return std::clamp(0.5 * (1.0 - std::sqrt(arg)), 1e-6, 1.0 - 1e-6);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Reflectivity-only degeneracy

// The eigenmode dip depth constrains only the product combination
// (1 - eta_in) + eta_in (1 - 2 eta_out)^2 = min R_tot, a one-dimensional
// curve of (eta_in, eta_out) pairs. eta_in ranges over [1 - min_r_total, 1];
// each eta_in admits two eta_out branches symmetric about 1/2.
struct DegeneracyProfile {
    struct Point {
        double eta_in = 0.0;
        double eta_out_low = 0.0;
        double eta_out_high = 0.0;
    };

    double min_r_total = 0.0;
    double eta_in_min = 0.0;
    std::vector<Point> points;
};

// Both eta_out branches compatible with a given dip minimum at fixed eta_in.
inline std::pair<double, double> degeneracy_eta_out(double min_r_total, double eta_in) {
    if (!(min_r_total >= 0.0 && min_r_total <= 1.0))
        throw InvalidArgumentError("degeneracy_eta_out: min reflectivity outside [0, 1]");
    if (!(eta_in > 0.0 && eta_in <= 1.0))
        throw InvalidArgumentError("degeneracy_eta_out: eta_in outside (0, 1]");
    const double num = min_r_total - (1.0 - eta_in);
    if (num < -1e-12)
        throw NoSolutionError("degeneracy_eta_out: eta_in below 1 - min_r_total");
    const double root = std::sqrt(std::max(0.0, num / eta_in));
    return {0.5 * (1.0 - root), 0.5 * (1.0 + root)};
}

inline DegeneracyProfile degeneracy_profile(double min_r_total, int n_points = 101) {
    if (!(min_r_total >= 0.0 && min_r_total <= 1.0))
        throw InvalidArgumentError("degeneracy_profile: min reflectivity outside [0, 1]");
    if (n_points < 2)
        throw InvalidArgumentError("degeneracy_profile: need at least 2 points");
    DegeneracyProfile profile;
    profile.min_r_total = min_r_total;
    profile.eta_in_min = 1.0 - min_r_total;
    for (int i = 0; i < n_points; ++i) {
        const double t = static_cast<double>(i) / (n_points - 1);
        const double eta_in = profile.eta_in_min + t * (1.0 - profile.eta_in_min);
        if (eta_in <= 0.0) continue; // min_r_total = 1 starts at eta_in = 0
        const auto [lo, hi] = degeneracy_eta_out(min_r_total, eta_in);
        profile.points.push_back({eta_in, lo, hi});
    }
    return profile;
}

// ---------------------------------------------------------------------------
// Stage 1: eigenpolarization scans

struct EigenmodeFit {
    FitResult fit;
    DegeneracyProfile profile;
};

// Fits omega_c, delta_omega, kappa_h, kappa_v and the dip depth from the
// reflectivity of an |H> scan and a |V> scan (r_total residuals only).
// eta_in stays fixed (default 1); freeing both couplings is allowed but
// leaves them rank-deficient along the constant-dip-depth curve, which the
// result reports. The returned DegeneracyProfile enumerates that curve.
inline EigenmodeFit fit_eigenmode(const ScanDataset& dataset_h,
                                  const ScanDataset& dataset_v,
                                  FitConfig cfg = {}) {
    const JonesVector in_h = dataset_h.metadata.input_state_known
                                 ? dataset_h.metadata.input_state()
                                 : jones::horizontal();
    const JonesVector in_v = dataset_v.metadata.input_state_known
                                 ? dataset_v.metadata.input_state()
                                 : jones::vertical();

    detail::FitProblem problem;
    problem.scans.push_back(detail::prepare_scan(dataset_h, false, false, in_h));
    problem.scans.push_back(detail::prepare_scan(dataset_v, false, false, in_v));

    for (const auto& scan : problem.scans) {
        const double rmin = *std::min_element(scan.r_total.begin(), scan.r_total.end());
        if (rmin > 0.9)
            throw InsufficientDataError(
                "fit_eigenmode: dataset does not cover the resonance dip (min R_tot > 0.9)");
    }

    bool any_free = false;
    for (bool f : cfg.free) any_free |= f;
    if (!any_free) {
        cfg.free[kOmegaC] = cfg.free[kDeltaOmega] = true;
        cfg.free[kKappaH] = cfg.free[kKappaV] = cfg.free[kEtaOut] = true;
    }
    cfg.validate();

    const detail::DipEstimate dip_h = detail::estimate_dip(problem.scans[0]);
    const detail::DipEstimate dip_v = detail::estimate_dip(problem.scans[1]);
    ParamArray init = cfg.initial;
    auto fill = [&](int idx, double value) {
        if (std::isnan(init[idx])) init[idx] = value;
    };
    fill(kOmegaC, 0.5 * (dip_h.omega_min + dip_v.omega_min));
    fill(kDeltaOmega, dip_h.omega_min - dip_v.omega_min);
    fill(kKappaH, dip_h.width);
    fill(kKappaV, dip_v.width);
    fill(kEtaIn, 1.0);
    fill(kEtaOut, detail::eta_out_from_depth(std::max(dip_h.depth, dip_v.depth), init[kEtaIn]));
    fill(kTheta, 0.0);
    fill(kPhi, 0.0);

    problem.cfg = cfg;
    problem.values = init;
    for (int i = 0; i < kNumParams; ++i)
        if (cfg.free[i]) problem.free_idx.push_back(i);

    EigenmodeFit out;
    out.fit = detail::solve(problem);

    const ParamArray& e = out.fit.estimates;
    const double fitted_min =
        (1.0 - e[kEtaIn]) + e[kEtaIn] * (1.0 - 2.0 * e[kEtaOut]) * (1.0 - 2.0 * e[kEtaOut]);
    out.profile = degeneracy_profile(std::clamp(fitted_min, 0.0, 1.0));
    return out;
}

// ---------------------------------------------------------------------------
// Stage 2: full tomography fit

// Weighted least squares over stacked [R_tot, s_HV, s_DA, s_RL] residuals of
// a scan whose input is away from both cavity axes. Default free set:
// omega_c, delta_omega, kappa_h, kappa_v, eta_out, eta_in; the input-state
// angles stay fixed (at the dataset metadata, or the off-resonance measured
// direction when no metadata exists) unless freed in the config.
inline FitResult fit_full(const ScanDataset& dataset, FitConfig cfg = {}) {
    detail::PreparedScan scan = detail::prepare_scan(dataset, true, true, {});

    // Input state estimated from the flat scan edges; doubles as the
    // precondition check that the input avoids both eigenpolarizations.
    const StokesVector edge_dir = off_resonance_direction(scan.stokes);
    const double angle_h = std::acos(std::clamp(edge_dir.s_hv, -1.0, 1.0));
    const double kMinAxisAngle = 0.2;
    if (angle_h < kMinAxisAngle || (M_PI - angle_h) < kMinAxisAngle)
        throw InsufficientDataError(
            "fit_full: input polarization too close to a cavity eigenpolarization");

    bool any_free = false;
    for (bool f : cfg.free) any_free |= f;
    if (!any_free) {
        cfg.free[kOmegaC] = cfg.free[kDeltaOmega] = true;
        cfg.free[kKappaH] = cfg.free[kKappaV] = true;
        cfg.free[kEtaOut] = cfg.free[kEtaIn] = true;
    }
    cfg.validate();

    const detail::DipEstimate dip = detail::estimate_dip(scan);
    ParamArray init = cfg.initial;
    auto fill = [&](int idx, double value) {
        if (std::isnan(init[idx])) init[idx] = value;
    };
    fill(kOmegaC, dip.omega_min);
    fill(kDeltaOmega, 0.5 * dip.width);
    fill(kKappaH, 0.7 * dip.width);
    fill(kKappaV, 0.7 * dip.width);
    if (dataset.metadata.input_state_known) {
        fill(kTheta, dataset.metadata.input_theta);
        fill(kPhi, dataset.metadata.input_phi);
    } else {
        fill(kTheta, std::acos(std::clamp(edge_dir.s_hv, -1.0, 1.0)));
        fill(kPhi, std::atan2(edge_dir.s_rl, edge_dir.s_da));
    }

    std::vector<double> eta_starts = cfg.multistart_eta_in;
    if (!std::isnan(init[kEtaIn]))
        eta_starts.assign(1, init[kEtaIn]);
    else if (eta_starts.empty())
        eta_starts = {0.3, 0.6, 0.95};

    detail::FitProblem problem;
    problem.scans.push_back(std::move(scan));
    problem.cfg = cfg;
    for (int i = 0; i < kNumParams; ++i)
        if (cfg.free[i]) problem.free_idx.push_back(i);

    FitResult best;
    bool have_best = false;
    for (double eta0 : eta_starts) {
        ParamArray start = init;
        start[kEtaIn] = std::clamp(eta0, 1e-6, 1.0 - 1e-6);
        if (std::isnan(cfg.initial[kEtaOut]))
            start[kEtaOut] = detail::eta_out_from_depth(dip.depth, start[kEtaIn]);
        problem.values = start;
        FitResult candidate = detail::solve(problem);
        const bool better =
            !have_best ||
            (candidate.converged && !best.converged) ||
            (candidate.converged == best.converged &&
             candidate.residual_norm < best.residual_norm);
        if (better) {
            best = std::move(candidate);
            have_best = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Joint all-data fit

// Combines the eigenpolarization reflectivities with the tomography scan.
// The (theta, phi) parameters refer to the rotated-input dataset; the |H>
// and |V> scans keep their nominal input states.
inline FitResult fit_joint(const ScanDataset& dataset_h, const ScanDataset& dataset_v,
                           const ScanDataset& dataset_diag, FitConfig cfg = {}) {
    const JonesVector in_h = dataset_h.metadata.input_state_known
                                 ? dataset_h.metadata.input_state()
                                 : jones::horizontal();
    const JonesVector in_v = dataset_v.metadata.input_state_known
                                 ? dataset_v.metadata.input_state()
                                 : jones::vertical();

    detail::PreparedScan scan_h = detail::prepare_scan(dataset_h, false, false, in_h);
    detail::PreparedScan scan_v = detail::prepare_scan(dataset_v, false, false, in_v);
    detail::PreparedScan scan_d = detail::prepare_scan(dataset_diag, true, true, {});

    bool any_free = false;
    for (bool f : cfg.free) any_free |= f;
    if (!any_free) {
        cfg.free[kOmegaC] = cfg.free[kDeltaOmega] = true;
        cfg.free[kKappaH] = cfg.free[kKappaV] = true;
        cfg.free[kEtaOut] = cfg.free[kEtaIn] = true;
    }
    cfg.validate();

    const detail::DipEstimate dip_h = detail::estimate_dip(scan_h);
    const detail::DipEstimate dip_v = detail::estimate_dip(scan_v);
    const detail::DipEstimate dip_d = detail::estimate_dip(scan_d);
    const StokesVector edge_dir = off_resonance_direction(scan_d.stokes);
    ParamArray init = cfg.initial;
    auto fill = [&](int idx, double value) {
        if (std::isnan(init[idx])) init[idx] = value;
    };
    fill(kOmegaC, 0.5 * (dip_h.omega_min + dip_v.omega_min));
    fill(kDeltaOmega, dip_h.omega_min - dip_v.omega_min);
    fill(kKappaH, dip_h.width);
    fill(kKappaV, dip_v.width);
    if (dataset_diag.metadata.input_state_known) {
        fill(kTheta, dataset_diag.metadata.input_theta);
        fill(kPhi, dataset_diag.metadata.input_phi);
    } else {
        fill(kTheta, std::acos(std::clamp(edge_dir.s_hv, -1.0, 1.0)));
        fill(kPhi, std::atan2(edge_dir.s_rl, edge_dir.s_da));
    }

    std::vector<double> eta_starts = cfg.multistart_eta_in;
    if (!std::isnan(init[kEtaIn]))
        eta_starts.assign(1, init[kEtaIn]);
    else if (eta_starts.empty())
        eta_starts = {0.3, 0.6, 0.95};

    detail::FitProblem problem;
    problem.scans.push_back(std::move(scan_h));
    problem.scans.push_back(std::move(scan_v));
    problem.scans.push_back(std::move(scan_d));
    problem.cfg = cfg;
    for (int i = 0; i < kNumParams; ++i)
        if (cfg.free[i]) problem.free_idx.push_back(i);

    FitResult best;
    bool have_best = false;
    for (double eta0 : eta_starts) {
        ParamArray start = init;
        start[kEtaIn] = std::clamp(eta0, 1e-6, 1.0 - 1e-6);
        if (std::isnan(cfg.initial[kEtaOut]))
            start[kEtaOut] = detail::eta_out_from_depth(dip_d.depth, start[kEtaIn]);
        problem.values = start;
        FitResult candidate = detail::solve(problem);
        const bool better =
            !have_best ||
            (candidate.converged && !best.converged) ||
            (candidate.converged == best.converged &&
             candidate.residual_norm < best.residual_norm);
        if (better) {
            best = std::move(candidate);
            have_best = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Noise estimation and parametric bootstrap

// Root-mean-square relative deviation between measured channel intensities
// and the model prediction at the given parameters. Channels whose model
// intensity is negligible are skipped.
inline double estimate_noise_level(const ScanDataset& data, const CavityParams& params,
                                   const CouplingConfig& coupling) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& rec : data.records) {
        const ReflectionOutcome out = detail::reflect_unchecked(params, coupling, rec.omega);
        const IntensitySextet model =
            project_intensities(out.rho, out.r_total, rec.input_intensity);
        const double* meas[6] = {&rec.sextet.i_h, &rec.sextet.i_v, &rec.sextet.i_d,
                                 &rec.sextet.i_a, &rec.sextet.i_r, &rec.sextet.i_l};
        const double* pred[6] = {&model.i_h, &model.i_v, &model.i_d,
                                 &model.i_a, &model.i_r, &model.i_l};
        for (int c = 0; c < 6; ++c) {
            if (*pred[c] <= 1e-9 * rec.input_intensity) continue;
            const double rel = (*meas[c] - *pred[c]) / *pred[c];
            sum += rel * rel;
            ++count;
        }
    }
    if (count == 0)
        throw InsufficientDataError("estimate_noise_level: no usable channels");
    return std::sqrt(sum / static_cast<double>(count));
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        futures.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        }));
    for (auto& f : futures) f.get();
}

} // namespace detail

struct BootstrapResult {
    int n_replicas = 0;
    int n_failed = 0; // replicas whose refit did not converge
    std::vector<std::string> free_names;
    // One column per free parameter, sorted ascending.
    std::vector<std::vector<double>> samples;
    std::vector<double> std_devs;
    std::vector<double> q025;
    std::vector<double> q975;
};

// Percentile cross-check of the Jacobian errors for a full-stage fit:
// resimulate the dataset at the fitted parameters with the fitted noise,
// refit each replica from the solution, and read the spread. Replicas are
// independent (seeded by replica index) and run concurrently; results merge
// by index, so the output is reproducible.
inline BootstrapResult parametric_bootstrap(const ScanDataset& dataset,
                                            const FitResult& base, FitConfig cfg,
                                            int n_replicas, std::uint64_t seed,
                                            double noise_level = -1.0) {
    if (n_replicas < 2)
        throw InvalidArgumentError("parametric_bootstrap: need at least 2 replicas");
    const CavityParams params = base.cavity();
    const CouplingConfig coupling = base.coupling();
    if (noise_level < 0.0)
        noise_level = estimate_noise_level(dataset, params, coupling);

    ScanConfig sim;
    sim.omega_grid = dataset.omega_grid();
    sim.input_intensity =
        dataset.records.empty() ? 1.0 : dataset.records.front().input_intensity;
    sim.noise = {NoiseModel::Kind::gaussian_relative, noise_level};

    cfg.free = base.free;
    cfg.initial = base.estimates; // start every refit from the solution
    cfg.multistart_eta_in.clear();

    std::vector<FitResult> fits(static_cast<std::size_t>(n_replicas));
    std::vector<char> ok(static_cast<std::size_t>(n_replicas), 0);
    detail::parallel_for(static_cast<std::size_t>(n_replicas), [&](std::size_t i) {
        ScanConfig replica = sim;
        replica.seed = detail::splitmix64(seed ^ (0x5851F42D4C957F2DULL * (i + 1)));
        const ScanDataset synthetic = simulate_scan(params, coupling, replica);
        try {
            fits[i] = fit_full(synthetic, cfg);
            ok[i] = fits[i].converged ? 1 : 0;
        } catch (const Error&) {
            ok[i] = 0;
        }
    });

    BootstrapResult out;
    out.n_replicas = n_replicas;
    out.free_names = base.free_names;
    const std::size_t n_free = base.free_names.size();
    out.samples.resize(n_free);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (!ok[i]) {
            ++out.n_failed;
            continue;
        }
        std::size_t col = 0;
        for (int idx = 0; idx < kNumParams; ++idx)
            if (base.free[idx]) out.samples[col++].push_back(fits[i].estimates[idx]);
    }
    if (out.n_failed == n_replicas)
        throw InsufficientDataError("parametric_bootstrap: every replica failed");

    auto quantile = [](const std::vector<double>& sorted, double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    };
    for (std::size_t c = 0; c < n_free; ++c) {
        auto& col = out.samples[c];
        std::sort(col.begin(), col.end());
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var = col.size() > 1 ? var / static_cast<double>(col.size() - 1) : 0.0;
        out.std_devs.push_back(std::sqrt(var));
        out.q025.push_back(quantile(col, 0.025));
        out.q975.push_back(quantile(col, 0.975));
    }
    return out;
}

} // namespace cavtomo
