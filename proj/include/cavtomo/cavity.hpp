#pragma once

/**
 * Forward model of reflection off a birefringent two-mode microcavity.
 *
 * Each linearly polarized cavity mode i in {H, V} reflects an on-axis field
 * with the complex coefficient
 *
 *     r_i(w) = 1 - 2 eta_out / (1 - 2i (w - w_i) / kappa_i)
 *
 * where w_i is the mode energy, kappa_i its linewidth and eta_out the
 * top-mirror output coupling. The mode reflectivity |r_i|^2 is a Lorentzian
 * dip of depth 4 eta_out (1 - eta_out) and FWHM kappa_i:
 *
 *     |r_i(w)|^2 = 1 - 4 eta_out (1 - eta_out) / (1 + x^2),  x = 2(w - w_i)/kappa_i.
 *
 * Only the fraction eta_in of the incident intensity couples to the cavity
 * mode; the rest reflects unrotated off the structure. Coupled and uncoupled
 * beams have orthogonal spatial profiles, so they add in intensity, never in
 * amplitude: the reflected polarization is the incoherent mixture
 *
 *     rho = p |psi_m><psi_m| + (1 - p) |psi_in><psi_in|,
 *     p   = eta_in R_m / ((1 - eta_in) + eta_in R_m).
 *
 * Energies are detunings from the scan center in ueV throughout; the
 * absolute mode energy never enters any formula and is carried as metadata
 * only.
 */

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "cavtomo/errors.hpp"
#include "cavtomo/polarization.hpp"

namespace cavtomo {

enum class CavityMode { h, v };

struct CavityParams {
    double omega_c = 0.0;      // center energy in the scan frame (ueV)
    double delta_omega = 0.0;  // H/V mode splitting (ueV, >= 0)
    double kappa_h = 1.0;      // H-mode linewidth (ueV, > 0)
    double kappa_v = 1.0;      // V-mode linewidth (ueV, > 0)
    double eta_out = 0.5;      // top-mirror output coupling, in [0, 1]

    // Absolute energy of the fundamental mode as reported by the
    // instrument; metadata only, excluded from every computation.
    double absolute_energy = std::numeric_limits<double>::quiet_NaN();

    double omega_h() const { return omega_c + 0.5 * delta_omega; }
    double omega_v() const { return omega_c - 0.5 * delta_omega; }

    double mode_energy(CavityMode m) const {
        return m == CavityMode::h ? omega_h() : omega_v();
    }
    double linewidth(CavityMode m) const {
        return m == CavityMode::h ? kappa_h : kappa_v;
    }

    void validate() const {
        if (!(kappa_h > 0.0) || !(kappa_v > 0.0))
            throw InvalidArgumentError("CavityParams: linewidths must be positive");
        if (delta_omega < 0.0)
            throw InvalidArgumentError("CavityParams: mode splitting must be >= 0");
        if (!(eta_out >= 0.0 && eta_out <= 1.0))
            throw InvalidArgumentError("CavityParams: eta_out must lie in [0, 1]");
    }
};

struct CouplingConfig {
    double eta_in = 1.0;               // input coupling, in [0, 1]
    JonesVector input_state = jones::diagonal(); // normalized

    void validate() const {
        if (!(eta_in >= 0.0 && eta_in <= 1.0))
            throw InvalidArgumentError("CouplingConfig: eta_in must lie in [0, 1]");
        if (!input_state.is_normalized(tol::data))
            throw InvalidArgumentError("CouplingConfig: input state must be normalized");
    }
};

// Everything the model predicts for one laser energy.
struct ReflectionOutcome {
    complexd r_h{1.0, 0.0};
    complexd r_v{1.0, 0.0};
    double r_mode = 1.0;          // R_m, reflectivity of the coupled component
    double r_total = 1.0;         // (1 - eta_in) + eta_in * R_m
    double coupled_fraction = 0.0; // p, weight of the rotated pure state
    JonesVector psi_m;            // reflected coupled state (normalized)
    PolarizationDensity rho;      // reflected mixture
    StokesVector stokes;          // of rho; intensity field holds r_total
    bool degenerate = false;      // R_m vanished, psi_m defaulted to the input
};

// Complex reflection coefficient of one eigenmode.
inline complexd reflection_coefficient(const CavityParams& params, CavityMode mode,
                                       double omega) {
    const double detuning = omega - params.mode_energy(mode);
    const complexd denom(1.0, -2.0 * detuning / params.linewidth(mode));
    return 1.0 - 2.0 * params.eta_out / denom;
}

// |r_i(w)|^2 of one eigenmode.
inline double mode_reflectivity(const CavityParams& params, CavityMode mode,
                                double omega) {
    return std::norm(reflection_coefficient(params, mode, omega));
}

namespace detail {

// Core of reflect() without argument validation; fit internals call this
// with a signed mode splitting, where the formulas stay well defined.
inline ReflectionOutcome reflect_unchecked(const CavityParams& params,
                                           const CouplingConfig& coupling,
                                           double omega) {
    ReflectionOutcome out;
    out.r_h = reflection_coefficient(params, CavityMode::h, omega);
    out.r_v = reflection_coefficient(params, CavityMode::v, omega);

    const JonesVector in = coupling.input_state;
    const complexd a = out.r_h * in.alpha;
    const complexd b = out.r_v * in.beta;
    out.r_mode = std::norm(a) + std::norm(b);
    out.r_total = (1.0 - coupling.eta_in) + coupling.eta_in * out.r_mode;

    if (out.r_mode == 0.0) {
        // Coupled intensity vanished entirely (e.g. eta_out = 1/2 exactly on
        // resonance with an eigenpolarization input). The rotated state carries
        // zero weight, so the mixture collapses to the unrotated input.
        out.degenerate = true;
        out.coupled_fraction = 0.0;
        out.psi_m = in;
        out.rho = mix({{1.0, in}});
    } else {
        out.coupled_fraction = coupling.eta_in * out.r_mode / out.r_total;
        const double inv = 1.0 / std::sqrt(out.r_mode);
        out.psi_m = JonesVector{a * inv, b * inv};
        // Same convex combination as mix(), built inline: fit derivatives
        // probe eta_in a hair outside [0, 1], where mix() would rightly
        // refuse the weights, and this path must stay smooth there.
        const double wm = out.coupled_fraction / out.psi_m.norm_squared();
        const double wi = (1.0 - out.coupled_fraction) / in.norm_squared();
        out.rho.hh = wm * std::norm(out.psi_m.alpha) + wi * std::norm(in.alpha);
        out.rho.vv = wm * std::norm(out.psi_m.beta) + wi * std::norm(in.beta);
        out.rho.hv = wm * out.psi_m.alpha * std::conj(out.psi_m.beta) +
                     wi * in.alpha * std::conj(in.beta);
        out.rho.vh = std::conj(out.rho.hv);
    }
    out.stokes = stokes_from_density(out.rho, tol::data);
    out.stokes.intensity = out.r_total; // relative to unit input intensity
    return out;
}

} // namespace detail

// Full reflection outcome for an arbitrary (normalized) input state.
// The cavity response is mode-diagonal: (alpha, beta) -> (r_H alpha, r_V beta);
// for |D> input this reduces to R_m = (|r_H|^2 + |r_V|^2)/2 and
// psi_m = (r_H, r_V)/sqrt(|r_H|^2 + |r_V|^2).
inline ReflectionOutcome reflect(const CavityParams& params,
                                 const CouplingConfig& coupling, double omega) {
    params.validate();
    coupling.validate();
    return detail::reflect_unchecked(params, coupling, omega);
}

struct ScanPoint {
    double omega = 0.0;
    ReflectionOutcome outcome;
};

inline void validate_grid(const std::vector<double>& omega_grid) {
    if (omega_grid.empty())
        throw InvalidArgumentError("omega grid is empty");
    for (std::size_t i = 1; i < omega_grid.size(); ++i)
        if (!(omega_grid[i] > omega_grid[i - 1]))
            throw InvalidArgumentError("omega grid must be strictly increasing");
}

// Pointwise forward model over a detuning grid.
inline std::vector<ScanPoint> scan_curves(const CavityParams& params,
                                          const CouplingConfig& coupling,
                                          const std::vector<double>& omega_grid) {
    validate_grid(omega_grid);
    std::vector<ScanPoint> points;
    points.reserve(omega_grid.size());
    for (double w : omega_grid)
        points.push_back({w, reflect(params, coupling, w)});
    return points;
}

// Minimum over the detuning grid of the reflected degree of polarization at
// fixed input coupling.
inline double min_purity_over_grid(const CavityParams& params,
                                   const JonesVector& input_state, double eta_in,
                                   const std::vector<double>& omega_grid) {
    validate_grid(omega_grid);
    CouplingConfig coupling{eta_in, input_state};
    double best = std::numeric_limits<double>::infinity();
    for (double w : omega_grid) {
        const double pur = degree_of_polarization(reflect(params, coupling, w).stokes);
        if (pur < best) best = pur;
    }
    return best;
}

// Minimum purity versus input coupling, one row per eta grid point. The
// omega grid must cover at least [w_c - 3 kappa, w_c + 3 kappa] with kappa
// the larger linewidth, otherwise the minimum may sit outside the scan.
inline std::vector<std::pair<double, double>>
min_purity_vs_coupling(const CavityParams& params, const JonesVector& input_state,
                       const std::vector<double>& eta_grid,
                       const std::vector<double>& omega_grid) {
    params.validate();
    if (eta_grid.empty())
        throw InvalidArgumentError("min_purity_vs_coupling: eta grid is empty");
    validate_grid(omega_grid);
    const double kappa = std::max(params.kappa_h, params.kappa_v);
    if (omega_grid.front() > params.omega_c - 3.0 * kappa ||
        omega_grid.back() < params.omega_c + 3.0 * kappa)
        throw InvalidArgumentError(
            "min_purity_vs_coupling: omega grid must span [w_c - 3k, w_c + 3k]");

    std::vector<std::pair<double, double>> curve;
    curve.reserve(eta_grid.size());
    for (double eta : eta_grid)
        curve.emplace_back(eta, min_purity_over_grid(params, input_state, eta, omega_grid));
    return curve;
}

} // namespace cavtomo
