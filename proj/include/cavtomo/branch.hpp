#pragma once

/**
 * Two-branch ambiguity of the input coupling.
 *
 * The minimum polarization purity over a scan is 1 at eta_in = 0 (nothing
 * couples, nothing rotates) and 1 at eta_in = 1 (everything couples into one
 * pure rotated state), with a single interior minimum in between. A measured
 * minimum purity therefore matches two candidate couplings, one on each side
 * of the argmin. They are told apart by how far the Poincare vector swings
 * across the resonance: at low eta_in the reflected light barely leaves the
 * input direction, at high eta_in it sweeps a wide arc.
 */

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "cavtomo/cavity.hpp"
#include "cavtomo/errors.hpp"
#include "cavtomo/simulate.hpp"

namespace cavtomo {

enum class BranchChoice { low, high };

struct BranchDiagnostics {
    double candidate_low = 0.0;
    double candidate_high = 1.0;
    double rotation_measured = 0.0; // max Poincare excursion in the data (rad)
    double rotation_low = 0.0;      // predicted at candidate_low
    double rotation_high = 0.0;     // predicted at candidate_high
    BranchChoice chosen = BranchChoice::high;
    bool ambiguous = false; // both metrics equally close; keep both candidates
};

namespace detail {

// Golden-section argmin refinement of f over [lo, hi] (f unimodal there).
template <typename F>
double golden_section_min(F&& f, double lo, double hi, double xtol) {
    static const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > xtol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

// Bisection for f(x) = target with f(a) >= target >= f(b) or the reverse.
template <typename F>
double bisect_to(F&& f, double a, double b, double target, double xtol) {
    double fa = f(a) - target;
    for (int iter = 0; iter < 200 && b - a > xtol; ++iter) {
        const double mid = 0.5 * (a + b);
        const double fm = f(mid) - target;
        if ((fa <= 0.0) == (fm <= 0.0)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

// Inverts the minimum-purity-versus-coupling curve on both sides of its
// interior minimum. The same omega grid must be used to produce the measured
// value, otherwise grid discretization shifts the answer.
inline std::pair<double, double> branch_candidates(const CavityParams& params,
                                                   const JonesVector& input_state,
                                                   double measured_min_purity,
                                                   const std::vector<double>& omega_grid,
                                                   double eta_tol = 1e-6) {
    params.validate();
    validate_grid(omega_grid);
    if (measured_min_purity >= 1.0)
        throw TrivialSolutionError(
            "branch_candidates: purity >= 1 is met by eta_in = 0 and eta_in = 1 alike");

    auto curve = [&](double eta) {
        return min_purity_over_grid(params, input_state, eta, omega_grid);
    };

    // Locate the interior minimum: coarse scan, then golden-section refine.
    const int kCoarse = 201;
    double best_eta = 0.5, best_val = 2.0;
    for (int i = 0; i <= kCoarse; ++i) {
        const double eta = static_cast<double>(i) / kCoarse;
        const double v = curve(eta);
        if (v < best_val) {
            best_val = v;
            best_eta = eta;
        }
    }
    const double lo = std::max(0.0, best_eta - 1.0 / kCoarse);
    const double hi = std::min(1.0, best_eta + 1.0 / kCoarse);
    const double eta_star = detail::golden_section_min(curve, lo, hi, 1e-10);
    const double curve_min = std::min(curve(eta_star), best_val);

    if (measured_min_purity < curve_min - 1e-12)
        throw NoSolutionError(
            "branch_candidates: measured purity lies below the model's minimum-purity curve");
    if (measured_min_purity <= curve_min)
        return {eta_star, eta_star};

    const double eta_low =
        detail::bisect_to(curve, 0.0, eta_star, measured_min_purity, eta_tol);
    const double eta_high =
        detail::bisect_to(curve, eta_star, 1.0, measured_min_purity, eta_tol);
    return {eta_low, eta_high};
}

namespace detail {

// Maximum angular excursion of the Poincare directions from the reference
// direction. Points with a vanishing Poincare vector carry no direction and
// are skipped.
inline double rotation_metric(const std::vector<StokesVector>& stokes,
                              const StokesVector& reference) {
    double metric = 0.0;
    for (const auto& s : stokes) {
        if (degree_of_polarization(s) < 1e-9) continue;
        metric = std::max(metric, poincare_angle(s, reference));
    }
    return metric;
}

inline double predicted_rotation(const CavityParams& params, const JonesVector& input,
                                 double eta_in, const std::vector<double>& grid) {
    const auto points = scan_curves(params, {eta_in, input}, grid);
    std::vector<StokesVector> stokes;
    stokes.reserve(points.size());
    for (const auto& pt : points) stokes.push_back(pt.outcome.stokes);
    return rotation_metric(stokes, off_resonance_direction(stokes));
}

} // namespace detail

// Picks the branch whose predicted Poincare rotation amplitude matches the
// measured one. When both candidates predict metrics equally close to the
// measurement (within ambiguity_tol), neither is discarded: the result keeps
// both and raises the ambiguous flag.
inline BranchDiagnostics resolve_branch(const ScanDataset& dataset,
                                        const CavityParams& params,
                                        const JonesVector& input_state,
                                        std::pair<double, double> candidates,
                                        double ambiguity_tol = 1e-9) {
    if (dataset.records.empty())
        throw InsufficientDataError("resolve_branch: empty dataset");
    if (candidates.first > candidates.second)
        std::swap(candidates.first, candidates.second);

    std::vector<StokesVector> measured;
    measured.reserve(dataset.records.size());
    for (const auto& rec : dataset.records)
        measured.push_back(reconstruct_point(rec.sextet, rec.input_intensity).stokes);

    BranchDiagnostics diag;
    diag.candidate_low = candidates.first;
    diag.candidate_high = candidates.second;
    diag.rotation_measured =
        detail::rotation_metric(measured, off_resonance_direction(measured));

    const auto grid = dataset.omega_grid();
    diag.rotation_low =
        detail::predicted_rotation(params, input_state, candidates.first, grid);
    diag.rotation_high =
        detail::predicted_rotation(params, input_state, candidates.second, grid);

    const double miss_low = std::abs(diag.rotation_low - diag.rotation_measured);
    const double miss_high = std::abs(diag.rotation_high - diag.rotation_measured);
    diag.chosen = miss_high < miss_low ? BranchChoice::high : BranchChoice::low;
    diag.ambiguous = std::abs(miss_low - miss_high) <= ambiguity_tol;
    return diag;
}

} // namespace cavtomo
