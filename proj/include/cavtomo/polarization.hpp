#pragma once

/**
 * Polarization states and their representations.
 *
 * Three equivalent pictures of a single polarization qubit:
 * - JonesVector: pure state, two complex amplitudes on the {H, V} basis.
 * - StokesVector: Poincare coordinates (s_HV, s_DA, s_RL), each in [-1, 1].
 * - PolarizationDensity: 2x2 Hermitian unit-trace matrix, handles mixtures.
 *
 * Sign convention (fixed here, applied everywhere): s_RL = +2 Im(alpha* beta),
 * so the circular state (1, i)/sqrt(2) sits at +1 on the RL axis. Flipping
 * this convention mirrors Poincare trajectories through the equatorial plane
 * and leaves every purity unchanged.
 *
 * "Purity" below always means the degree of polarization, i.e. the Euclidean
 * norm of the Poincare vector, not Tr(rho^2). The two are related by
 * Tr(rho^2) = (1 + |s|^2) / 2; see matrix_purity().
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "cavtomo/errors.hpp"

namespace cavtomo {

using complexd = std::complex<double>;

namespace tol {
// Validity checks on objects constructed analytically.
inline constexpr double state = 1e-12;
// Validity checks on objects derived from measured data.
inline constexpr double data = 1e-9;
} // namespace tol

// ---------------------------------------------------------------------------
// JonesVector

struct JonesVector {
    complexd alpha{1.0, 0.0}; // amplitude on |H>
    complexd beta{0.0, 0.0};  // amplitude on |V>

    double norm_squared() const { return std::norm(alpha) + std::norm(beta); }

    // Unit-norm copy; throws InvalidStateError on a zero vector.
    JonesVector normalized() const {
        const double n2 = norm_squared();
        if (n2 <= 0.0 || !std::isfinite(n2))
            throw InvalidStateError("JonesVector: cannot normalize zero-norm state");
        const double inv = 1.0 / std::sqrt(n2);
        return {alpha * inv, beta * inv};
    }

    bool is_normalized(double eps = tol::state) const {
        return std::abs(norm_squared() - 1.0) <= eps;
    }
};

namespace jones {

inline JonesVector horizontal() { return {1.0, 0.0}; }
inline JonesVector vertical() { return {0.0, 1.0}; }
inline JonesVector diagonal() { return {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}; }
inline JonesVector antidiagonal() { return {1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}; }
inline JonesVector circular_right() { return {1.0 / std::sqrt(2.0), complexd(0.0, 1.0 / std::sqrt(2.0))}; }
inline JonesVector circular_left() { return {1.0 / std::sqrt(2.0), complexd(0.0, -1.0 / std::sqrt(2.0))}; }

// Pure state at Poincare polar angle theta (from the HV pole) and azimuth phi:
// (cos(theta/2), e^{i phi} sin(theta/2)). theta = pi/2, phi = 0 is |D>.
inline JonesVector from_poincare_angles(double theta, double phi) {
    return {std::cos(0.5 * theta),
            std::polar(std::sin(0.5 * theta), phi)};
}

} // namespace jones

// ---------------------------------------------------------------------------
// StokesVector

struct StokesVector {
    double s_hv = 0.0;
    double s_da = 0.0;
    double s_rl = 0.0;
    double intensity = 1.0; // arbitrary linear units, >= 0

    double norm_squared() const { return s_hv * s_hv + s_da * s_da + s_rl * s_rl; }

    // Physicality check: the Poincare vector must fit inside the unit ball.
    bool is_physical(double eps = tol::data) const {
        return intensity >= 0.0 && norm_squared() <= 1.0 + eps;
    }
};

// Euclidean norm of the Poincare vector; 1 for a pure state, 0 when
// fully depolarized.
inline double degree_of_polarization(const StokesVector& s) {
    return std::sqrt(s.norm_squared());
}

// Angle in radians between the Poincare directions of two states.
// Throws InvalidStateError if either vector has zero norm.
inline double poincare_angle(const StokesVector& a, const StokesVector& b) {
    const double na = degree_of_polarization(a);
    const double nb = degree_of_polarization(b);
    if (na <= 0.0 || nb <= 0.0)
        throw InvalidStateError("poincare_angle: undefined for a zero Poincare vector");
    double c = (a.s_hv * b.s_hv + a.s_da * b.s_da + a.s_rl * b.s_rl) / (na * nb);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

// ---------------------------------------------------------------------------
// PolarizationDensity

// 2x2 density matrix on the {H, V} basis, row-major storage.
struct PolarizationDensity {
    complexd hh{0.5, 0.0};
    complexd hv{0.0, 0.0};
    complexd vh{0.0, 0.0};
    complexd vv{0.5, 0.0};

    // Hermiticity, unit trace and positivity within eps.
    bool is_valid(double eps = tol::state) const {
        if (std::abs(hv - std::conj(vh)) > eps) return false;
        if (std::abs(hh.imag()) > eps || std::abs(vv.imag()) > eps) return false;
        if (std::abs(hh.real() + vv.real() - 1.0) > eps) return false;
        // eigenvalues of a unit-trace 2x2 Hermitian matrix: (1 +- |s|)/2
        const double shv = hh.real() - vv.real();
        const double sda = 2.0 * hv.real();
        const double srl = -2.0 * hv.imag();
        const double s = std::sqrt(shv * shv + sda * sda + srl * srl);
        return 0.5 * (1.0 - s) >= -eps;
    }
};

// Tr(rho^2), the matrix (quadratic) purity. Related to the degree of
// polarization by Tr(rho^2) = (1 + |s|^2)/2.
inline double matrix_purity(const PolarizationDensity& rho) {
    const complexd t = rho.hh * rho.hh + rho.hv * rho.vh + rho.vh * rho.hv + rho.vv * rho.vv;
    return t.real();
}

// ---------------------------------------------------------------------------
// IntensitySextet

// The six projected intensities of one tomography point, one pair per
// mutually unbiased basis.
struct IntensitySextet {
    double i_h = 0.0;
    double i_v = 0.0;
    double i_d = 0.0;
    double i_a = 0.0;
    double i_r = 0.0;
    double i_l = 0.0;
};

// Maximum relative disagreement among the three basis-pair sums. Zero for
// noiseless data, where all pairs sum to the same reflected intensity.
inline double pair_sum_disagreement(const IntensitySextet& x) {
    const double s0 = x.i_h + x.i_v;
    const double s1 = x.i_d + x.i_a;
    const double s2 = x.i_r + x.i_l;
    const double mean = (s0 + s1 + s2) / 3.0;
    if (mean <= 0.0)
        throw DegenerateMeasurementError("pair_sum_disagreement: non-positive intensities");
    const double lo = std::min({s0, s1, s2});
    const double hi = std::max({s0, s1, s2});
    return (hi - lo) / mean;
}

// ---------------------------------------------------------------------------
// Conversions

// Stokes vector of a pure state; the result lies on the unit sphere and
// carries the state's intensity |alpha|^2 + |beta|^2.
inline StokesVector stokes_from_jones(const JonesVector& j) {
    const double n = j.norm_squared();
    if (n <= 0.0 || !std::isfinite(n))
        throw InvalidStateError("stokes_from_jones: zero-norm state");
    const complexd cross = std::conj(j.alpha) * j.beta;
    return {(std::norm(j.alpha) - std::norm(j.beta)) / n,
            2.0 * cross.real() / n,
            2.0 * cross.imag() / n,
            n};
}

// rho = (I + s_hv sigma_hv + s_da sigma_da + s_rl sigma_rl) / 2. The input
// may poke out of the unit ball by at most the data tolerance; such vectors
// are rescaled onto the sphere so the result stays positive semidefinite.
inline PolarizationDensity density_from_stokes(const StokesVector& s) {
    double shv = s.s_hv, sda = s.s_da, srl = s.s_rl;
    const double n2 = shv * shv + sda * sda + srl * srl;
    if (n2 > 1.0) {
        if (n2 > 1.0 + tol::data)
            throw UnphysicalStateError("density_from_stokes: Poincare norm exceeds 1");
        const double scale = 1.0 / std::sqrt(n2);
        shv *= scale;
        sda *= scale;
        srl *= scale;
    }
    PolarizationDensity rho;
    rho.hh = 0.5 * (1.0 + shv);
    rho.vv = 0.5 * (1.0 - shv);
    rho.hv = complexd(0.5 * sda, -0.5 * srl);
    rho.vh = std::conj(rho.hv);
    return rho;
}

// Inverse of density_from_stokes; exact round trip for valid inputs.
// The returned intensity is the trace (1 for a proper density matrix).
inline StokesVector stokes_from_density(const PolarizationDensity& rho,
                                        double eps = tol::state) {
    if (std::abs(rho.hv - std::conj(rho.vh)) > eps ||
        std::abs(rho.hh.imag()) > eps || std::abs(rho.vv.imag()) > eps)
        throw InvalidStateError("stokes_from_density: matrix is not Hermitian");
    const double trace = rho.hh.real() + rho.vv.real();
    if (std::abs(trace - 1.0) > eps)
        throw InvalidStateError("stokes_from_density: trace differs from 1");
    return {rho.hh.real() - rho.vv.real(),
            2.0 * rho.hv.real(),
            -2.0 * rho.hv.imag(),
            trace};
}

// One weighted pure component of an incoherent mixture.
using WeightedJones = std::pair<double, JonesVector>;

// Convex combination of pure-state projectors.
// Weights must be non-negative and sum to 1 within the data tolerance;
// every component must be normalized.
inline PolarizationDensity mix(const std::vector<WeightedJones>& components) {
    if (components.empty())
        throw InvalidMixtureError("mix: empty component list");
    double wsum = 0.0;
    for (const auto& [w, j] : components) {
        if (w < -tol::state)
            throw InvalidMixtureError("mix: negative weight");
        if (!j.is_normalized(tol::data))
            throw InvalidMixtureError("mix: component Jones vector is not normalized");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > tol::data)
        throw InvalidMixtureError("mix: weights do not sum to 1");
    PolarizationDensity rho;
    rho.hh = rho.hv = rho.vh = rho.vv = 0.0;
    for (const auto& [w, j] : components) {
        // dividing by the exact norm keeps each projector unit trace even
        // when the amplitudes carry the last-ulp rounding of 1/sqrt(2) etc.
        const double wn = w / j.norm_squared();
        rho.hh += wn * j.alpha * std::conj(j.alpha);
        rho.hv += wn * j.alpha * std::conj(j.beta);
        rho.vh += wn * j.beta * std::conj(j.alpha);
        rho.vv += wn * j.beta * std::conj(j.beta);
    }
    return rho;
}

// Stokes components from the six measured intensities,
// s = (I_par - I_perp) / (I_par + I_perp) per basis. The total intensity is
// taken from the HV pair; cross-pair consistency is available separately
// through pair_sum_disagreement().
inline StokesVector stokes_from_intensities(const IntensitySextet& x) {
    const double s_hv_sum = x.i_h + x.i_v;
    const double s_da_sum = x.i_d + x.i_a;
    const double s_rl_sum = x.i_r + x.i_l;
    if (s_hv_sum <= 0.0 || s_da_sum <= 0.0 || s_rl_sum <= 0.0)
        throw DegenerateMeasurementError(
            "stokes_from_intensities: a basis pair has non-positive total intensity");
    return {(x.i_h - x.i_v) / s_hv_sum,
            (x.i_d - x.i_a) / s_da_sum,
            (x.i_r - x.i_l) / s_rl_sum,
            s_hv_sum};
}

} // namespace cavtomo
