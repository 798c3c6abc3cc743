#pragma once

/**
 * Synthetic tomography scans and their reconstruction.
 *
 * simulate_scan drives the forward model over a detuning grid, projects the
 * reflected state onto the six analyzer channels and perturbs each channel
 * with the configured noise. The noise stream is counter-based: every grid
 * point seeds its own generator from (seed, point index), so serial and
 * parallel generation produce identical datasets and a rerun with the same
 * seed is reproducible.
 */

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cavtomo/cavity.hpp"
#include "cavtomo/errors.hpp"
#include "cavtomo/polarization.hpp"

namespace cavtomo {

// ---------------------------------------------------------------------------
// Noise

struct NoiseModel {
    enum class Kind { none, gaussian_relative, poisson };

    Kind kind = Kind::none;
    // gaussian_relative: relative standard deviation per channel.
    // poisson: detector counts per unit intensity.
    double level = 0.0;

    void validate() const {
        if (level < 0.0)
            throw InvalidArgumentError("NoiseModel: level must be >= 0");
        if (kind == Kind::poisson && level <= 0.0)
            throw InvalidArgumentError("NoiseModel: poisson noise needs counts-per-unit > 0");
    }

    static std::string kind_name(Kind k) {
        switch (k) {
            case Kind::none: return "none";
            case Kind::gaussian_relative: return "gaussian-relative";
            case Kind::poisson: return "poisson";
        }
        return "none";
    }

    static Kind kind_from_name(const std::string& name) {
        if (name == "none") return Kind::none;
        if (name == "gaussian-relative") return Kind::gaussian_relative;
        if (name == "poisson") return Kind::poisson;
        throw InvalidArgumentError("NoiseModel: unknown kind '" + name + "'");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent engine for grid point `index` of stream `seed`.
inline std::mt19937_64 point_engine(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

} // namespace detail

// Applies noise to the six channels of one grid point, in the fixed order
// H, V, D, A, R, L.
inline IntensitySextet apply_noise(const IntensitySextet& clean, const NoiseModel& noise,
                                   std::uint64_t seed, std::uint64_t point_index) {
    if (noise.kind == NoiseModel::Kind::none) return clean;
    noise.validate();
    auto rng = detail::point_engine(seed, point_index);
    IntensitySextet out = clean;
    double* channels[6] = {&out.i_h, &out.i_v, &out.i_d, &out.i_a, &out.i_r, &out.i_l};
    if (noise.kind == NoiseModel::Kind::gaussian_relative) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double* c : channels)
            *c = std::max(0.0, *c * (1.0 + noise.level * gauss(rng)));
    } else { // poisson: quantize to counts and convert back to intensity units
        for (double* c : channels) {
            std::poisson_distribution<std::uint64_t> poisson(*c * noise.level);
            *c = static_cast<double>(poisson(rng)) / noise.level;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

struct ScanConfig {
    std::vector<double> omega_grid; // ueV, strictly increasing
    double input_intensity = 1.0;   // I_in per point, linear units
    NoiseModel noise;
    std::uint64_t seed = 0;

    void validate() const {
        validate_grid(omega_grid);
        if (!(input_intensity > 0.0))
            throw InvalidArgumentError("ScanConfig: input intensity must be positive");
        noise.validate();
    }
};

struct ScanRecord {
    double omega = 0.0;
    double input_intensity = 1.0;
    IntensitySextet sextet;
};

struct ScanMetadata {
    double input_theta = 0.0; // Poincare polar angle of the input state (rad)
    double input_phi = 0.0;   // Poincare azimuth of the input state (rad)
    bool input_state_known = false; // set when angles come from a real source
    std::string device_label;
    std::uint64_t seed = 0;
    NoiseModel noise;

    JonesVector input_state() const {
        return jones::from_poincare_angles(input_theta, input_phi);
    }
};

struct ScanDataset {
    std::vector<ScanRecord> records;
    ScanMetadata metadata;

    std::vector<double> omega_grid() const {
        std::vector<double> grid;
        grid.reserve(records.size());
        for (const auto& r : records) grid.push_back(r.omega);
        return grid;
    }
};

// ---------------------------------------------------------------------------
// Projection and reconstruction

namespace detail {

// Splits a total intensity c into (c*(1+s)/2, c*(1-s)/2) such that the two
// channels sum to c exactly in floating point: the larger channel is computed
// by multiplication, the smaller as an exact Sterbenz subtraction.
inline std::pair<double, double> split_pair(double c, double s) {
    const double t = 0.5 * (1.0 + s);
    if (t >= 0.5) {
        const double plus = c * t;
        return {plus, c - plus};
    }
    const double minus = c * (1.0 - t);
    return {c - minus, minus};
}

} // namespace detail

// Projected intensity I_b = I_in * R_tot * <b|rho|b> for the six analyzer
// channels; each basis pair sums to I_in * R_tot exactly.
inline IntensitySextet project_intensities(const PolarizationDensity& rho,
                                           double r_total, double input_intensity) {
    const StokesVector s = stokes_from_density(rho, tol::data);
    const double c = input_intensity * r_total;
    const auto [ih, iv] = detail::split_pair(c, s.s_hv);
    const auto [id, ia] = detail::split_pair(c, s.s_da);
    const auto [ir, il] = detail::split_pair(c, s.s_rl);
    return {ih, iv, id, ia, ir, il};
}

// Forward model -> projection -> noise over the whole grid.
inline ScanDataset simulate_scan(const CavityParams& params,
                                 const CouplingConfig& coupling,
                                 const ScanConfig& config) {
    params.validate();
    coupling.validate();
    config.validate();

    ScanDataset data;
    data.records.reserve(config.omega_grid.size());
    const StokesVector s_in = stokes_from_jones(coupling.input_state);
    data.metadata.input_theta = std::acos(std::clamp(s_in.s_hv, -1.0, 1.0));
    data.metadata.input_phi = std::atan2(s_in.s_rl, s_in.s_da);
    data.metadata.input_state_known = true;
    data.metadata.seed = config.seed;
    data.metadata.noise = config.noise;

    for (std::size_t i = 0; i < config.omega_grid.size(); ++i) {
        const double omega = config.omega_grid[i];
        const ReflectionOutcome out = reflect(params, coupling, omega);
        IntensitySextet sextet =
            project_intensities(out.rho, out.r_total, config.input_intensity);
        sextet = apply_noise(sextet, config.noise, config.seed, i);
        data.records.push_back({omega, config.input_intensity, sextet});
    }
    return data;
}

// One reconstructed tomography point.
struct PointEstimate {
    StokesVector stokes;
    double purity = 0.0;
    double r_total = 0.0;     // clamped to [0, 1]
    double r_total_raw = 0.0; // before clamping
    bool clamped = false;     // r_total_raw fell outside the tolerated range
    double pair_disagreement = 0.0;
};

// Inverts project_intensities on measured data. r_total uses the HV pair;
// raw values beyond 1 + 3 * noise_level are clamped and flagged, never
// silently dropped.
inline PointEstimate reconstruct_point(const IntensitySextet& sextet,
                                       double input_intensity,
                                       double noise_level = 0.0) {
    if (!(input_intensity > 0.0))
        throw InvalidArgumentError("reconstruct_point: input intensity must be positive");
    PointEstimate est;
    est.stokes = stokes_from_intensities(sextet);
    est.purity = degree_of_polarization(est.stokes);
    est.pair_disagreement = pair_sum_disagreement(sextet);
    est.r_total_raw = (sextet.i_h + sextet.i_v) / input_intensity;
    est.r_total = std::clamp(est.r_total_raw, 0.0, 1.0);
    est.clamped = est.r_total_raw > 1.0 + 3.0 * noise_level || est.r_total_raw < 0.0;
    return est;
}

// Reconstructs every record of a dataset.
inline std::vector<PointEstimate> reconstruct_scan(const ScanDataset& data,
                                                   double noise_level = 0.0) {
    std::vector<PointEstimate> points;
    points.reserve(data.records.size());
    for (const auto& rec : data.records)
        points.push_back(reconstruct_point(rec.sextet, rec.input_intensity, noise_level));
    return points;
}

// Unit Poincare direction averaged over the two scan edges, where the cavity
// response is flat and the reflected state matches the input. Serves as the
// reference direction for rotation metrics and as an input-state estimate.
inline StokesVector off_resonance_direction(const std::vector<StokesVector>& stokes) {
    if (stokes.empty())
        throw InsufficientDataError("off_resonance_direction: no points");
    const StokesVector& a = stokes.front();
    const StokesVector& b = stokes.back();
    const double na = degree_of_polarization(a);
    const double nb = degree_of_polarization(b);
    if (na <= 0.0 || nb <= 0.0)
        throw InsufficientDataError("off_resonance_direction: depolarized scan edges");
    StokesVector dir{a.s_hv / na + b.s_hv / nb, a.s_da / na + b.s_da / nb,
                     a.s_rl / na + b.s_rl / nb, 1.0};
    const double n = degree_of_polarization(dir);
    if (n <= 0.0)
        throw InsufficientDataError("off_resonance_direction: edge directions cancel");
    return {dir.s_hv / n, dir.s_da / n, dir.s_rl / n, 1.0};
}

// Indices of points whose basis-pair sums disagree by more than five times
// the relative noise level; on noiseless data any disagreement flags.
inline std::vector<std::size_t> inconsistent_points(const ScanDataset& data,
                                                    double noise_level) {
    std::vector<std::size_t> flagged;
    const double threshold = 5.0 * noise_level;
    for (std::size_t i = 0; i < data.records.size(); ++i)
        if (pair_sum_disagreement(data.records[i].sextet) > threshold)
            flagged.push_back(i);
    return flagged;
}

} // namespace cavtomo
