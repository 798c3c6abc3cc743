#pragma once

/**
 * File formats.
 *
 * Dataset CSV: comment lines starting with '#', then the exact header
 *   omega_ueV,I_in,I_H,I_V,I_D,I_A,I_R,I_L
 * and one row per detuning. Decimal points, no thousands separators, 17
 * significant digits so values survive a write/read round trip bit-exactly.
 *
 * A dataset written to <path> gets a key-value sidecar at <path>.meta with
 * the input-state angles, device label, seed and noise spec.
 *
 * Curve tables share the comment convention with headers
 *   omega_ueV,R_tot,s_HV,s_DA,s_RL,purity    (reconstruction / fitted curves)
 *   omega_ueV,x,y,z,purity                   (Poincare trajectory)
 *   eta_in,min_purity                        (purity map)
 *   eta_in,eta_out_low,eta_out_high          (degeneracy profile)
 */

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cavtomo/errors.hpp"
#include "cavtomo/simulate.hpp"

namespace cavtomo {

inline constexpr const char* kDatasetHeader = "omega_ueV,I_in,I_H,I_V,I_D,I_A,I_R,I_L";
inline constexpr const char* kCurvesHeader = "omega_ueV,R_tot,s_HV,s_DA,s_RL,purity";
inline constexpr const char* kPoincareHeader = "omega_ueV,x,y,z,purity";
inline constexpr const char* kPurityMapHeader = "eta_in,min_purity";
inline constexpr const char* kProfileHeader = "eta_in,eta_out_low,eta_out_high";

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& field, const std::string& context) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw IoError(context + ": malformed number '" + field + "'");
    return v;
}

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline void write_comments(std::ofstream& out, const std::vector<std::string>& comments) {
    for (const auto& c : comments) out << "# " << c << "\n";
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dataset CSV + metadata sidecar

inline void write_dataset_csv(const std::string& path, const ScanDataset& data,
                              const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    detail::write_comments(out, comments);
    out << kDatasetHeader << "\n";
    for (const auto& r : data.records) {
        out << detail::format_double(r.omega) << ','
            << detail::format_double(r.input_intensity) << ','
            << detail::format_double(r.sextet.i_h) << ','
            << detail::format_double(r.sextet.i_v) << ','
            << detail::format_double(r.sextet.i_d) << ','
            << detail::format_double(r.sextet.i_a) << ','
            << detail::format_double(r.sextet.i_r) << ','
            << detail::format_double(r.sextet.i_l) << "\n";
    }
    if (!out)
        throw IoError("failed while writing '" + path + "'");
}

inline void write_metadata_sidecar(const std::string& dataset_path,
                                   const ScanMetadata& meta,
                                   const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(dataset_path + ".meta");
    detail::write_comments(out, comments);
    out << "input_theta_rad = " << detail::format_double(meta.input_theta) << "\n";
    out << "input_phi_rad = " << detail::format_double(meta.input_phi) << "\n";
    out << "device_label = " << meta.device_label << "\n";
    out << "seed = " << meta.seed << "\n";
    out << "noise_kind = " << NoiseModel::kind_name(meta.noise.kind) << "\n";
    out << "noise_level = " << detail::format_double(meta.noise.level) << "\n";
}

inline ScanMetadata read_metadata_sidecar(const std::string& dataset_path) {
    std::ifstream in(dataset_path + ".meta");
    if (!in)
        throw IoError("cannot open metadata sidecar '" + dataset_path + ".meta'");
    ScanMetadata meta;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(dataset_path + ".meta line " + std::to_string(lineno) +
                          ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string ctx = dataset_path + ".meta";
        if (key == "input_theta_rad") {
            meta.input_theta = detail::parse_double(value, ctx);
            meta.input_state_known = true;
        } else if (key == "input_phi_rad") meta.input_phi = detail::parse_double(value, ctx);
        else if (key == "device_label") meta.device_label = value;
        else if (key == "seed") meta.seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "noise_kind") meta.noise.kind = NoiseModel::kind_from_name(value);
        else if (key == "noise_level") meta.noise.level = detail::parse_double(value, ctx);
        else throw IoError(ctx + ": unknown key '" + key + "'");
    }
    return meta;
}

// Reads a dataset CSV; picks up the sidecar when present unless
// require_sidecar demands it.
inline ScanDataset read_dataset_csv(const std::string& path, bool require_sidecar = false) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open dataset '" + path + "'");
    ScanDataset data;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kDatasetHeader)
                throw IoError(path + " line " + std::to_string(lineno) +
                              ": expected header '" + kDatasetHeader + "'");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv_row(line);
        if (fields.size() != 8)
            throw IoError(path + " line " + std::to_string(lineno) +
                          ": expected 8 fields, got " + std::to_string(fields.size()));
        const std::string ctx = path + " line " + std::to_string(lineno);
        ScanRecord rec;
        rec.omega = detail::parse_double(fields[0], ctx);
        rec.input_intensity = detail::parse_double(fields[1], ctx);
        rec.sextet.i_h = detail::parse_double(fields[2], ctx);
        rec.sextet.i_v = detail::parse_double(fields[3], ctx);
        rec.sextet.i_d = detail::parse_double(fields[4], ctx);
        rec.sextet.i_a = detail::parse_double(fields[5], ctx);
        rec.sextet.i_r = detail::parse_double(fields[6], ctx);
        rec.sextet.i_l = detail::parse_double(fields[7], ctx);
        for (double v : {rec.input_intensity, rec.sextet.i_h, rec.sextet.i_v,
                         rec.sextet.i_d, rec.sextet.i_a, rec.sextet.i_r, rec.sextet.i_l})
            if (v < 0.0 || !std::isfinite(v))
                throw IoError(ctx + ": negative or non-finite intensity");
        if (!data.records.empty() && rec.omega <= data.records.back().omega)
            throw IoError(ctx + ": omega values must be strictly increasing");
        data.records.push_back(rec);
    }
    if (!header_seen)
        throw IoError(path + ": missing dataset header");
    std::ifstream sidecar(path + ".meta");
    if (sidecar.good())
        data.metadata = read_metadata_sidecar(path);
    else if (require_sidecar)
        throw IoError("missing metadata sidecar '" + path + ".meta'");
    return data;
}

// ---------------------------------------------------------------------------
// Curve tables

struct CurveRow {
    double omega = 0.0;
    double r_total = 0.0;
    double s_hv = 0.0;
    double s_da = 0.0;
    double s_rl = 0.0;
    double purity = 0.0;
};

inline void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows,
                             const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) out << "# " << c << "\n";
    out << kCurvesHeader << "\n";
    for (const auto& r : rows) {
        out << detail::format_double(r.omega) << ',' << detail::format_double(r.r_total)
            << ',' << detail::format_double(r.s_hv) << ',' << detail::format_double(r.s_da)
            << ',' << detail::format_double(r.s_rl) << ',' << detail::format_double(r.purity)
            << "\n";
    }
}

inline void write_curves_csv(const std::string& path, const std::vector<CurveRow>& rows,
                             const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    write_curves_csv(out, rows, comments);
}

// Poincare trajectory (x, y, z) = (s_HV, s_DA, s_RL) per detuning.
inline void write_poincare_csv(const std::string& path, const std::vector<CurveRow>& rows,
                               const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    detail::write_comments(out, comments);
    out << kPoincareHeader << "\n";
    for (const auto& r : rows) {
        out << detail::format_double(r.omega) << ',' << detail::format_double(r.s_hv)
            << ',' << detail::format_double(r.s_da) << ',' << detail::format_double(r.s_rl)
            << ',' << detail::format_double(r.purity) << "\n";
    }
}

inline void write_purity_map_csv(const std::string& path,
                                 const std::vector<std::pair<double, double>>& rows,
                                 const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    detail::write_comments(out, comments);
    out << kPurityMapHeader << "\n";
    for (const auto& [eta, purity] : rows)
        out << detail::format_double(eta) << ',' << detail::format_double(purity) << "\n";
}

} // namespace cavtomo
