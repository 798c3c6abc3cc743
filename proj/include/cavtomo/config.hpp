#pragma once

/**
 * Structured-text run configuration.
 *
 * One INI-style file with sections {cavity, coupling, scan, noise, fit};
 * '#' and ';' start comments, keys are `name = value`. Keys carrying a
 * physical unit spell it in the name (kappa_h_ueV, input_theta_rad) so a
 * config cannot silently mix scales. Unknown sections or keys are schema
 * errors that name the offender.
 *
 * Environment overrides: CAVTOMO_SEED replaces [noise] seed, CAVTOMO_OUTDIR
 * is prepended to relative output paths by the CLI.
 */

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cavtomo/cavity.hpp"
#include "cavtomo/errors.hpp"
#include "cavtomo/fit.hpp"
#include "cavtomo/simulate.hpp"

namespace cavtomo {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

} // namespace detail

// Parsed file: section -> key -> raw value, plus bookkeeping for the
// unknown-key check.
class IniFile {
public:
    static IniFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file '" + path + "'");
        return parse_stream(in, path);
    }

    static IniFile parse_stream(std::istream& in, const std::string& label = "<config>") {
        IniFile ini;
        ini.label_ = label;
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto comment = line.find_first_of("#;");
            if (comment != std::string::npos) line.erase(comment);
            line = detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(label + " line " + std::to_string(lineno) +
                                      ": unterminated section header");
                section = detail::trim(line.substr(1, line.size() - 2));
                ini.sections_[section]; // register even if empty
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(label + " line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(label + " line " + std::to_string(lineno) + ": empty key");
            ini.sections_[section][key] = value;
        }
        return ini;
    }

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    // Section present with at least one key set.
    bool section_present(const std::string& section) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && !s->second.empty();
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        touched_.insert(section + "." + key);
        const auto s = sections_.find(section);
        if (s == sections_.end() || !s->second.count(key))
            throw ConfigError(label_ + ": missing required key [" + section + "] " + key);
        return s->second.at(key);
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        touched_.insert(section + "." + key);
        return has(section, key) ? sections_.at(section).at(key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return parse_number(section, key, get_string(section, key));
    }

    double get_double(const std::string& section, const std::string& key,
                      double fallback) const {
        touched_.insert(section + "." + key);
        if (!has(section, key)) return fallback;
        return parse_number(section, key, sections_.at(section).at(key));
    }

    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const {
        touched_.insert(section + "." + key);
        if (!has(section, key)) return fallback;
        const std::string raw = sections_.at(section).at(key);
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(label_ + ": key [" + section + "] " + key +
                              " is not an integer: '" + raw + "'");
        }
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        std::vector<double> fallback) const {
        touched_.insert(section + "." + key);
        if (!has(section, key)) return fallback;
        std::vector<double> values;
        std::istringstream ss(sections_.at(section).at(key));
        std::string item;
        while (std::getline(ss, item, ','))
            values.push_back(parse_number(section, key, detail::trim(item)));
        return values;
    }

    std::vector<std::string> get_string_list(const std::string& section,
                                             const std::string& key) const {
        touched_.insert(section + "." + key);
        std::vector<std::string> values;
        if (!has(section, key)) return values;
        std::istringstream ss(sections_.at(section).at(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (!item.empty()) values.push_back(item);
        }
        return values;
    }

    // Schema gate: every present key must have been consumed by a getter and
    // every present section must belong to the known set.
    void reject_unknown(const std::set<std::string>& known_sections) const {
        for (const auto& [section, keys] : sections_) {
            if (!known_sections.count(section))
                throw ConfigError(label_ + ": unknown section [" + section + "]");
            for (const auto& [key, value] : keys)
                if (!touched_.count(section + "." + key))
                    throw ConfigError(label_ + ": unknown key [" + section + "] " + key);
        }
    }

private:
    double parse_number(const std::string& section, const std::string& key,
                        const std::string& raw) const {
        const char* begin = raw.c_str();
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin || *end != '\0')
            throw ConfigError(label_ + ": key [" + section + "] " + key +
                              " is not a number: '" + raw + "'");
        return v;
    }

    std::string label_;
    std::map<std::string, std::map<std::string, std::string>> sections_;
    mutable std::set<std::string> touched_;
};

// ---------------------------------------------------------------------------
// Typed views of the config sections

struct FitSettings {
    std::string stage = "full"; // eigenmode | full | joint
    FitConfig config;
    int bootstrap_replicas = 0;
    double branch_ambiguity_tol = 1e-3; // rad, on the rotation metric
};

struct RunConfig {
    CavityParams cavity;
    CouplingConfig coupling;
    ScanConfig scan;
    FitSettings fit;
    std::string device_label;

    bool has_cavity = false;
    bool has_coupling = false;
    bool has_scan = false;
};

namespace detail {

inline JonesVector named_input_state(const std::string& name) {
    if (name == "H") return jones::horizontal();
    if (name == "V") return jones::vertical();
    if (name == "D") return jones::diagonal();
    if (name == "A") return jones::antidiagonal();
    if (name == "R") return jones::circular_right();
    if (name == "L") return jones::circular_left();
    throw ConfigError("[coupling] input_state must be one of H, V, D, A, R, L; got '" +
                      name + "'");
}

} // namespace detail

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1)
        throw InvalidArgumentError("linspace: need at least one point");
    if (n == 1) return {lo};
    std::vector<double> grid(static_cast<std::size_t>(n));
    const double step = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = lo + step * i;
    grid.back() = hi; // exact endpoint
    return grid;
}

inline RunConfig load_run_config(const IniFile& ini) {
    RunConfig rc;

    if (ini.section_present("cavity")) {
        rc.has_cavity = true;
        rc.cavity.omega_c = ini.get_double("cavity", "omega_c_ueV", 0.0);
        rc.cavity.delta_omega = ini.get_double("cavity", "delta_omega_ueV", 0.0);
        rc.cavity.kappa_h = ini.get_double("cavity", "kappa_h_ueV");
        rc.cavity.kappa_v = ini.get_double("cavity", "kappa_v_ueV");
        rc.cavity.eta_out = ini.get_double("cavity", "eta_out", 0.5);
        rc.cavity.absolute_energy = ini.get_double("cavity", "absolute_energy",
                                                   rc.cavity.absolute_energy);
        rc.cavity.validate();
    }

    if (ini.section_present("coupling")) {
        rc.has_coupling = true;
        rc.coupling.eta_in = ini.get_double("coupling", "eta_in");
        const bool named = ini.has("coupling", "input_state");
        const bool angled = ini.has("coupling", "input_theta_rad") ||
                            ini.has("coupling", "input_phi_rad");
        if (named && angled)
            throw ConfigError("[coupling] give either input_state or the angle pair, not both");
        if (named) {
            rc.coupling.input_state =
                detail::named_input_state(ini.get_string("coupling", "input_state"));
        } else if (angled) {
            const double theta = ini.get_double("coupling", "input_theta_rad");
            const double phi = ini.get_double("coupling", "input_phi_rad", 0.0);
            rc.coupling.input_state = jones::from_poincare_angles(theta, phi);
        } else {
            rc.coupling.input_state = jones::diagonal();
        }
        rc.coupling.validate();
    }

    if (ini.section_present("scan")) {
        rc.has_scan = true;
        const double lo = ini.get_double("scan", "omega_min_ueV");
        const double hi = ini.get_double("scan", "omega_max_ueV");
        const int n = static_cast<int>(ini.get_int("scan", "points", 0));
        if (n < 1)
            throw ConfigError("[scan] points must be >= 1");
        if (n > 1 && !(hi > lo))
            throw ConfigError("[scan] omega_max_ueV must exceed omega_min_ueV");
        rc.scan.omega_grid = linspace(lo, hi, n);
        rc.scan.input_intensity = ini.get_double("scan", "input_intensity", 1.0);
        rc.device_label = ini.get_string("scan", "device_label", "");
    }

    const std::string kind = ini.get_string("noise", "kind", "none");
    try {
        rc.scan.noise.kind = NoiseModel::kind_from_name(kind);
    } catch (const InvalidArgumentError&) {
        throw ConfigError("[noise] kind must be none, gaussian-relative or poisson; got '" +
                          kind + "'");
    }
    rc.scan.noise.level = ini.get_double("noise", "level", 0.0);
    rc.scan.seed = static_cast<std::uint64_t>(ini.get_int("noise", "seed", 0));
    if (const char* env_seed = std::getenv("CAVTOMO_SEED")) {
        try {
            rc.scan.seed = std::stoull(env_seed);
        } catch (const std::exception&) {
            throw ConfigError("CAVTOMO_SEED is not an integer: '" + std::string(env_seed) + "'");
        }
    }

    rc.fit.stage = ini.get_string("fit", "stage", "full");
    if (rc.fit.stage != "eigenmode" && rc.fit.stage != "full" && rc.fit.stage != "joint")
        throw ConfigError("[fit] stage must be eigenmode, full or joint; got '" +
                          rc.fit.stage + "'");
    for (const std::string& name : ini.get_string_list("fit", "free")) {
        try {
            rc.fit.config.free[param_index(name)] = true;
        } catch (const InvalidArgumentError&) {
            throw ConfigError("[fit] free: unknown parameter '" + name + "'");
        }
    }
    rc.fit.config.weight_r_tot = ini.get_double("fit", "weight_r_tot", 1.0);
    rc.fit.config.weight_s_hv = ini.get_double("fit", "weight_s_hv", 1.0);
    rc.fit.config.weight_s_da = ini.get_double("fit", "weight_s_da", 1.0);
    rc.fit.config.weight_s_rl = ini.get_double("fit", "weight_s_rl", 1.0);
    rc.fit.config.max_iterations =
        static_cast<int>(ini.get_int("fit", "max_iterations", 200));
    rc.fit.config.gradient_tol = ini.get_double("fit", "gradient_tol", 1e-10);
    rc.fit.config.step_tol = ini.get_double("fit", "step_tol", 1e-12);
    rc.fit.config.multistart_eta_in = ini.get_double_list("fit", "multistart_eta_in", {});
    rc.fit.bootstrap_replicas =
        static_cast<int>(ini.get_int("fit", "bootstrap_replicas", 0));
    rc.fit.branch_ambiguity_tol = ini.get_double("fit", "branch_ambiguity_tol_rad", 1e-3);
    for (int i = 0; i < kNumParams; ++i) {
        const std::string key = std::string("init_") + kParamNames[i];
        rc.fit.config.initial[i] =
            ini.get_double("fit", key, rc.fit.config.initial[i]);
    }

    ini.reject_unknown({"cavity", "coupling", "scan", "noise", "fit"});
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    return load_run_config(IniFile::parse_file(path));
}

} // namespace cavtomo
