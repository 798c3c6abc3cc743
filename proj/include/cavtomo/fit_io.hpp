#pragma once

// Key-value serialization of fit results and branch diagnostics.

#include <ostream>
#include <string>
#include <vector>

#include "cavtomo/branch.hpp"
#include "cavtomo/dataset_io.hpp"
#include "cavtomo/fit.hpp"

namespace cavtomo {

inline void write_fit_result(std::ostream& out, const FitResult& fit,
                             const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "converged = " << (fit.converged ? "true" : "false") << "\n";
    out << "status = " << fit.status << "\n";
    out << "iterations = " << fit.iterations << "\n";
    out << "residual_norm = " << detail::format_double(fit.residual_norm) << "\n";
    out << "n_residuals = " << fit.n_residuals << "\n";
    out << "sigma2 = " << detail::format_double(fit.sigma2) << "\n";
    for (int i = 0; i < kNumParams; ++i) {
        out << "param." << kParamNames[i] << " = "
            << detail::format_double(fit.estimates[i])
            << (fit.free[i] ? "" : "  # fixed") << "\n";
        out << "stderr." << kParamNames[i] << " = "
            << detail::format_double(fit.std_errors[i]) << "\n";
    }
    out << "covariance_order = ";
    for (std::size_t i = 0; i < fit.free_names.size(); ++i)
        out << (i ? "," : "") << fit.free_names[i];
    out << "\n";
    out << "covariance =";
    for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r)
        for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c)
            out << ' ' << detail::format_double(fit.covariance(r, c));
    out << "\n";
    if (!fit.unresolved.empty()) {
        out << "unresolved = ";
        for (std::size_t i = 0; i < fit.unresolved.size(); ++i)
            out << (i ? "," : "") << fit.unresolved[i];
        out << "\n";
    }
}

inline void write_fit_result(const std::string& path, const FitResult& fit,
                             const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    write_fit_result(out, fit, comments);
}

inline void write_bootstrap_result(std::ostream& out, const BootstrapResult& boot) {
    out << "bootstrap.replicas = " << boot.n_replicas << "\n";
    out << "bootstrap.failed = " << boot.n_failed << "\n";
    for (std::size_t i = 0; i < boot.free_names.size(); ++i) {
        out << "bootstrap.std." << boot.free_names[i] << " = "
            << detail::format_double(boot.std_devs[i]) << "\n";
        out << "bootstrap.q025." << boot.free_names[i] << " = "
            << detail::format_double(boot.q025[i]) << "\n";
        out << "bootstrap.q975." << boot.free_names[i] << " = "
            << detail::format_double(boot.q975[i]) << "\n";
    }
}

inline void write_branch_diagnostics(std::ostream& out, const BranchDiagnostics& diag,
                                     const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "candidate_low = " << detail::format_double(diag.candidate_low) << "\n";
    out << "candidate_high = " << detail::format_double(diag.candidate_high) << "\n";
    out << "rotation_metric_measured = "
        << detail::format_double(diag.rotation_measured) << "\n";
    out << "rotation_metric_low = " << detail::format_double(diag.rotation_low) << "\n";
    out << "rotation_metric_high = " << detail::format_double(diag.rotation_high) << "\n";
    out << "chosen = " << (diag.chosen == BranchChoice::high ? "high" : "low") << "\n";
    out << "ambiguous = " << (diag.ambiguous ? "true" : "false") << "\n";
}

inline void write_branch_diagnostics(const std::string& path,
                                     const BranchDiagnostics& diag,
                                     const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    write_branch_diagnostics(out, diag, comments);
}

inline void write_degeneracy_profile(const std::string& path,
                                     const DegeneracyProfile& profile,
                                     const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path);
    detail::write_comments(out, comments);
    out << "# min_r_total: " << detail::format_double(profile.min_r_total) << "\n";
    out << kProfileHeader << "\n";
    for (const auto& pt : profile.points)
        out << detail::format_double(pt.eta_in) << ','
            << detail::format_double(pt.eta_out_low) << ','
            << detail::format_double(pt.eta_out_high) << "\n";
}

} // namespace cavtomo
