#pragma once

/**
 * Damped least squares (Gauss-Newton with adaptive Levenberg damping) for
 * small smooth problems. The residual function maps an n-vector of
 * parameters to an m-vector of weighted residuals; Jacobians come from
 * forward finite differences, with a central-difference variant kept as the
 * reference for accuracy checks and covariance work.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "cavtomo/errors.hpp"

namespace cavtomo {

struct LsqOptions {
    int max_iterations = 200;
    double gradient_tol = 1e-10; // on the infinity norm of J^T r
    double step_tol = 1e-12;     // relative step size
    double initial_damping = 1e-3;
    double damping_increase = 10.0;
    double damping_decrease = 3.0;
    double max_damping = 1e14;
    // Cap on the infinity norm of one step. Parameters are expected in
    // well-scaled coordinates (log linewidths, logit couplings), where a
    // bounded step keeps near-flat directions from saturating.
    double max_step = 10.0;
};

struct LsqResult {
    Eigen::VectorXd x;
    double residual_norm = 0.0; // ||r|| at the solution
    bool converged = false;
    int iterations = 0;
    std::string stop_reason;
};

namespace detail {

inline double fd_step(double x, double scale) {
    return scale * std::max(std::abs(x), 1.0);
}

} // namespace detail

// Forward-difference Jacobian; reuses the residual value at x.
template <typename F>
Eigen::MatrixXd numeric_jacobian_forward(F&& f, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& fx) {
    static const double scale = std::sqrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd jac(fx.size(), x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = detail::fd_step(x[j], scale);
        xp[j] = x[j] + h;
        const Eigen::VectorXd fp = f(xp);
        jac.col(j) = (fp - fx) / (xp[j] - x[j]);
        xp[j] = x[j];
    }
    return jac;
}

// Central-difference Jacobian, roughly two digits more accurate; the
// reference the forward version is checked against.
template <typename F>
Eigen::MatrixXd numeric_jacobian_central(F&& f, const Eigen::VectorXd& x) {
    static const double scale = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd jac;
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = detail::fd_step(x[j], scale);
        xp[j] = x[j] + h;
        const Eigen::VectorXd fp = f(xp);
        xp[j] = x[j] - h;
        const Eigen::VectorXd fm = f(xp);
        if (jac.size() == 0) jac.resize(fp.size(), x.size());
        jac.col(j) = (fp - fm) / (2.0 * h);
        xp[j] = x[j];
    }
    return jac;
}

template <typename F>
LsqResult levenberg_marquardt(F&& residual_fn, Eigen::VectorXd x0,
                              const LsqOptions& opts = {}) {
    if (x0.size() == 0)
        throw InvalidArgumentError("levenberg_marquardt: empty parameter vector");

    LsqResult result;
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd r = residual_fn(x);
    double cost = 0.5 * r.squaredNorm();
    double damping = opts.initial_damping;

    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        result.iterations = iter;
        const Eigen::MatrixXd jac = numeric_jacobian_forward(residual_fn, x, r);
        const Eigen::VectorXd grad = jac.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() < opts.gradient_tol) {
            result.converged = true;
            result.stop_reason = "gradient below tolerance";
            break;
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;

        bool accepted = false;
        Eigen::VectorXd step;
        while (damping <= opts.max_damping) {
            // Identity (Levenberg) damping: the internal coordinates are
            // already comparably scaled, and flat directions stay restrained
            // even where their own curvature vanishes.
            Eigen::MatrixXd a = jtj;
            a.diagonal().array() += damping;
            step = a.ldlt().solve(-grad);
            if (!step.allFinite()) {
                damping *= opts.damping_increase;
                continue;
            }
            if (opts.max_step > 0.0) {
                const double biggest = step.lpNorm<Eigen::Infinity>();
                if (biggest > opts.max_step) step *= opts.max_step / biggest;
            }
            const Eigen::VectorXd x_try = x + step;
            const Eigen::VectorXd r_try = residual_fn(x_try);
            const double cost_try = 0.5 * r_try.squaredNorm();
            if (cost_try < cost) {
                x = x_try;
                r = r_try;
                cost = cost_try;
                damping = std::max(damping / opts.damping_decrease, 1e-14);
                accepted = true;
                break;
            }
            damping *= opts.damping_increase;
        }

        if (!accepted) {
            // No damping level improved the cost: the quadratic model is
            // exhausted at this accuracy, which at tiny residuals is a
            // converged state rather than a failure.
            result.converged = true;
            result.stop_reason = "no further cost reduction";
            break;
        }
        if (step.norm() <= opts.step_tol * (x.norm() + opts.step_tol)) {
            result.converged = true;
            result.stop_reason = "step below tolerance";
            break;
        }
        if (iter == opts.max_iterations)
            result.stop_reason = "maximum iterations reached";
    }

    result.x = std::move(x);
    result.residual_norm = std::sqrt(2.0 * cost);
    if (result.stop_reason.empty())
        result.stop_reason = "maximum iterations reached";
    return result;
}

// ---------------------------------------------------------------------------
// Covariance of the estimates from the Jacobian at the solution.

struct CovarianceEstimate {
    Eigen::MatrixXd covariance;  // sigma^2 * (J^T J)^+
    Eigen::VectorXd std_errors;  // sqrt of the diagonal
    double sigma2 = 0.0;         // residual variance estimate
    int rank = 0;
    Eigen::MatrixXd null_space;  // columns spanning the unresolved subspace
};

inline CovarianceEstimate covariance_from_jacobian(const Eigen::MatrixXd& jac,
                                                   double residual_norm,
                                                   double rank_rcond = 1e-8) {
    const Eigen::Index m = jac.rows();
    const Eigen::Index n = jac.cols();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = rank_rcond * (sv.size() > 0 ? sv[0] : 0.0);

    CovarianceEstimate est;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) ++est.rank;

    const Eigen::Index dof = m - est.rank;
    est.sigma2 = dof > 0 ? residual_norm * residual_norm / static_cast<double>(dof) : 0.0;

    Eigen::VectorXd inv2 = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) inv2[i] = 1.0 / (sv[i] * sv[i]);
    est.covariance = svd.matrixV() * inv2.asDiagonal() * svd.matrixV().transpose() * est.sigma2;
    est.std_errors = est.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();

    const Eigen::Index deficiency = n - est.rank;
    est.null_space.resize(n, deficiency);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (!(sv[i] > cutoff)) est.null_space.col(col++) = svd.matrixV().col(i);
    return est;
}

} // namespace cavtomo
