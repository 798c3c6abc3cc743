#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cavtomo/least_squares.hpp"

using namespace cavtomo;

TEST_CASE("levenberg_marquardt solves an exponential decay fit") {
    const double a_true = 2.7, b_true = 0.35;
    std::vector<double> t, y;
    for (int i = 0; i < 40; ++i) {
        t.push_back(0.25 * i);
        y.push_back(a_true * std::exp(-b_true * t.back()));
    }
    auto residuals = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = x[0] * std::exp(-x[1] * t[i]) - y[i];
        return r;
    };
    Eigen::VectorXd x0(2);
    x0 << 1.0, 1.0;
    const LsqResult res = levenberg_marquardt(residuals, x0);
    CHECK(res.converged);
    CHECK(res.x[0] == Catch::Approx(a_true).margin(1e-8));
    CHECK(res.x[1] == Catch::Approx(b_true).margin(1e-8));
    CHECK(res.residual_norm < 1e-8);
}

TEST_CASE("levenberg_marquardt handles strongly curved valleys") {
    auto rosenbrock = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(2);
        r[0] = 10.0 * (x[1] - x[0] * x[0]);
        r[1] = 1.0 - x[0];
        return r;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    LsqOptions opts;
    opts.max_iterations = 500;
    const LsqResult res = levenberg_marquardt(rosenbrock, x0, opts);
    CHECK(res.converged);
    CHECK(res.x[0] == Catch::Approx(1.0).margin(1e-6));
    CHECK(res.x[1] == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("non-convergence is flagged, not thrown") {
    auto slow = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(1);
        r[0] = std::atan(x[0]) - 1.2;
        return r;
    };
    Eigen::VectorXd x0(1);
    x0 << 80.0;
    LsqOptions opts;
    opts.max_iterations = 2;
    const LsqResult res = levenberg_marquardt(slow, x0, opts);
    CHECK_FALSE(res.converged);
    CHECK(res.stop_reason == "maximum iterations reached");
}

TEST_CASE("forward and central Jacobians agree on smooth functions") {
    auto fn = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(3);
        r[0] = std::sin(x[0]) * std::exp(0.3 * x[1]);
        r[1] = x[0] * x[0] - 2.0 * x[1];
        r[2] = std::cos(x[0] * x[1]);
        return r;
    };
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        Eigen::VectorXd x(2);
        x << uni(rng), uni(rng);
        const Eigen::MatrixXd jf = numeric_jacobian_forward(fn, x, fn(x));
        const Eigen::MatrixXd jc = numeric_jacobian_central(fn, x);
        CHECK((jf - jc).norm() <= 1e-5 * jc.norm() + 1e-9);
    }
}

TEST_CASE("covariance matches the analytic linear-model result") {
    // y = a + b t with unit weights: cov = sigma^2 (X^T X)^{-1}
    const int n = 50;
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = 0.1 * i;
    }
    const double residual_norm = 0.3; // plays the role of sqrt(RSS)
    const CovarianceEstimate est = covariance_from_jacobian(x, residual_norm);
    CHECK(est.rank == 2);
    const double sigma2 = residual_norm * residual_norm / (n - 2);
    const Eigen::MatrixXd expected = sigma2 * (x.transpose() * x).inverse();
    CHECK((est.covariance - expected).norm() < 1e-10 * expected.norm());
    CHECK(est.std_errors[0] == Catch::Approx(std::sqrt(expected(0, 0))));
    CHECK(est.null_space.cols() == 0);
}

TEST_CASE("rank deficiency shows up as a null-space direction") {
    // residuals depend on x0 + x1 only
    Eigen::MatrixXd jac(10, 2);
    for (int i = 0; i < 10; ++i) {
        jac(i, 0) = 0.5 + 0.1 * i;
        jac(i, 1) = 0.5 + 0.1 * i;
    }
    const CovarianceEstimate est = covariance_from_jacobian(jac, 1.0);
    CHECK(est.rank == 1);
    REQUIRE(est.null_space.cols() == 1);
    // the unresolved direction is (1, -1)/sqrt(2)
    CHECK(std::abs(est.null_space(0, 0)) == Catch::Approx(std::abs(est.null_space(1, 0))));
    CHECK(est.null_space(0, 0) * est.null_space(1, 0) < 0.0);
}

TEST_CASE("refitting from a solution stays put") {
    auto residuals = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(3);
        r[0] = x[0] - 1.5;
        r[1] = x[1] + 0.5;
        r[2] = 0.3 * (x[0] * x[1] + 0.75);
        return r;
    };
    Eigen::VectorXd x0(2);
    x0 << 0.0, 0.0;
    const LsqResult first = levenberg_marquardt(residuals, x0);
    REQUIRE(first.converged);
    const LsqResult second = levenberg_marquardt(residuals, first.x);
    CHECK(second.converged);
    CHECK((second.x - first.x).norm() < 1e-10);
}
