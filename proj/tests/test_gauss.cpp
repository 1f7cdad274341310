#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "pgeq/gauss.hpp"
#include "pgeq/quadrature.hpp"
#include "pgeq/rng.hpp"

using namespace pgeq;

namespace {

Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
}

GaussianPolicy identity_policy(int n) {
    GaussianPolicy p;
    p.theta = Eigen::VectorXd::Zero(n);
    p.mean = [](const Eigen::VectorXd&, const Eigen::VectorXd& th) { return th; };
    p.mean_jacobian = [n](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Identity(n, n);
    };
    return p;
}

// Deterministic pseudo-random scalar in [-1, 1].
double jitter(std::uint64_t i, std::uint64_t j) {
    return 2.0 * counter_uniform(99, i, j, 0) - 1.0;
}

}  // namespace

TEST_CASE("score: identity plumbing") {
    GaussianPolicy p = identity_policy(2);
    Eigen::VectorXd u(2);
    u << 1.0, 0.0;
    const Eigen::VectorXd s =
        score(p, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), u);
    CHECK(s[0] == doctest::Approx(1.0));
    CHECK(s[1] == doctest::Approx(0.0));
}

TEST_CASE("score: zero at the mean") {
    GaussianPolicy p = identity_policy(2);
    p.theta << 0.3, -0.7;
    const Eigen::VectorXd s = score(p, 0.5 * Eigen::MatrixXd::Identity(2, 2),
                                    Eigen::VectorXd::Zero(2), p.theta);
    CHECK(s.norm() == doctest::Approx(0.0));
}

TEST_CASE("score: matches finite differences of the log density") {
    // mu(x, theta) = theta (2-D), so d/dtheta ln N(u; mu, Sigma) is the score.
    GaussianPolicy p = identity_policy(2);
    p.theta << 0.4, -0.2;
    Eigen::MatrixXd Sigma(2, 2);
    Sigma << 0.5, 0.1, 0.1, 0.3;
    Eigen::VectorXd u(2);
    u << 0.9, 0.3;
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd s = score(p, Sigma, x, u);

    auto log_density = [&](const Eigen::VectorXd& th) {
        const Eigen::VectorXd d = u - th;
        return -0.5 * d.dot(Sigma.inverse() * d);
    };
    for (int i = 0; i < 2; ++i) {
        const double h = 1e-6;
        Eigen::VectorXd tp = p.theta, tm = p.theta;
        tp[i] += h;
        tm[i] -= h;
        const double fd = (log_density(tp) - log_density(tm)) / (2 * h);
        CHECK(s[i] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("score: singular Sigma rejected") {
    GaussianPolicy p = identity_policy(2);
    CHECK_THROWS(score(p, Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2),
                       Eigen::VectorXd::Zero(2)));
}

TEST_CASE("expected_quadratic_cost: direct trace") {
    Eigen::MatrixXd Sigma = Eigen::Vector2d(0.1, 0.2).asDiagonal();
    const double c = expected_quadratic_cost(0.0, Eigen::VectorXd::Zero(2),
                                             Eigen::MatrixXd::Identity(2, 2),
                                             Eigen::VectorXd::Zero(2), Sigma);
    CHECK(c == doctest::Approx(0.3));
}

TEST_CASE("expected_quadratic_cost: R = 0 leaves l(x, mu)") {
    Eigen::VectorXd r(2), mu(2);
    r << 1.0, -2.0;
    mu << 0.5, 0.25;
    const double c = expected_quadratic_cost(3.0, r, Eigen::MatrixXd::Zero(2, 2), mu,
                                             0.7 * Eigen::MatrixXd::Identity(2, 2));
    CHECK(c == doctest::Approx(3.0 + r.dot(mu)));
}

TEST_CASE("expected_quadratic_cost: matches order-5 quadrature on random 3-D instances") {
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd M(3, 3);
        Eigen::VectorXd r(3), mu(3);
        for (int i = 0; i < 3; ++i) {
            r[i] = jitter(trial, 10 + i);
            mu[i] = jitter(trial, 20 + i);
            for (int j = 0; j < 3; ++j) M(i, j) = jitter(trial, 30 + 3 * i + j);
        }
        const Eigen::MatrixXd R = 0.5 * (M + M.transpose());
        const Eigen::MatrixXd Sigma =
            M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
        const double q = jitter(trial, 50);
        const double closed = expected_quadratic_cost(q, r, R, mu, Sigma);
        const QuadratureRule rule = make_quadrature(3, 5, Sigma);
        const double quad = rule.expect([&](const Eigen::VectorXd& d) {
            const Eigen::VectorXd u = mu + d;
            return q + u.dot(r) + u.dot(R * u);
        });
        CHECK(closed == doctest::Approx(quad).epsilon(1e-10));
    }
}

TEST_CASE("expected_quadratic_cost: asymmetric R rejected") {
    Eigen::MatrixXd R(2, 2);
    R << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS(expected_quadratic_cost(0.0, Eigen::VectorXd::Zero(2), R,
                                         Eigen::VectorXd::Zero(2),
                                         Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("stein_residual: cubic moment identity") {
    const double sigma2 = 0.36;
    Eigen::MatrixXd Sigma(1, 1);
    Sigma << sigma2;
    const QuadratureRule rule = make_quadrature(1, 4, Sigma);
    const double res = stein_residual(
        [](const Eigen::VectorXd& y) { return y[0] * y[0] * y[0]; }, vec1(0.0), Sigma,
        rule);
    CHECK(res < 1e-8);
}

TEST_CASE("stein_residual: constant test function vanishes") {
    Eigen::MatrixXd Sigma(1, 1);
    Sigma << 0.25;
    const QuadratureRule rule = make_quadrature(1, 6, Sigma);
    const double res =
        stein_residual([](const Eigen::VectorXd&) { return 2.5; }, vec1(0.1), Sigma, rule);
    CHECK(res == doctest::Approx(0.0));
}

TEST_CASE("stein_residual: sin at high order") {
    Eigen::MatrixXd Sigma(1, 1);
    Sigma << 0.25;
    const QuadratureRule rule = make_quadrature(1, 20, Sigma);
    const double res = stein_residual(
        [](const Eigen::VectorXd& y) { return std::sin(y[0]); }, vec1(0.3), Sigma, rule);
    CHECK(res < 1e-6);
}

TEST_CASE("stein_residual: polynomials up to degree 2k-2") {
    Eigen::MatrixXd Sigma(1, 1);
    Sigma << 0.49;
    const int order = 6;
    const QuadratureRule rule = make_quadrature(1, order, Sigma);
    for (int deg = 0; deg <= 2 * order - 2; ++deg) {
        const double res = stein_residual(
            [deg](const Eigen::VectorXd& y) { return std::pow(y[0], deg); }, vec1(0.2),
            Sigma, rule);
        CAPTURE(deg);
        CHECK(res < 1e-6);
    }
}

TEST_CASE("make_quadrature: two-point rule is +-sigma with equal weights") {
    Eigen::MatrixXd Sigma(1, 1);
    Sigma << 0.09;
    const QuadratureRule rule = make_quadrature(1, 2, Sigma);
    REQUIRE(rule.nodes.size() == 2);
    CHECK(std::abs(rule.nodes[0][0]) == doctest::Approx(0.3));
    CHECK(std::abs(rule.nodes[1][0]) == doctest::Approx(0.3));
    CHECK(rule.nodes[0][0] == doctest::Approx(-rule.nodes[1][0]));
    CHECK(rule.weights[0] == doctest::Approx(0.5));
    CHECK(rule.weights[1] == doctest::Approx(0.5));
}

TEST_CASE("make_quadrature: second moment is exact") {
    Eigen::MatrixXd Sigma = Eigen::Vector2d(0.4, 1.7).asDiagonal();
    const QuadratureRule rule = make_quadrature(2, 3, Sigma);
    const double m2 = rule.expect([](const Eigen::VectorXd& d) { return d.squaredNorm(); });
    CHECK(m2 == doctest::Approx(2.1).epsilon(1e-12));
}

TEST_CASE("make_quadrature: weights sum to 1 and low monomials integrate exactly") {
    Eigen::MatrixXd Sigma(1, 1);
    Sigma << 1.0;
    const QuadratureRule rule = make_quadrature(1, 5, Sigma);
    CHECK(rule.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // Standard normal moments: 0, 1, 0, 3, 0 for degrees 1..5.
    const double moments[5] = {0.0, 1.0, 0.0, 3.0, 0.0};
    for (int deg = 1; deg <= 5; ++deg) {
        const double got = rule.expect(
            [deg](const Eigen::VectorXd& d) { return std::pow(d[0], deg); });
        CHECK(std::abs(got - moments[deg - 1]) < 1e-10);
    }
}

TEST_CASE("make_quadrature: dimension cap and order floor") {
    CHECK_THROWS(make_quadrature(4, 5, Eigen::MatrixXd::Identity(4, 4)));
    CHECK_THROWS(make_quadrature(1, 1, Eigen::MatrixXd::Identity(1, 1)));
}

TEST_CASE("score integrates to zero against the policy density") {
    GaussianPolicy p = identity_policy(2);
    p.theta << 0.2, -0.4;
    Eigen::MatrixXd Sigma(2, 2);
    Sigma << 0.3, 0.05, 0.05, 0.2;
    const QuadratureRule rule = make_quadrature(2, 8, Sigma);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd mean_score = rule.expect_vec([&](const Eigen::VectorXd& d) {
        return score(p, Sigma, x, p.theta + d);
    });
    CHECK(mean_score.cwiseAbs().maxCoeff() < 1e-8);
}
