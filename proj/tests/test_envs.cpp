#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pgeq/envs.hpp"

using namespace pgeq;

namespace {

Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
}

Eigen::MatrixXd mat1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

LQGEnv scalar_lqg() {
    LQGEnv env;
    env.A = mat1(0.9);
    env.B = mat1(0.5);
    env.Qx = mat1(1.0);
    env.r = Eigen::VectorXd::Zero(1);
    env.R = mat1(0.1);
    env.Sigma = mat1(0.04);
    env.gamma = 0.9;
    env.p0 = InitialDistribution::atom(vec1(0.5));
    return env;
}

}  // namespace

TEST_CASE("lqg_value_oracle: scalar closed loop solved by hand") {
    // Theta = -0.5 gives closed loop m = 0.9 - 0.25 = 0.65 and per-step
    // quadratic cost coefficient c2 = 1 + 0.1 * 0.25 = 1.025, so
    // P = c2 / (1 - gamma m^2).
    const LQGEnv env = scalar_lqg();
    const LQGValue v = lqg_value_oracle(env, mat1(-0.5), Mode::D);
    const double expected_P = 1.025 / (1.0 - 0.9 * 0.65 * 0.65);
    CHECK(v.P(0, 0) == doctest::Approx(expected_P).epsilon(1e-12));
    CHECK(std::abs(v.b[0]) < 1e-12);
}

TEST_CASE("lqg_value_oracle: agrees with scalar value iteration") {
    const LQGEnv env = scalar_lqg();
    const double theta = -0.4;
    const LQGValue v = lqg_value_oracle(env, mat1(theta), Mode::D);

    // Deterministic-cost value iteration on the quadratic ansatz
    // v(x) = p x^2 + k: p <- c2 + gamma m^2 p, k <- gamma (p sigma_x + k)
    // where sigma_x = b^2 Sigma is the state-noise variance.
    const double m = 0.9 + 0.5 * theta;
    const double c2 = 1.0 + 0.1 * theta * theta;
    const double sigma_x = 0.5 * 0.5 * 0.04;
    double p = 0.0, k = 0.0;
    for (int it = 0; it < 600; ++it) {
        const double p_new = c2 + env.gamma * m * m * p;
        const double k_new = env.gamma * (p * sigma_x + k);
        p = p_new;
        k = k_new;
    }
    CHECK(v.P(0, 0) == doctest::Approx(p).epsilon(1e-10));
    CHECK(v.k == doctest::Approx(k).epsilon(1e-10));
}

TEST_CASE("lqg_value_oracle: mode offset and noiseless constants") {
    const LQGEnv env = scalar_lqg();
    const LQGValue v_S = lqg_value_oracle(env, mat1(-0.5), Mode::S);
    const LQGValue v_D = lqg_value_oracle(env, mat1(-0.5), Mode::D);
    CHECK((v_S.P - v_D.P).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(v_S.k - v_D.k == doctest::Approx(0.1 * 0.04 / 0.1).epsilon(1e-12));

    LQGEnv quiet = env;
    quiet.Sigma = mat1(0.0);
    CHECK(lqg_value_oracle(quiet, mat1(-0.5), Mode::D).k == doctest::Approx(0.0));

    LQGEnv free_control = env;
    free_control.R = mat1(0.0);
    const LQGValue v_free = lqg_value_oracle(free_control, mat1(-0.5), Mode::S);
    const LQGValue v_free_D = lqg_value_oracle(free_control, mat1(-0.5), Mode::D);
    CHECK(v_free.k == doctest::Approx(v_free_D.k));  // offset vanishes with R = 0
}

TEST_CASE("lqg_gradient_oracle: matches finite differences of J") {
    const LQGEnv env = scalar_lqg();
    for (double theta : {-0.8, -0.5, -0.1}) {
        const double g = lqg_gradient_oracle(env, mat1(theta))(0, 0);
        const double h = 1e-6;
        const double fd = (lqg_performance(env, mat1(theta + h), Mode::D) -
                           lqg_performance(env, mat1(theta - h), Mode::D)) /
                          (2.0 * h);
        CHECK(g == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("lqg_gradient_oracle: both modes share the gradient") {
    const LQGEnv env = scalar_lqg();
    const double h = 1e-6;
    for (Mode mode : {Mode::S, Mode::D}) {
        const double fd = (lqg_performance(env, mat1(-0.5 + h), mode) -
                           lqg_performance(env, mat1(-0.5 - h), mode)) /
                          (2.0 * h);
        CHECK(lqg_gradient_oracle(env, mat1(-0.5))(0, 0) ==
              doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("lqg_optimal_gain: stationary point of the gradient oracle") {
    const LQGEnv env = scalar_lqg();
    const Eigen::MatrixXd Theta_star = lqg_optimal_gain(env);
    CHECK(lqg_gradient_oracle(env, Theta_star).cwiseAbs().maxCoeff() < 1e-8);
    // Perturbations in either direction cost performance.
    const double j_star = lqg_performance(env, Theta_star, Mode::D);
    CHECK(lqg_performance(env, Theta_star + mat1(0.05), Mode::D) > j_star);
    CHECK(lqg_performance(env, Theta_star - mat1(0.05), Mode::D) > j_star);
}

TEST_CASE("lqg_optimal_gain: preserves diagonal structure") {
    LQGEnv env;
    env.A = Eigen::Vector2d(0.9, 0.8).asDiagonal();
    env.B = Eigen::Vector2d(0.5, 0.4).asDiagonal();
    env.Qx = Eigen::MatrixXd::Identity(2, 2);
    env.r = Eigen::VectorXd::Zero(2);
    env.R = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    env.Sigma = 0.04 * Eigen::MatrixXd::Identity(2, 2);
    env.gamma = 0.9;
    env.p0 = InitialDistribution::atom(Eigen::VectorXd::Zero(2));
    const Eigen::MatrixXd Theta_star = lqg_optimal_gain(env);
    CHECK(std::abs(Theta_star(0, 1)) < 1e-12);
    CHECK(std::abs(Theta_star(1, 0)) < 1e-12);
    CHECK(lqg_gradient_oracle(env, Theta_star).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("lqg_value_oracle: rejects unstable closed loops") {
    const LQGEnv env = scalar_lqg();
    // Theta = 0.5 gives closed loop 1.15 > 1/sqrt(gamma).
    CHECK_THROWS(lqg_value_oracle(env, mat1(0.5), Mode::D));
}

TEST_CASE("to_qgmdp: LQG pieces land in the right slots") {
    const LQGEnv env = scalar_lqg();
    const QGMDP mdp = to_qgmdp(env);
    CHECK(mdp.gamma == env.gamma);
    CHECK(mdp.R(0, 0) == 0.1);
    CHECK(mdp.Sigma(0, 0) == 0.04);
    CHECK(mdp.state_cost(vec1(2.0)) == doctest::Approx(4.0));
    CHECK(mdp.step_cost(vec1(2.0), vec1(1.0)) == doctest::Approx(4.0 + 0.1));
    CHECK(mdp.dynamics(vec1(1.0), vec1(2.0))[0] == doctest::Approx(0.9 + 1.0));
    CHECK_NOTHROW(mdp.validate());
}

TEST_CASE("to_qgmdp: nonlinear benchmark dynamics and quartic extra cost") {
    NL1DEnv env;
    env.a = 1.5;
    env.b = 0.5;
    env.c = 0.1;
    env.p0 = InitialDistribution::atom(vec1(0.3));
    const QGMDP plain = to_qgmdp(env);
    CHECK(plain.dynamics(vec1(0.7), vec1(0.2))[0] ==
          doctest::Approx(1.5 * std::tanh(0.7) + 0.5 * 0.2));
    CHECK(plain.control_cost_lin(vec1(0.7))[0] == doctest::Approx(0.07));
    CHECK_FALSE(static_cast<bool>(plain.extra_cost));

    env.quartic = 0.5;
    const QGMDP quartic = to_qgmdp(env);
    REQUIRE(static_cast<bool>(quartic.extra_cost));
    CHECK(quartic.step_cost(vec1(0.0), vec1(2.0)) ==
          doctest::Approx(0.1 * 4.0 + 0.5 * 16.0));
}
