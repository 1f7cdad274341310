#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "pgeq/envs.hpp"
#include "pgeq/gradients.hpp"
#include "pgeq/grid.hpp"

using namespace pgeq;

namespace {

Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
}

LQGEnv scalar_lqg() {
    LQGEnv env;
    env.A = Eigen::MatrixXd::Constant(1, 1, 0.9);
    env.B = Eigen::MatrixXd::Constant(1, 1, 0.5);
    env.Qx = Eigen::MatrixXd::Constant(1, 1, 1.0);
    env.r = Eigen::VectorXd::Zero(1);
    env.R = Eigen::MatrixXd::Constant(1, 1, 0.1);
    env.Sigma = Eigen::MatrixXd::Constant(1, 1, 0.04);
    env.gamma = 0.9;
    env.p0 = InitialDistribution::atom(vec1(0.5));
    return env;
}

NL1DEnv nl1d_env() {
    NL1DEnv env;
    env.a = 1.5;
    env.b = 0.5;
    env.c = 0.1;
    env.R = 0.1;
    env.Sigma = 0.04;
    env.gamma = 0.9;
    env.p0 = InitialDistribution::atom(vec1(0.3));
    return env;
}

GridSpec grid_1d(double half, int nodes, int order) {
    GridSpec g;
    g.lo = vec1(-half);
    g.hi = vec1(half);
    g.nodes_per_axis = {nodes};
    g.quad_order = order;
    return g;
}

GaussianPolicy scalar_policy(double theta) {
    return linear_state_policy(1, 1, Eigen::MatrixXd::Constant(1, 1, theta));
}

RolloutConfig rollout_cfg(int horizon, int n, std::uint64_t seed) {
    RolloutConfig cfg;
    cfg.horizon = horizon;
    cfg.n_rollouts = n;
    cfg.master_seed = seed;
    cfg.n_jobs = 4;
    return cfg;
}

// Closed-form value handle from the LQG oracle (independent of the grid).
ValueFunctionHandle oracle_handle(const LQGEnv& env, double theta, Mode mode) {
    const LQGValue v =
        lqg_value_oracle(env, Eigen::MatrixXd::Constant(1, 1, theta), mode);
    ValueFunctionHandle h;
    h.value = [v](const Eigen::VectorXd& x) { return v.eval(x); };
    h.gradient = [v](const Eigen::VectorXd& x) { return v.grad(x); };
    return h;
}

ValueFunctionHandle grid_handle(const QGMDP& mdp, const GaussianPolicy& policy,
                                const GridSpec& spec, Mode mode) {
    auto grid = std::make_shared<const GridModel>(mdp, policy, spec);
    const ValueField field = solve_value(*grid, policy, mode);
    return value_handle_from_grid(grid, field);
}

}  // namespace

TEST_CASE("grad_stochastic: costless problem estimates exactly zero") {
    QGMDP mdp = to_qgmdp(scalar_lqg());
    mdp.state_cost = [](const Eigen::VectorXd&) { return 0.0; };
    mdp.control_cost_lin = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
    mdp.R = Eigen::MatrixXd::Zero(1, 1);
    const GaussianPolicy policy = scalar_policy(-0.5);
    const auto trajs = rollout(mdp, policy, rollout_cfg(40, 64, 17));
    const EstimatorResult res = grad_stochastic(mdp, policy, trajs);
    CHECK(res.gradient.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.variance_trace == 0.0);
}

TEST_CASE("grad_stochastic: within three standard errors of the LQG oracle") {
    const LQGEnv env = scalar_lqg();
    const QGMDP mdp = to_qgmdp(env);
    const GaussianPolicy policy = scalar_policy(-0.5);
    const auto trajs = rollout(mdp, policy, rollout_cfg(150, 20000, 101));
    const EstimatorResult res = grad_stochastic(mdp, policy, trajs);
    const double truth =
        lqg_gradient_oracle(env, Eigen::MatrixXd::Constant(1, 1, -0.5))(0, 0);
    CHECK(std::abs(res.gradient[0] - truth) < 3.0 * res.standard_error[0]);
}

TEST_CASE("grad_deterministic: within three standard errors of the LQG oracle") {
    const LQGEnv env = scalar_lqg();
    const QGMDP mdp = to_qgmdp(env);
    const GaussianPolicy policy = scalar_policy(-0.5);
    const ValueFunctionHandle handle = oracle_handle(env, -0.5, Mode::D);
    const auto trajs = rollout(mdp, policy, rollout_cfg(150, 4000, 103));
    const EstimatorResult res = grad_deterministic(mdp, policy, handle, trajs);
    const double truth =
        lqg_gradient_oracle(env, Eigen::MatrixXd::Constant(1, 1, -0.5))(0, 0);
    CHECK(std::abs(res.gradient[0] - truth) < 3.0 * res.standard_error[0] + 1e-6);
}

TEST_CASE("standard errors shrink like 1/sqrt(n)") {
    const QGMDP mdp = to_qgmdp(scalar_lqg());
    const GaussianPolicy policy = scalar_policy(-0.5);
    const auto small = rollout(mdp, policy, rollout_cfg(80, 2000, 7));
    const auto large = rollout(mdp, policy, rollout_cfg(80, 4000, 7));
    const double se_small = grad_stochastic(mdp, policy, small).standard_error[0];
    const double se_large = grad_stochastic(mdp, policy, large).standard_error[0];
    const double ratio = se_small / se_large;
    // Expect about sqrt(2) ~ 1.41 with sampling slack.
    CHECK(ratio > 1.25);
    CHECK(ratio < 1.6);
}

TEST_CASE("grad_deterministic: tiny at the Riccati-optimal gain") {
    const LQGEnv env = scalar_lqg();
    const QGMDP mdp = to_qgmdp(env);
    const double theta_star = lqg_optimal_gain(env)(0, 0);
    const GaussianPolicy policy = scalar_policy(theta_star);
    const ValueFunctionHandle handle = oracle_handle(env, theta_star, Mode::D);
    const auto trajs = rollout(mdp, policy, rollout_cfg(150, 2000, 29));
    const EstimatorResult res = grad_deterministic(mdp, policy, handle, trajs);
    // With the exact value function the pathwise integrand vanishes pointwise
    // at the stationary policy up to the horizon tail.
    CHECK(std::abs(res.gradient[0]) < 3.0 * res.standard_error[0] + 1e-4);
    CHECK(std::abs(res.gradient[0]) < 1e-3);
}

TEST_CASE("estimators vanish exactly when the policy mean ignores theta") {
    const QGMDP mdp = to_qgmdp(scalar_lqg());
    GaussianPolicy frozen;
    frozen.theta = vec1(-0.5);
    frozen.mean = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
        return (-0.5 * x).eval();
    };
    frozen.mean_jacobian = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Zero(1, 1);
    };
    const auto trajs = rollout(mdp, frozen, rollout_cfg(60, 32, 5));
    const ValueFunctionHandle handle = oracle_handle(scalar_lqg(), -0.5, Mode::D);
    CHECK(grad_deterministic(mdp, frozen, handle, trajs).gradient[0] == 0.0);
    // The score of a theta-independent density is identically zero.
    CHECK(grad_stochastic(mdp, frozen, trajs).gradient[0] == 0.0);
}

TEST_CASE("paired_discrepancy: identical estimators pair to zero") {
    const LQGEnv env = scalar_lqg();
    const QGMDP mdp = to_qgmdp(env);
    const GaussianPolicy policy = scalar_policy(-0.5);
    const ValueFunctionHandle handle = oracle_handle(env, -0.5, Mode::D);
    const auto trajs = rollout(mdp, policy, rollout_cfg(100, 256, 41));
    const EstimatorResult res = grad_deterministic(mdp, policy, handle, trajs);
    // Pairing an estimator with itself leaves no discrepancy.
    Eigen::VectorXd mean_diff =
        (res.contributions - res.contributions).rowwise().mean();
    CHECK(mean_diff.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("paired_discrepancy: 99% CI of the S-D difference contains zero") {
    const QGMDP mdp = to_qgmdp(nl1d_env());
    const GaussianPolicy policy = scalar_policy(-0.5);
    const ValueFunctionHandle handle =
        grid_handle(mdp, policy, grid_1d(3.0, 401, 10), Mode::D);
    const GradientReport rep =
        paired_discrepancy(mdp, policy, handle, rollout_cfg(120, 4000, 77));
    REQUIRE(rep.diff_mean.size() == 1);
    CHECK(rep.diff_ci99_contains_zero);
    CHECK(std::abs(rep.diff_mean[0]) < 2.6 * rep.diff_se[0] + 1e-3);
    // Both estimators are also individually consistent with each other.
    CHECK(std::abs(rep.grad_S[0] - rep.grad_D[0]) <
          3.0 * std::sqrt(rep.se_S[0] * rep.se_S[0] + rep.se_D[0] * rep.se_D[0]) + 1e-3);
    // Variance comparison is recorded for reporting.
    CHECK(rep.variance_trace_S > 0.0);
    CHECK(rep.variance_trace_D > 0.0);
}

TEST_CASE("fisher: single absorbing state matches the closed form") {
    // Dynamics pinned to one state: F_S = J Sigma^-1 J' / (1-gamma)^2 summed
    // over the geometric weights gamma^t, evaluated in closed form.
    QGMDP mdp = to_qgmdp(scalar_lqg());
    mdp.dynamics = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        return vec1(1.0);
    };
    mdp.p0 = InitialDistribution::atom(vec1(1.0));
    const GaussianPolicy policy = scalar_policy(-0.5);
    const auto trajs = rollout(mdp, policy, rollout_cfg(400, 200, 13));

    // mu = theta * x with x = 1, so dmu/dtheta = 1 and the per-step factor is
    // 1/Sigma. With gamma^t step weights the summed Fisher is
    // sum_t gamma^t / Sigma = 1/((1-gamma) Sigma) up to the horizon tail.
    const double gamma = mdp.gamma;
    const double expected = 1.0 / ((1.0 - gamma) * mdp.Sigma(0, 0));
    const FisherResult fs = fisher(mdp, policy, trajs, FisherKind::S);
    const FisherResult fd = fisher(mdp, policy, trajs, FisherKind::D_metric);
    CHECK(fs.matrix(0, 0) ==
          doctest::Approx(expected).epsilon(0.15));  // MC estimate of the score form
    CHECK(fd.matrix(0, 0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("fisher: score form is symmetric PSD and matches the metric form") {
    LQGEnv env;
    env.A = Eigen::MatrixXd::Identity(2, 2) * 0.8;
    env.A(0, 1) = 0.1;
    env.B = Eigen::MatrixXd::Identity(2, 2) * 0.5;
    env.Qx = Eigen::MatrixXd::Identity(2, 2);
    env.r = Eigen::VectorXd::Zero(2);
    env.R = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    env.Sigma = 0.04 * Eigen::MatrixXd::Identity(2, 2);
    env.gamma = 0.9;
    env.p0 = InitialDistribution::diagonal_gaussian(Eigen::VectorXd::Zero(2),
                                                    0.25 * Eigen::VectorXd::Ones(2));
    const QGMDP mdp = to_qgmdp(env);
    const GaussianPolicy policy =
        linear_state_policy(2, 2, -0.3 * Eigen::MatrixXd::Identity(2, 2));
    const auto trajs = rollout(mdp, policy, rollout_cfg(100, 4000, 19));

    const FisherResult fs = fisher(mdp, policy, trajs, FisherKind::S);
    const FisherResult ftilde = fisher(mdp, policy, trajs, FisherKind::D_metric);
    const FisherResult fd = fisher(mdp, policy, trajs, FisherKind::D);

    CHECK((fs.matrix - fs.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fs.matrix);
    CHECK(eig.eigenvalues().minCoeff() > -1e-10);

    // The score outer product and the pullback metric estimate the same
    // matrix; allow three combined standard errors entrywise.
    double worst_sigma = 0.0;
    for (int i = 0; i < fs.matrix.rows(); ++i) {
        for (int j = 0; j < fs.matrix.cols(); ++j) {
            const double se = std::sqrt(fs.entry_se(i, j) * fs.entry_se(i, j) +
                                        ftilde.entry_se(i, j) * ftilde.entry_se(i, j));
            worst_sigma = std::max(
                worst_sigma, std::abs(fs.matrix(i, j) - ftilde.matrix(i, j)) /
                                 (se + 1e-12));
        }
    }
    CHECK(worst_sigma < 3.0);

    // With Sigma = 0.04 I != I, the unweighted pullback is exactly 0.04 times
    // the Sigma-weighted one, so the two metrics genuinely differ.
    CHECK((fd.matrix - 0.04 * ftilde.matrix).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((fd.matrix - ftilde.matrix).cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("natural_gradient: identity and scaled metrics") {
    Eigen::VectorXd g(2);
    g << 1.0, -2.0;
    const Eigen::VectorXd n1 = natural_gradient(g, Eigen::MatrixXd::Identity(2, 2));
    CHECK((n1 - g).cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::VectorXd n4 =
        natural_gradient(g, 4.0 * Eigen::MatrixXd::Identity(2, 2));
    CHECK((n4 - 0.25 * g).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("grad_stochastic: contributions scale linearly with the cost") {
    QGMDP mdp = to_qgmdp(scalar_lqg());
    const GaussianPolicy policy = scalar_policy(-0.5);
    const auto trajs = rollout(mdp, policy, rollout_cfg(60, 64, 23));

    QGMDP scaled = mdp;
    scaled.state_cost = [](const Eigen::VectorXd& x) { return 2.0 * x[0] * x[0]; };
    scaled.R = 2.0 * mdp.R;
    const auto trajs2 = rollout(scaled, policy, rollout_cfg(60, 64, 23));

    const EstimatorResult base = grad_stochastic(mdp, policy, trajs);
    const EstimatorResult twice = grad_stochastic(scaled, policy, trajs2);
    CHECK(std::abs(twice.gradient[0] - 2.0 * base.gradient[0]) < 1e-10);
}
