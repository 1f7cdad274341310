#include "pgeq/gradients.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "pgeq/gauss.hpp"

namespace pgeq {
namespace {

Eigen::VectorXd column_mean(const Eigen::MatrixXd& contributions) {
    return contributions.rowwise().mean();
}

Eigen::VectorXd column_se(const Eigen::MatrixXd& contributions) {
    const Eigen::Index n = contributions.cols();
    const Eigen::VectorXd mean = column_mean(contributions);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(contributions.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
        var += (contributions.col(i) - mean).cwiseAbs2();
    }
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    return (var / static_cast<double>(n)).cwiseSqrt();
}

EstimatorResult finalize(Eigen::MatrixXd contributions) {
    EstimatorResult result;
    result.gradient = column_mean(contributions);
    result.standard_error = column_se(contributions);
    const Eigen::Index n = contributions.cols();
    double vtrace = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        vtrace += (contributions.col(i) - result.gradient).squaredNorm();
    }
    result.variance_trace = vtrace / static_cast<double>(n > 1 ? n - 1 : 1);
    result.contributions = std::move(contributions);
    return result;
}

}  // namespace

ValueFunctionHandle value_handle_from_grid(std::shared_ptr<const GridModel> grid,
                                           const ValueField& field) {
    ValueFunctionHandle handle;
    const Eigen::VectorXd values = field.values;
    handle.value = [grid, values](const Eigen::VectorXd& x) {
        return grid->interp_value(values, x);
    };
    handle.gradient = [grid, values](const Eigen::VectorXd& x) {
        return grid->interp_gradient(values, x);
    };
    return handle;
}

EstimatorResult grad_stochastic(const QGMDP& mdp, const GaussianPolicy& policy,
                                const std::vector<Trajectory>& rollouts) {
    if (rollouts.empty()) {
        throw std::invalid_argument("grad_stochastic: need at least one rollout");
    }
    const Eigen::Index n_theta = policy.theta.size();
    Eigen::MatrixXd contributions(n_theta, static_cast<Eigen::Index>(rollouts.size()));
    for (std::size_t ri = 0; ri < rollouts.size(); ++ri) {
        const Trajectory& traj = rollouts[ri];
        const int T = traj.horizon();
        // Return-to-go in mode S, computed backwards.
        Eigen::VectorXd rtg(T);
        double acc = 0.0;
        for (int t = T - 1; t >= 0; --t) {
            acc = traj.costs_S[t] + mdp.gamma * acc;
            rtg[t] = acc;
        }
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n_theta);
        for (int t = 0; t < T; ++t) {
            const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(t)];
            g += traj.discounts[t] * rtg[t] *
                 score(policy, mdp.Sigma_at(x), x,
                       traj.controls[static_cast<std::size_t>(t)]);
        }
        contributions.col(static_cast<Eigen::Index>(ri)) = g;
    }
    return finalize(std::move(contributions));
}

EstimatorResult grad_deterministic(const QGMDP& mdp, const GaussianPolicy& policy,
                                   const ValueFunctionHandle& value,
                                   const std::vector<Trajectory>& rollouts,
                                   InnerExpectation inner, int quad_order) {
    if (!value.value || !value.gradient) {
        throw std::invalid_argument("grad_deterministic: value function missing");
    }
    if (rollouts.empty()) {
        throw std::invalid_argument("grad_deterministic: need at least one rollout");
    }
    const Eigen::Index n_theta = policy.theta.size();
    QuadratureRule standard;
    if (inner == InnerExpectation::Quadrature) {
        standard = make_standard_quadrature(mdp.n_u, quad_order);
    }
    Eigen::MatrixXd contributions(n_theta, static_cast<Eigen::Index>(rollouts.size()));
    for (std::size_t ri = 0; ri < rollouts.size(); ++ri) {
        const Trajectory& traj = rollouts[ri];
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n_theta);
        for (int t = 0; t < traj.horizon(); ++t) {
            const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(t)];
            const Eigen::VectorXd mu = policy.mu(x);
            // r(x) + 2 R mu (plus the extra-term gradient when present).
            Eigen::VectorXd inner_term = mdp.step_cost_du(x, mu);
            Eigen::VectorXd expected = Eigen::VectorXd::Zero(mdp.n_u);
            if (inner == InnerExpectation::Quadrature) {
                const QuadratureRule rule =
                    transform_quadrature(standard, mdp.Sigma_at(x));
                for (std::size_t qi = 0; qi < rule.nodes.size(); ++qi) {
                    const Eigen::VectorXd u = mu + rule.nodes[qi];
                    const Eigen::VectorXd y = mdp.dynamics(x, u);
                    expected += rule.weights[static_cast<Eigen::Index>(qi)] *
                                (mdp.dynamics_jacobian_u(x, u).transpose() *
                                 value.gradient(y));
                }
            } else {
                // Single sample with the trajectory's own noise (CRN pairing).
                const Eigen::VectorXd u =
                    traj.controls[static_cast<std::size_t>(t)];
                expected = mdp.dynamics_jacobian_u(x, u).transpose() *
                           value.gradient(mdp.dynamics(x, u));
            }
            inner_term += mdp.gamma * expected;
            g += traj.discounts[t] * (policy.dmu_dtheta(x) * inner_term);
        }
        contributions.col(static_cast<Eigen::Index>(ri)) = g;
    }
    return finalize(std::move(contributions));
}

FisherResult fisher(const QGMDP& mdp, const GaussianPolicy& policy,
                    const std::vector<Trajectory>& rollouts, FisherKind kind) {
    if (rollouts.empty()) {
        throw std::invalid_argument("fisher: need at least one rollout");
    }
    const Eigen::Index n_theta = policy.theta.size();
    std::vector<Eigen::MatrixXd> per_rollout;
    per_rollout.reserve(rollouts.size());
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n_theta, n_theta);
    for (const Trajectory& traj : rollouts) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n_theta, n_theta);
        for (int t = 0; t < traj.horizon(); ++t) {
            const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(t)];
            const double w = traj.discounts[t];
            if (kind == FisherKind::S) {
                const Eigen::VectorXd s =
                    score(policy, mdp.Sigma_at(x), x,
                          traj.controls[static_cast<std::size_t>(t)]);
                acc += w * (s * s.transpose());
            } else {
                const Eigen::MatrixXd dmu = policy.dmu_dtheta(x);
                if (kind == FisherKind::D) {
                    acc += w * (dmu * dmu.transpose());
                } else {
                    const Eigen::MatrixXd Sigma = mdp.Sigma_at(x);
                    acc += w * (dmu * Sigma.llt().solve(dmu.transpose()));
                }
            }
        }
        // Exact symmetry, independent of summation order.
        acc = 0.5 * (acc + acc.transpose()).eval();
        mean += acc;
        per_rollout.push_back(std::move(acc));
    }
    mean /= static_cast<double>(per_rollout.size());
    FisherResult result;
    result.matrix = mean;
    result.entry_se = Eigen::MatrixXd::Zero(n_theta, n_theta);
    if (per_rollout.size() > 1) {
        for (const auto& m : per_rollout) {
            result.entry_se += (m - mean).cwiseAbs2();
        }
        result.entry_se /= static_cast<double>(per_rollout.size() - 1);
        result.entry_se =
            (result.entry_se / static_cast<double>(per_rollout.size())).cwiseSqrt();
    }
    return result;
}

Eigen::VectorXd natural_gradient(const Eigen::VectorXd& grad, const Eigen::MatrixXd& F,
                                 double ridge) {
    const Eigen::Index n = grad.size();
    if (ridge < 0.0) {
        ridge = 1e-8 * F.trace() / static_cast<double>(n);
    }
    const Eigen::MatrixXd system = F + ridge * Eigen::MatrixXd::Identity(n, n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("natural_gradient: solve failed");
    }
    const Eigen::VectorXd g = ldlt.solve(grad);
    if (!g.allFinite()) {
        throw std::runtime_error("natural_gradient: non-finite solution");
    }
    return g;
}

GradientReport paired_discrepancy(const QGMDP& mdp, const GaussianPolicy& policy,
                                  const ValueFunctionHandle& value,
                                  const RolloutConfig& cfg, InnerExpectation inner,
                                  int quad_order) {
    const std::vector<Trajectory> trajs = rollout(mdp, policy, cfg);
    const EstimatorResult s = grad_stochastic(mdp, policy, trajs);
    const EstimatorResult d =
        grad_deterministic(mdp, policy, value, trajs, inner, quad_order);
    const FisherResult fs = fisher(mdp, policy, trajs, FisherKind::S);
    const FisherResult fd = fisher(mdp, policy, trajs, FisherKind::D);
    const FisherResult fdm = fisher(mdp, policy, trajs, FisherKind::D_metric);

    GradientReport report;
    report.grad_S = s.gradient;
    report.grad_D = d.gradient;
    report.se_S = s.standard_error;
    report.se_D = d.standard_error;
    report.F_S = fs.matrix;
    report.F_D = fd.matrix;
    report.Ftilde_D = fdm.matrix;
    report.ridge = 1e-8 * fs.matrix.trace() / static_cast<double>(policy.theta.size());
    report.natural_S = natural_gradient(s.gradient, fs.matrix, report.ridge);
    report.natural_D = natural_gradient(d.gradient, fdm.matrix, report.ridge);
    report.master_seed = cfg.master_seed;
    report.n_rollouts = cfg.n_rollouts;
    report.variance_trace_S = s.variance_trace;
    report.variance_trace_D = d.variance_trace;

    const Eigen::MatrixXd diff = s.contributions - d.contributions;
    report.diff_mean = diff.rowwise().mean();
    report.diff_se = column_se(diff);
    report.discrepancy = report.diff_mean.cwiseAbs().maxCoeff();
    report.diff_ci99_contains_zero =
        (report.diff_mean.cwiseAbs().array() <= 2.5758 * report.diff_se.array())
            .all();
    return report;
}

}  // namespace pgeq
