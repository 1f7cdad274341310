#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "pgeq/grid.hpp"
#include "pgeq/mdp.hpp"

namespace pgeq {

/// Value function handle used by the deterministic estimator: anything that
/// can be evaluated and differentiated in the state.
struct ValueFunctionHandle {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

ValueFunctionHandle value_handle_from_grid(std::shared_ptr<const GridModel> grid,
                                           const ValueField& field);

enum class FisherKind { S, D, D_metric };

enum class InnerExpectation { Quadrature, PairedSample };

struct EstimatorResult {
    Eigen::VectorXd gradient;
    Eigen::VectorXd standard_error;
    // One gradient contribution per rollout (column i = rollout i).
    Eigen::MatrixXd contributions;
    double variance_trace = 0.0;
};

/// Score-function estimator: gamma^t * score(x_t,u_t) * return-to-go, averaged
/// over rollouts.
EstimatorResult grad_stochastic(const QGMDP& mdp, const GaussianPolicy& policy,
                                const std::vector<Trajectory>& rollouts);

/// Pathwise estimator: gamma^t * dmu/dtheta * (r + 2R mu + gamma E_d[grad_u
/// v(f(x, mu + d))]); the inner expectation runs either by quadrature or on
/// the trajectory's own noise draw (common-random-number pairing).
EstimatorResult grad_deterministic(const QGMDP& mdp, const GaussianPolicy& policy,
                                   const ValueFunctionHandle& value,
                                   const std::vector<Trajectory>& rollouts,
                                   InnerExpectation inner = InnerExpectation::Quadrature,
                                   int quad_order = 10);

struct FisherResult {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd entry_se;  // standard error of each entry
};

FisherResult fisher(const QGMDP& mdp, const GaussianPolicy& policy,
                    const std::vector<Trajectory>& rollouts, FisherKind kind);

/// Solves (F + ridge I) g = grad. Default ridge: 1e-8 * tr(F)/n.
Eigen::VectorXd natural_gradient(const Eigen::VectorXd& grad, const Eigen::MatrixXd& F,
                                 double ridge = -1.0);

struct GradientReport {
    Eigen::VectorXd grad_S;
    Eigen::VectorXd grad_D;
    Eigen::VectorXd se_S;
    Eigen::VectorXd se_D;
    Eigen::MatrixXd F_S;
    Eigen::MatrixXd F_D;
    Eigen::MatrixXd Ftilde_D;
    Eigen::VectorXd natural_S;   // F_S^-1 grad_S
    Eigen::VectorXd natural_D;   // Ftilde_D^-1 grad_D
    double ridge = 0.0;
    std::uint64_t master_seed = 0;
    int n_rollouts = 0;
    double discrepancy = 0.0;          // ||mean(contrib_S - contrib_D)||_inf
    Eigen::VectorXd diff_mean;         // per-component paired difference mean
    Eigen::VectorXd diff_se;
    bool diff_ci99_contains_zero = false;
    double variance_trace_S = 0.0;
    double variance_trace_D = 0.0;
};

/// Runs both estimators on the SAME rollouts (common random numbers) and
/// summarizes the paired per-rollout discrepancy.
GradientReport paired_discrepancy(const QGMDP& mdp, const GaussianPolicy& policy,
                                  const ValueFunctionHandle& value,
                                  const RolloutConfig& cfg,
                                  InnerExpectation inner = InnerExpectation::Quadrature,
                                  int quad_order = 10);

}  // namespace pgeq
