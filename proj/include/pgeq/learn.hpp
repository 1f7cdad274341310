#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pgeq/gradients.hpp"
#include "pgeq/mdp.hpp"

namespace pgeq {

/// Feature map for the linear critic, with analytic state derivatives.
struct CriticFeatures {
    int n_features = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> psi;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> dpsi_dx;  // n_f x n_x
    // Per-feature state Hessians; empty when unavailable (falls back to FD).
    std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)> d2psi_dx2;
};

/// Full polynomial features in x up to the given total degree.
CriticFeatures polynomial_features(int n_x, int degree);

/// Linear-in-features state-value approximation v(x) = omega' psi(x).
struct Critic {
    CriticFeatures features;
    Eigen::VectorXd omega;
    double mean_sq_residual = 0.0;
    int sample_count = 0;

    double value(const Eigen::VectorXd& x) const { return omega.dot(features.psi(x)); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
        return features.dpsi_dx(x).transpose() * omega;
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;
    ValueFunctionHandle handle() const;
};

/// Least-squares Bellman-residual fit over all observed transitions:
/// minimizes sum_t (v(x_t) - cost_mode(t) - gamma v(x_{t+1}))^2 with ridge 1e-8.
Critic fit_critic(const std::vector<Trajectory>& rollouts,
                  const CriticFeatures& features, double gamma, Mode mode);

enum class KKind { KS, KD, KS_baselined, KD_baselined };

std::string to_string(KKind kind);

/// Per-step inner estimators K(x_t, u_t) (dimension n_u each).
std::vector<Eigen::VectorXd> k_estimator(const Trajectory& traj, const Critic& critic,
                                         const QGMDP& mdp, const GaussianPolicy& policy,
                                         KKind kind);

/// gamma^t-weighted average over visited states of
/// dtheta l(x, mu) + dmu/dtheta * gamma * K(x, u).
EstimatorResult policy_gradient_from_k(const std::vector<Trajectory>& rollouts,
                                       const Critic& critic, const QGMDP& mdp,
                                       const GaussianPolicy& policy, KKind kind);

struct TrainConfig {
    int iterations = 50;
    double step_size = 0.05;
    KKind kind = KKind::KD_baselined;
    RolloutConfig rollout_cfg;
    int eval_rollouts = 256;
    CriticFeatures critic_features;
    bool use_natural_gradient = false;
};

struct TrainIteration {
    int iteration = 0;
    double performance = 0.0;  // fresh-rollout estimate of J (mode D)
    double grad_norm = 0.0;
    double variance_trace = 0.0;
    double step_size = 0.0;
    std::uint64_t seed = 0;
};

struct TrainLog {
    std::vector<TrainIteration> iterations;
    Eigen::VectorXd theta_final;
    bool aborted = false;
    std::string abort_reason;
};

TrainLog train(const QGMDP& mdp, const GaussianPolicy& policy_init,
               const TrainConfig& cfg);

}  // namespace pgeq
