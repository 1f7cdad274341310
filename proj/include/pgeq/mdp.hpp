#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pgeq {

using DynamicsFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                                 const Eigen::VectorXd&)>;
using ControlJacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&,
                                                        const Eigen::VectorXd&)>;
using StateCostFn = std::function<double(const Eigen::VectorXd&)>;
using StateVecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using StateMatFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using ExtraCostFn = std::function<double(const Eigen::VectorXd&,
                                         const Eigen::VectorXd&)>;
using ExtraCostGradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                                      const Eigen::VectorXd&)>;

/// Initial-state distribution: finite support or diagonal Gaussian.
struct InitialDistribution {
    enum class Kind { Atoms, DiagonalGaussian };
    Kind kind = Kind::Atoms;
    // Atoms
    std::vector<Eigen::VectorXd> points;
    std::vector<double> atom_weights;
    // DiagonalGaussian
    Eigen::VectorXd mean;
    Eigen::VectorXd variances;

    static InitialDistribution atom(const Eigen::VectorXd& x);
    static InitialDistribution atoms(std::vector<Eigen::VectorXd> pts,
                                     std::vector<double> w);
    static InitialDistribution diagonal_gaussian(const Eigen::VectorXd& mean,
                                                 const Eigen::VectorXd& variances);

    // Deterministic sample keyed by (seed, rollout).
    Eigen::VectorXd sample(std::uint64_t seed, std::uint64_t rollout) const;
};

/// Quadratic-Gaussian MDP: general dynamics f and state cost q, control cost
/// q(x) + u'r(x) + u'Ru (plus an optional non-quadratic extra term used as a
/// negative control), control noise N(0, Sigma), discount gamma.
struct QGMDP {
    int n_x = 0;
    int n_u = 0;
    DynamicsFn dynamics;              // f(x,u)
    ControlJacobianFn dynamics_du;    // optional analytic df/du (n_x x n_u)
    StateCostFn state_cost;           // q(x)
    StateVecFn control_cost_lin;      // r(x)
    Eigen::MatrixXd R;                // fixed control-cost Hessian
    StateMatFn R_fn;                  // state-dependent override (optional)
    Eigen::MatrixXd Sigma;            // fixed noise covariance
    StateMatFn Sigma_fn;              // state-dependent override (optional)
    ExtraCostFn extra_cost;           // optional non-quadratic control cost
    ExtraCostGradFn extra_cost_du;    // optional analytic gradient of the extra term
    double gamma = 0.9;
    InitialDistribution p0;

    Eigen::MatrixXd R_at(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd Sigma_at(const Eigen::VectorXd& x) const;
    bool state_dependent() const { return static_cast<bool>(Sigma_fn) || static_cast<bool>(R_fn); }

    double step_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
    // d(step_cost)/du; uses analytic extra_cost_du or central differences.
    Eigen::VectorXd step_cost_du(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
    // df/du; analytic when given, otherwise central differences with
    // step 1e-5*(1+|u|).
    Eigen::MatrixXd dynamics_jacobian_u(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& u) const;

    /// Checks all constructor invariants; probe_states is required when R or
    /// Sigma are state-dependent (the alpha-proportionality gate).
    void validate(const std::vector<Eigen::VectorXd>& probe_states = {}) const;
};

/// Gaussian policy: u = mu(x, theta) + d with d ~ N(0, Sigma).
struct GaussianPolicy {
    Eigen::VectorXd theta;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> mean;
    // d mu / d theta, shape (n_theta x n_u).
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
        mean_jacobian;

    Eigen::VectorXd mu(const Eigen::VectorXd& x) const { return mean(x, theta); }
    Eigen::MatrixXd dmu_dtheta(const Eigen::VectorXd& x) const {
        return mean_jacobian(x, theta);
    }
    GaussianPolicy with_theta(const Eigen::VectorXd& new_theta) const;

    // Checks mean_jacobian against central finite differences on probe states.
    void validate(const std::vector<Eigen::VectorXd>& probe_states) const;
};

/// Built-in linear family mu(x, theta) = Theta * phi(x) with Theta (n_u x n_f)
/// stored row-major in theta.
GaussianPolicy linear_policy(StateVecFn features, int n_features, int n_u,
                             const Eigen::VectorXd& theta0);

/// Linear-in-state policy mu = Theta * x.
GaussianPolicy linear_state_policy(int n_x, int n_u, const Eigen::MatrixXd& Theta0);

enum class Mode { S, D };

std::string to_string(Mode mode);

/// One controlled trajectory carrying both cost streams.
struct Trajectory {
    std::vector<Eigen::VectorXd> states;    // length T+1
    std::vector<Eigen::VectorXd> noises;    // d_t, length T
    std::vector<Eigen::VectorXd> controls;  // u_t = mu(x_t) + d_t, length T
    Eigen::VectorXd costs_S;                // l(x_t, u_t)
    Eigen::VectorXd costs_D;                // l(x_t, mu(x_t))
    Eigen::VectorXd discounts;              // gamma^t

    int horizon() const { return static_cast<int>(controls.size()); }
    const Eigen::VectorXd& costs(Mode mode) const {
        return mode == Mode::S ? costs_S : costs_D;
    }
};

struct RolloutConfig {
    int horizon = 100;
    int n_rollouts = 1;
    std::uint64_t master_seed = 0;
    int n_jobs = 1;
};

std::vector<Trajectory> rollout(const QGMDP& mdp, const GaussianPolicy& policy,
                                const RolloutConfig& cfg);

struct DiscountedReturn {
    double value = 0.0;
    double tail_bound = 0.0;  // gamma^T * max|cost| / (1-gamma)
};

DiscountedReturn discounted_return(const Trajectory& traj, double gamma, Mode mode);

}  // namespace pgeq
