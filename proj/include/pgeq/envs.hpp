#pragma once

#include <Eigen/Core>

#include "pgeq/mdp.hpp"

namespace pgeq {

/// Linear dynamics x' = Ax + Bu, quadratic cost x'Qx + u'r + u'Ru, Gaussian
/// control noise, linear policy mu = Theta x. Closed-form value and gradient
/// oracles below.
struct LQGEnv {
    Eigen::MatrixXd A;      // n_x x n_x
    Eigen::MatrixXd B;      // n_x x n_u
    Eigen::MatrixXd Qx;     // PSD state cost
    Eigen::VectorXd r;      // constant linear control cost
    Eigen::MatrixXd R;      // PD control-cost Hessian
    Eigen::MatrixXd Sigma;  // SPD noise covariance
    double gamma = 0.9;
    InitialDistribution p0;

    int n_x() const { return static_cast<int>(A.rows()); }
    int n_u() const { return static_cast<int>(B.cols()); }
};

QGMDP to_qgmdp(const LQGEnv& env);

/// Quadratic value v(x) = x'Px + b'x + k of the fixed linear policy Theta.
struct LQGValue {
    Eigen::MatrixXd P;
    Eigen::VectorXd b;
    double k = 0.0;

    double eval(const Eigen::VectorXd& x) const {
        return x.dot(P * x) + b.dot(x) + k;
    }
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const {
        return (P + P.transpose()) * x + b;
    }
};

/// Discounted Lyapunov solve for the closed loop A+B*Theta; mode S adds the
/// tr(R Sigma)/(1-gamma) offset to the constant. Rejects unstable closed loops
/// (spectral radius of sqrt(gamma)*(A+B*Theta) >= 1).
LQGValue lqg_value_oracle(const LQGEnv& env, const Eigen::MatrixXd& Theta, Mode mode);

double lqg_performance(const LQGEnv& env, const Eigen::MatrixXd& Theta, Mode mode);

/// dJ/dTheta via forward sensitivity of the Lyapunov solution.
Eigen::MatrixXd lqg_gradient_oracle(const LQGEnv& env, const Eigen::MatrixXd& Theta);

/// Riccati-optimal feedback gain for the discounted problem.
Eigen::MatrixXd lqg_optimal_gain(const LQGEnv& env);

/// 1-D nonlinear benchmark: x' = a*tanh(x) + b*u, q(x) = x^2, r(x) = c*x.
/// Bounded dynamics keep grid clamping negligible; Q_D - Q_S is genuinely
/// non-constant here.
struct NL1DEnv {
    double a = 1.5;
    double b = 0.5;
    double c = 0.0;      // linear control-cost coefficient: r(x) = c*x
    double R = 0.1;
    double Sigma = 0.04;
    double gamma = 0.9;
    double quartic = 0.0;  // optional kappa*u^4 extra cost (negative control)
    InitialDistribution p0;
};

QGMDP to_qgmdp(const NL1DEnv& env);

}  // namespace pgeq
