#pragma once

#include <functional>

#include <Eigen/Core>

#include "pgeq/mdp.hpp"
#include "pgeq/quadrature.hpp"

namespace pgeq {

/// Score of the Gaussian policy: dmu/dtheta * Sigma^-1 * (u - mu(x,theta)).
Eigen::VectorXd score(const GaussianPolicy& policy, const Eigen::MatrixXd& Sigma,
                      const Eigen::VectorXd& x, const Eigen::VectorXd& u);

/// Closed-form E_{d~N(0,Sigma)}[ q + (mu+d)'r + (mu+d)'R(mu+d) ]
///            = l(x,mu) + tr(R*Sigma).
double expected_quadratic_cost(double q, const Eigen::VectorXd& r,
                               const Eigen::MatrixXd& R, const Eigen::VectorXd& mu,
                               const Eigen::MatrixXd& Sigma);

/// || E[(y-mu) g(y)] - Sigma E[grad g(y)] || with both expectations evaluated
/// by the given rule (shifted to mean mu) and grad g by central differences.
double stein_residual(const std::function<double(const Eigen::VectorXd&)>& g,
                      const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                      const QuadratureRule& rule);

}  // namespace pgeq
