#include "pgeq/gauss.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace pgeq {

Eigen::VectorXd score(const GaussianPolicy& policy, const Eigen::MatrixXd& Sigma,
                      const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("score: Sigma is singular or not SPD");
    }
    const Eigen::VectorXd residual = u - policy.mu(x);
    return policy.dmu_dtheta(x) * llt.solve(residual);
}

double expected_quadratic_cost(double q, const Eigen::VectorXd& r,
                               const Eigen::MatrixXd& R, const Eigen::VectorXd& mu,
                               const Eigen::MatrixXd& Sigma) {
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument("expected_quadratic_cost: R must be symmetric");
    }
    return q + mu.dot(r) + mu.dot(R * mu) + (R * Sigma).trace();
}

double stein_residual(const std::function<double(const Eigen::VectorXd&)>& g,
                      const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                      const QuadratureRule& rule) {
    const int dim = static_cast<int>(mu.size());
    auto grad_g = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd grad(dim);
        Eigen::VectorXd yp = y, ym = y;
        for (int i = 0; i < dim; ++i) {
            const double h = 1e-5 * (1.0 + std::abs(y[i]));
            yp[i] = y[i] + h;
            ym[i] = y[i] - h;
            grad[i] = (g(yp) - g(ym)) / (2.0 * h);
            yp[i] = y[i];
            ym[i] = y[i];
        }
        return grad;
    };
    Eigen::VectorXd lhs = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double w = rule.weights[static_cast<Eigen::Index>(i)];
        const Eigen::VectorXd y = mu + rule.nodes[i];
        lhs += w * (y - mu) * g(y);
        rhs += w * grad_g(y);
    }
    return (lhs - Sigma * rhs).norm();
}

}  // namespace pgeq
