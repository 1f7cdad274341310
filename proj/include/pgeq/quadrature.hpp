#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace pgeq {

/// Tensor-product Gauss-Hermite rule, normalized for expectations against a
/// Gaussian: sum of weights is 1 and nodes are already transformed by the
/// Cholesky factor of the covariance, so they sample d ~ N(0, Sigma).
struct QuadratureRule {
    int dim = 0;
    int order = 0;
    std::vector<Eigen::VectorXd> nodes;
    Eigen::VectorXd weights;

    double expect(const std::function<double(const Eigen::VectorXd&)>& g) const;
    Eigen::VectorXd expect_vec(
        const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g) const;
};

// 1-D probabilists' Hermite rule (weight = standard normal density).
// nodes symmetric about 0, weights sum to 1.
void gauss_hermite_1d(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// Standard tensor rule for z ~ N(0, I_dim).
QuadratureRule make_standard_quadrature(int dim, int order);

// Rule for d ~ N(0, Sigma). dim must be 1..3 (exact paths only).
QuadratureRule make_quadrature(int dim, int order, const Eigen::MatrixXd& Sigma);

// Re-transform a standard rule by the Cholesky factor of Sigma.
QuadratureRule transform_quadrature(const QuadratureRule& standard,
                                    const Eigen::MatrixXd& Sigma);

// Same nodes shifted by a mean, for expectations over u ~ N(mu, Sigma).
QuadratureRule shift_quadrature(const QuadratureRule& rule, const Eigen::VectorXd& mu);

}  // namespace pgeq
