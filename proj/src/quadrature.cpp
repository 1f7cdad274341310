#include "pgeq/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace pgeq {

double QuadratureRule::expect(
    const std::function<double(const Eigen::VectorXd&)>& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        acc += weights[static_cast<Eigen::Index>(i)] * g(nodes[i]);
    }
    return acc;
}

Eigen::VectorXd QuadratureRule::expect_vec(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g) const {
    Eigen::VectorXd acc = weights[0] * g(nodes[0]);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        acc += weights[static_cast<Eigen::Index>(i)] * g(nodes[i]);
    }
    return acc;
}

void gauss_hermite_1d(int order, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
    if (order < 1) {
        throw std::invalid_argument("gauss_hermite_1d: order must be >= 1");
    }
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
    // polynomials: zero diagonal, off-diagonal sqrt(k).
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double off = std::sqrt(static_cast<double>(k));
        jacobi(k, k - 1) = off;
        jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("gauss_hermite_1d: eigen decomposition failed");
    }
    nodes = solver.eigenvalues();
    weights.resize(order);
    for (int i = 0; i < order; ++i) {
        const double v0 = solver.eigenvectors()(0, i);
        weights[i] = v0 * v0;
    }
    // Enforce exact +/- symmetry so odd moments vanish to machine precision.
    for (int i = 0; i < order / 2; ++i) {
        const int j = order - 1 - i;
        const double mag = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -mag;
        nodes[j] = mag;
        const double w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if (order % 2 == 1) {
        nodes[order / 2] = 0.0;
    }
    weights /= weights.sum();
}

QuadratureRule make_standard_quadrature(int dim, int order) {
    if (dim < 1 || dim > 3) {
        throw std::invalid_argument(
            "make_quadrature: dim must be in [1,3]; higher dimensions must use "
            "Monte-Carlo paths");
    }
    Eigen::VectorXd n1, w1;
    gauss_hermite_1d(order, n1, w1);
    QuadratureRule rule;
    rule.dim = dim;
    rule.order = order;
    const int total = static_cast<int>(std::pow(order, dim));
    rule.nodes.reserve(static_cast<std::size_t>(total));
    rule.weights.resize(total);
    for (int idx = 0; idx < total; ++idx) {
        Eigen::VectorXd node(dim);
        double w = 1.0;
        int rem = idx;
        for (int d = 0; d < dim; ++d) {
            const int i = rem % order;
            rem /= order;
            node[d] = n1[i];
            w *= w1[i];
        }
        rule.nodes.push_back(node);
        rule.weights[idx] = w;
    }
    rule.weights /= rule.weights.sum();
    return rule;
}

QuadratureRule transform_quadrature(const QuadratureRule& standard,
                                    const Eigen::MatrixXd& Sigma) {
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("make_quadrature: Sigma is not SPD");
    }
    const Eigen::MatrixXd L = llt.matrixL();
    QuadratureRule rule = standard;
    for (auto& node : rule.nodes) {
        node = L * node;
    }
    return rule;
}

QuadratureRule make_quadrature(int dim, int order, const Eigen::MatrixXd& Sigma) {
    if (order < 2) {
        throw std::invalid_argument("make_quadrature: order must be >= 2");
    }
    if (Sigma.rows() != dim || Sigma.cols() != dim) {
        throw std::invalid_argument("make_quadrature: Sigma dimension mismatch");
    }
    return transform_quadrature(make_standard_quadrature(dim, order), Sigma);
}

QuadratureRule shift_quadrature(const QuadratureRule& rule, const Eigen::VectorXd& mu) {
    QuadratureRule shifted = rule;
    for (auto& node : shifted.nodes) {
        node += mu;
    }
    return shifted;
}

}  // namespace pgeq
