#include "pgeq/envs.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace pgeq {
namespace {

double spectral_radius(const Eigen::MatrixXd& M) {
    return Eigen::EigenSolver<Eigen::MatrixXd>(M, false)
        .eigenvalues()
        .cwiseAbs()
        .maxCoeff();
}

// Fixed-point solve of P = C + gamma * Abar' P Abar to 1e-12.
Eigen::MatrixXd discounted_lyapunov(const Eigen::MatrixXd& C,
                                    const Eigen::MatrixXd& Abar, double gamma) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(C.rows(), C.cols());
    for (int it = 0; it < 100000; ++it) {
        const Eigen::MatrixXd next = C + gamma * Abar.transpose() * P * Abar;
        const double delta = (next - P).cwiseAbs().maxCoeff();
        P = next;
        if (delta < 1e-12 * (1.0 + P.cwiseAbs().maxCoeff())) {
            return P;
        }
    }
    throw std::runtime_error("discounted_lyapunov: fixed-point iteration diverged");
}

Eigen::VectorXd discounted_linear_term(const Eigen::VectorXd& c,
                                       const Eigen::MatrixXd& Abar, double gamma) {
    // b = c + gamma * Abar' b
    Eigen::VectorXd b = Eigen::VectorXd::Zero(c.size());
    for (int it = 0; it < 100000; ++it) {
        const Eigen::VectorXd next = c + gamma * Abar.transpose() * b;
        const double delta = (next - b).cwiseAbs().maxCoeff();
        b = next;
        if (delta < 1e-13 * (1.0 + b.cwiseAbs().maxCoeff())) {
            return b;
        }
    }
    throw std::runtime_error("discounted_linear_term: iteration diverged");
}

double p0_expected_value(const InitialDistribution& p0, const LQGValue& value) {
    if (p0.kind == InitialDistribution::Kind::Atoms) {
        double j = 0.0;
        for (std::size_t i = 0; i < p0.points.size(); ++i) {
            j += p0.atom_weights[i] * value.eval(p0.points[i]);
        }
        return j;
    }
    // E[x'Px + b'x + k] for x ~ N(m, diag(var)).
    double j = value.eval(p0.mean) - 0.0;
    for (Eigen::Index i = 0; i < p0.variances.size(); ++i) {
        j += value.P(i, i) * p0.variances[i];
    }
    return j;
}

void check_stability(const LQGEnv& env, const Eigen::MatrixXd& Theta) {
    const Eigen::MatrixXd Abar = env.A + env.B * Theta;
    if (std::sqrt(env.gamma) * spectral_radius(Abar) >= 1.0) {
        throw std::invalid_argument(
            "lqg oracle: closed loop unstable at this Theta (value diverges)");
    }
}

}  // namespace

QGMDP to_qgmdp(const LQGEnv& env) {
    QGMDP mdp;
    mdp.n_x = env.n_x();
    mdp.n_u = env.n_u();
    const Eigen::MatrixXd A = env.A, B = env.B, Qx = env.Qx;
    const Eigen::VectorXd r = env.r;
    mdp.dynamics = [A, B](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return Eigen::VectorXd(A * x + B * u);
    };
    mdp.dynamics_du = [B](const Eigen::VectorXd&, const Eigen::VectorXd&) { return B; };
    mdp.state_cost = [Qx](const Eigen::VectorXd& x) { return x.dot(Qx * x); };
    mdp.control_cost_lin = [r](const Eigen::VectorXd&) { return r; };
    mdp.R = env.R;
    mdp.Sigma = env.Sigma;
    mdp.gamma = env.gamma;
    mdp.p0 = env.p0;
    mdp.validate();
    return mdp;
}

LQGValue lqg_value_oracle(const LQGEnv& env, const Eigen::MatrixXd& Theta, Mode mode) {
    check_stability(env, Theta);
    const Eigen::MatrixXd Abar = env.A + env.B * Theta;
    const Eigen::MatrixXd Qbar = env.Qx + Theta.transpose() * env.R * Theta;
    LQGValue value;
    value.P = discounted_lyapunov(Qbar, Abar, env.gamma);
    value.b = discounted_linear_term(Theta.transpose() * env.r, Abar, env.gamma);
    // Per-step constant from noise injected through B.
    const Eigen::MatrixXd BSB = env.B * env.Sigma * env.B.transpose();
    value.k = env.gamma * (value.P * BSB).trace() / (1.0 - env.gamma);
    if (mode == Mode::S) {
        value.k += (env.R * env.Sigma).trace() / (1.0 - env.gamma);
    }
    return value;
}

double lqg_performance(const LQGEnv& env, const Eigen::MatrixXd& Theta, Mode mode) {
    return p0_expected_value(env.p0, lqg_value_oracle(env, Theta, mode));
}

Eigen::MatrixXd lqg_gradient_oracle(const LQGEnv& env, const Eigen::MatrixXd& Theta) {
    check_stability(env, Theta);
    const int n_x = env.n_x();
    const int n_u = env.n_u();
    const Eigen::MatrixXd Abar = env.A + env.B * Theta;
    const Eigen::MatrixXd Qbar = env.Qx + Theta.transpose() * env.R * Theta;
    const Eigen::MatrixXd P = discounted_lyapunov(Qbar, Abar, env.gamma);
    const Eigen::MatrixXd BSB = env.B * env.Sigma * env.B.transpose();
    const double gamma = env.gamma;

    Eigen::MatrixXd grad(n_u, n_x);
    for (int j = 0; j < n_u; ++j) {
        for (int i = 0; i < n_x; ++i) {
            Eigen::MatrixXd dAbar = Eigen::MatrixXd::Zero(n_x, n_x);
            dAbar.col(i) = env.B.col(j);
            Eigen::MatrixXd dQbar = Eigen::MatrixXd::Zero(n_x, n_x);
            const Eigen::VectorXd RTheta_i = (env.R * Theta).row(j).transpose();
            dQbar.row(i) += RTheta_i.transpose();
            dQbar.col(i) += RTheta_i;
            // Sensitivity Lyapunov equation:
            // dP = dQbar + gamma(dAbar' P Abar + Abar' P dAbar) + gamma Abar' dP Abar
            const Eigen::MatrixXd rhs =
                dQbar + gamma * (dAbar.transpose() * P * Abar +
                                 Abar.transpose() * P * dAbar);
            const Eigen::MatrixXd dP = discounted_lyapunov(rhs, Abar, gamma);
            Eigen::VectorXd dc = Eigen::VectorXd::Zero(n_x);
            dc[i] = env.r[j];
            const Eigen::VectorXd b =
                discounted_linear_term(Theta.transpose() * env.r, Abar, gamma);
            const Eigen::VectorXd db = discounted_linear_term(
                dc + gamma * dAbar.transpose() * b, Abar, gamma);
            const double dk = gamma * (dP * BSB).trace() / (1.0 - gamma);
            LQGValue dvalue;
            dvalue.P = dP;
            dvalue.b = db;
            dvalue.k = dk;
            grad(j, i) = p0_expected_value(env.p0, dvalue);
        }
    }
    return grad;
}

Eigen::MatrixXd lqg_optimal_gain(const LQGEnv& env) {
    const int n_x = env.n_x();
    Eigen::MatrixXd P = env.Qx;
    Eigen::MatrixXd Theta = Eigen::MatrixXd::Zero(env.n_u(), n_x);
    for (int it = 0; it < 100000; ++it) {
        const Eigen::MatrixXd G = env.R + env.gamma * env.B.transpose() * P * env.B;
        const Eigen::MatrixXd next_Theta =
            -env.gamma * G.ldlt().solve(env.B.transpose() * P * env.A);
        const Eigen::MatrixXd Abar = env.A + env.B * next_Theta;
        const Eigen::MatrixXd next_P = env.Qx + next_Theta.transpose() * env.R * next_Theta +
                                       env.gamma * Abar.transpose() * P * Abar;
        const double delta = (next_P - P).cwiseAbs().maxCoeff() +
                             (next_Theta - Theta).cwiseAbs().maxCoeff();
        P = next_P;
        Theta = next_Theta;
        if (delta < 1e-13 * (1.0 + P.cwiseAbs().maxCoeff())) {
            return Theta;
        }
    }
    throw std::runtime_error("lqg_optimal_gain: Riccati iteration did not converge");
}

QGMDP to_qgmdp(const NL1DEnv& env) {
    QGMDP mdp;
    mdp.n_x = 1;
    mdp.n_u = 1;
    const double a = env.a, b = env.b, c = env.c;
    mdp.dynamics = [a, b](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        Eigen::VectorXd next(1);
        next[0] = a * std::tanh(x[0]) + b * u[0];
        return next;
    };
    mdp.dynamics_du = [b](const Eigen::VectorXd&, const Eigen::VectorXd&) {
        Eigen::MatrixXd jac(1, 1);
        jac(0, 0) = b;
        return jac;
    };
    mdp.state_cost = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
    mdp.control_cost_lin = [c](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(1);
        r[0] = c * x[0];
        return r;
    };
    mdp.R = Eigen::MatrixXd::Constant(1, 1, env.R);
    mdp.Sigma = Eigen::MatrixXd::Constant(1, 1, env.Sigma);
    if (env.quartic != 0.0) {
        const double kappa = env.quartic;
        mdp.extra_cost = [kappa](const Eigen::VectorXd&, const Eigen::VectorXd& u) {
            const double u2 = u[0] * u[0];
            return kappa * u2 * u2;
        };
        mdp.extra_cost_du = [kappa](const Eigen::VectorXd&, const Eigen::VectorXd& u) {
            Eigen::VectorXd g(1);
            g[0] = 4.0 * kappa * u[0] * u[0] * u[0];
            return g;
        };
    }
    mdp.gamma = env.gamma;
    mdp.p0 = env.p0;
    mdp.validate();
    return mdp;
}

}  // namespace pgeq
