#include "pgeq/mdp.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "pgeq/rng.hpp"

namespace pgeq {

InitialDistribution InitialDistribution::atom(const Eigen::VectorXd& x) {
    InitialDistribution p0;
    p0.kind = Kind::Atoms;
    p0.points = {x};
    p0.atom_weights = {1.0};
    return p0;
}

InitialDistribution InitialDistribution::atoms(std::vector<Eigen::VectorXd> pts,
                                               std::vector<double> w) {
    InitialDistribution p0;
    p0.kind = Kind::Atoms;
    p0.points = std::move(pts);
    p0.atom_weights = std::move(w);
    double total = 0.0;
    for (double weight : p0.atom_weights) {
        if (weight < 0.0) {
            throw std::invalid_argument("p0 weights must be nonnegative");
        }
        total += weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("p0 weights must sum to 1");
    }
    return p0;
}

InitialDistribution InitialDistribution::diagonal_gaussian(
    const Eigen::VectorXd& mean, const Eigen::VectorXd& variances) {
    InitialDistribution p0;
    p0.kind = Kind::DiagonalGaussian;
    p0.mean = mean;
    p0.variances = variances;
    return p0;
}

Eigen::VectorXd InitialDistribution::sample(std::uint64_t seed,
                                            std::uint64_t rollout) const {
    // Initial-state draws use a dedicated step counter (~0) so they never
    // collide with per-step noise draws.
    const std::uint64_t init_step = ~std::uint64_t{0};
    if (kind == Kind::Atoms) {
        if (points.size() == 1) {
            return points[0];
        }
        const double u = counter_uniform(seed, rollout, init_step, 0);
        double acc = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            acc += atom_weights[i];
            if (u <= acc) {
                return points[i];
            }
        }
        return points.back();
    }
    Eigen::VectorXd x(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        x[i] = mean[i] + std::sqrt(variances[i]) *
                             counter_normal(seed, rollout, init_step,
                                            static_cast<std::uint64_t>(i) + 1);
    }
    return x;
}

Eigen::MatrixXd QGMDP::R_at(const Eigen::VectorXd& x) const {
    return R_fn ? R_fn(x) : R;
}

Eigen::MatrixXd QGMDP::Sigma_at(const Eigen::VectorXd& x) const {
    return Sigma_fn ? Sigma_fn(x) : Sigma;
}

double QGMDP::step_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    double cost = state_cost(x) + u.dot(control_cost_lin(x)) + u.dot(R_at(x) * u);
    if (extra_cost) {
        cost += extra_cost(x, u);
    }
    return cost;
}

Eigen::VectorXd QGMDP::step_cost_du(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u) const {
    Eigen::VectorXd g = control_cost_lin(x) + 2.0 * (R_at(x) * u);
    if (extra_cost) {
        if (extra_cost_du) {
            g += extra_cost_du(x, u);
        } else {
            Eigen::VectorXd up = u, um = u;
            for (int i = 0; i < n_u; ++i) {
                const double h = 1e-5 * (1.0 + std::abs(u[i]));
                up[i] = u[i] + h;
                um[i] = u[i] - h;
                g[i] += (extra_cost(x, up) - extra_cost(x, um)) / (2.0 * h);
                up[i] = u[i];
                um[i] = u[i];
            }
        }
    }
    return g;
}

Eigen::MatrixXd QGMDP::dynamics_jacobian_u(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& u) const {
    if (dynamics_du) {
        return dynamics_du(x, u);
    }
    Eigen::MatrixXd jac(n_x, n_u);
    Eigen::VectorXd up = u, um = u;
    for (int i = 0; i < n_u; ++i) {
        const double h = 1e-5 * (1.0 + std::abs(u[i]));
        up[i] = u[i] + h;
        um[i] = u[i] - h;
        const Eigen::VectorXd fp = dynamics(x, up);
        const Eigen::VectorXd fm = dynamics(x, um);
        if (!fp.allFinite() || !fm.allFinite()) {
            throw std::runtime_error(
                "dynamics_jacobian_u: non-finite finite-difference probe");
        }
        jac.col(i) = (fp - fm) / (2.0 * h);
        up[i] = u[i];
        um[i] = u[i];
    }
    return jac;
}

void QGMDP::validate(const std::vector<Eigen::VectorXd>& probe_states) const {
    if (n_x < 1 || n_u < 1) {
        throw std::invalid_argument("QGMDP: dimensions must be positive");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("QGMDP: gamma must be in (0,1)");
    }
    auto check_R = [&](const Eigen::MatrixXd& Rm) {
        if ((Rm - Rm.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            throw std::invalid_argument("QGMDP: R must be symmetric");
        }
    };
    auto check_Sigma = [&](const Eigen::MatrixXd& S) {
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("QGMDP: Sigma must be SPD");
        }
    };
    if (!R_fn) check_R(R);
    if (!Sigma_fn) check_Sigma(Sigma);
    if (R_fn && Sigma_fn) {
        // Both state-dependent: require R(x) Sigma(x) = alpha I at all probes.
        if (probe_states.empty()) {
            throw std::invalid_argument(
                "QGMDP: state-dependent R and Sigma require probe states for the "
                "alpha-proportionality check");
        }
        double alpha = 0.0;
        bool first = true;
        for (const auto& x : probe_states) {
            const Eigen::MatrixXd Rm = R_fn(x);
            const Eigen::MatrixXd S = Sigma_fn(x);
            check_R(Rm);
            check_Sigma(S);
            const Eigen::MatrixXd prod = Rm * S;
            const double a = prod.trace() / n_u;
            if (first) {
                alpha = a;
                first = false;
            }
            const Eigen::MatrixXd dev =
                prod - alpha * Eigen::MatrixXd::Identity(n_u, n_u);
            if (dev.cwiseAbs().maxCoeff() > 1e-9) {
                throw std::invalid_argument(
                    "QGMDP: state-dependent R(x)*Sigma(x) is not alpha*I; "
                    "equivalence does not hold for this MDP");
            }
        }
    }
    if (p0.kind == InitialDistribution::Kind::Atoms) {
        double total = 0.0;
        for (double w : p0.atom_weights) {
            if (w < 0.0) {
                throw std::invalid_argument("QGMDP: p0 weights must be nonnegative");
            }
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw std::invalid_argument("QGMDP: p0 weights must sum to 1");
        }
    }
}

GaussianPolicy GaussianPolicy::with_theta(const Eigen::VectorXd& new_theta) const {
    GaussianPolicy p = *this;
    p.theta = new_theta;
    return p;
}

void GaussianPolicy::validate(const std::vector<Eigen::VectorXd>& probe_states) const {
    for (const auto& x : probe_states) {
        const Eigen::MatrixXd jac = mean_jacobian(x, theta);
        Eigen::MatrixXd fd(jac.rows(), jac.cols());
        Eigen::VectorXd tp = theta, tm = theta;
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const double h = 1e-6 * (1.0 + std::abs(theta[i]));
            tp[i] = theta[i] + h;
            tm[i] = theta[i] - h;
            fd.row(i) = ((mean(x, tp) - mean(x, tm)) / (2.0 * h)).transpose();
            tp[i] = theta[i];
            tm[i] = theta[i];
        }
        const double scale = 1.0 + jac.cwiseAbs().maxCoeff();
        if ((jac - fd).cwiseAbs().maxCoeff() / scale > 1e-6) {
            throw std::invalid_argument(
                "GaussianPolicy: mean_jacobian disagrees with finite differences");
        }
    }
}

GaussianPolicy linear_policy(StateVecFn features, int n_features, int n_u,
                             const Eigen::VectorXd& theta0) {
    if (theta0.size() != static_cast<Eigen::Index>(n_features) * n_u) {
        throw std::invalid_argument("linear_policy: theta size must be n_u*n_features");
    }
    GaussianPolicy policy;
    policy.theta = theta0;
    policy.mean = [features, n_features, n_u](const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& theta) {
        const Eigen::VectorXd phi = features(x);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
            Theta(theta.data(), n_u, n_features);
        return Eigen::VectorXd(Theta * phi);
    };
    policy.mean_jacobian = [features, n_features, n_u](const Eigen::VectorXd& x,
                                                       const Eigen::VectorXd&) {
        const Eigen::VectorXd phi = features(x);
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(
            static_cast<Eigen::Index>(n_features) * n_u, n_u);
        for (int j = 0; j < n_u; ++j) {
            for (int i = 0; i < n_features; ++i) {
                jac(static_cast<Eigen::Index>(j) * n_features + i, j) = phi[i];
            }
        }
        return jac;
    };
    return policy;
}

GaussianPolicy linear_state_policy(int n_x, int n_u, const Eigen::MatrixXd& Theta0) {
    Eigen::VectorXd theta0(static_cast<Eigen::Index>(n_x) * n_u);
    for (int j = 0; j < n_u; ++j) {
        for (int i = 0; i < n_x; ++i) {
            theta0[static_cast<Eigen::Index>(j) * n_x + i] = Theta0(j, i);
        }
    }
    return linear_policy([](const Eigen::VectorXd& x) { return x; }, n_x, n_u, theta0);
}

std::string to_string(Mode mode) { return mode == Mode::S ? "S" : "D"; }

}  // namespace pgeq
