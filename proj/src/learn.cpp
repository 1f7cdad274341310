#include "pgeq/learn.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "pgeq/rng.hpp"

namespace pgeq {
namespace {

double int_pow(double x, int p) {
    double out = 1.0;
    for (int i = 0; i < p; ++i) {
        out *= x;
    }
    return out;
}

void enumerate_exponents(int n_x, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> current(static_cast<std::size_t>(n_x), 0);
    std::function<void(int, int)> recurse = [&](int pos, int remaining) {
        if (pos == n_x) {
            out.push_back(current);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            current[static_cast<std::size_t>(pos)] = e;
            recurse(pos + 1, remaining - e);
        }
        current[static_cast<std::size_t>(pos)] = 0;
    };
    recurse(0, degree);
}

}  // namespace

CriticFeatures polynomial_features(int n_x, int degree) {
    auto exponents = std::make_shared<std::vector<std::vector<int>>>();
    enumerate_exponents(n_x, degree, *exponents);
    const int n_f = static_cast<int>(exponents->size());

    CriticFeatures features;
    features.n_features = n_f;
    features.psi = [exponents, n_f, n_x](const Eigen::VectorXd& x) {
        Eigen::VectorXd psi(n_f);
        for (int k = 0; k < n_f; ++k) {
            double v = 1.0;
            for (int j = 0; j < n_x; ++j) {
                v *= int_pow(x[j], (*exponents)[static_cast<std::size_t>(k)]
                                              [static_cast<std::size_t>(j)]);
            }
            psi[k] = v;
        }
        return psi;
    };
    features.dpsi_dx = [exponents, n_f, n_x](const Eigen::VectorXd& x) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_f, n_x);
        for (int k = 0; k < n_f; ++k) {
            const auto& a = (*exponents)[static_cast<std::size_t>(k)];
            for (int j = 0; j < n_x; ++j) {
                const int aj = a[static_cast<std::size_t>(j)];
                if (aj == 0) continue;
                double v = aj * int_pow(x[j], aj - 1);
                for (int i = 0; i < n_x; ++i) {
                    if (i != j) v *= int_pow(x[i], a[static_cast<std::size_t>(i)]);
                }
                jac(k, j) = v;
            }
        }
        return jac;
    };
    features.d2psi_dx2 = [exponents, n_f, n_x](const Eigen::VectorXd& x) {
        std::vector<Eigen::MatrixXd> hess(static_cast<std::size_t>(n_f),
                                          Eigen::MatrixXd::Zero(n_x, n_x));
        for (int k = 0; k < n_f; ++k) {
            const auto& a = (*exponents)[static_cast<std::size_t>(k)];
            for (int j = 0; j < n_x; ++j) {
                for (int m = 0; m < n_x; ++m) {
                    const int aj = a[static_cast<std::size_t>(j)];
                    const int am = a[static_cast<std::size_t>(m)];
                    double v;
                    if (j == m) {
                        if (aj < 2) continue;
                        v = aj * (aj - 1) * int_pow(x[j], aj - 2);
                    } else {
                        if (aj == 0 || am == 0) continue;
                        v = aj * am * int_pow(x[j], aj - 1) * int_pow(x[m], am - 1);
                    }
                    for (int i = 0; i < n_x; ++i) {
                        if (i != j && i != m) {
                            v *= int_pow(x[i], a[static_cast<std::size_t>(i)]);
                        }
                    }
                    hess[static_cast<std::size_t>(k)](j, m) = v;
                }
            }
        }
        return hess;
    };
    return features;
}

Eigen::MatrixXd Critic::hessian(const Eigen::VectorXd& x) const {
    const int n_x = static_cast<int>(x.size());
    if (features.d2psi_dx2) {
        const std::vector<Eigen::MatrixXd> h = features.d2psi_dx2(x);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_x, n_x);
        for (Eigen::Index k = 0; k < omega.size(); ++k) {
            out += omega[k] * h[static_cast<std::size_t>(k)];
        }
        return out;
    }
    // Central differences of the analytic gradient.
    Eigen::MatrixXd out(n_x, n_x);
    Eigen::VectorXd xp = x, xm = x;
    for (int j = 0; j < n_x; ++j) {
        const double h = 1e-5 * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        out.col(j) = (gradient(xp) - gradient(xm)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return 0.5 * (out + out.transpose());
}

ValueFunctionHandle Critic::handle() const {
    ValueFunctionHandle h;
    const Critic self = *this;
    h.value = [self](const Eigen::VectorXd& x) { return self.value(x); };
    h.gradient = [self](const Eigen::VectorXd& x) { return self.gradient(x); };
    return h;
}

Critic fit_critic(const std::vector<Trajectory>& rollouts,
                  const CriticFeatures& features, double gamma, Mode mode) {
    const int n_f = features.n_features;
    int n_transitions = 0;
    for (const auto& traj : rollouts) {
        n_transitions += traj.horizon();
    }
    if (n_transitions < n_f) {
        throw std::invalid_argument("fit_critic: fewer transitions than features");
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_f, n_f);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_f);
    for (const auto& traj : rollouts) {
        for (int t = 0; t < traj.horizon(); ++t) {
            const Eigen::VectorXd row =
                features.psi(traj.states[static_cast<std::size_t>(t)]) -
                gamma * features.psi(traj.states[static_cast<std::size_t>(t) + 1]);
            const double target = traj.costs(mode)[t];
            gram += row * row.transpose();
            rhs += row * target;
        }
    }
    const double ridge = 1e-8;
    gram += ridge * Eigen::MatrixXd::Identity(n_f, n_f);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Critic critic;
    critic.features = features;
    critic.omega = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !critic.omega.allFinite()) {
        throw std::runtime_error("fit_critic: rank-deficient normal equations");
    }
    double ssr = 0.0;
    for (const auto& traj : rollouts) {
        for (int t = 0; t < traj.horizon(); ++t) {
            const double res =
                critic.value(traj.states[static_cast<std::size_t>(t)]) -
                traj.costs(mode)[t] -
                gamma * critic.value(traj.states[static_cast<std::size_t>(t) + 1]);
            ssr += res * res;
        }
    }
    critic.mean_sq_residual = ssr / n_transitions;
    critic.sample_count = n_transitions;
    return critic;
}

std::string to_string(KKind kind) {
    switch (kind) {
        case KKind::KS: return "KS";
        case KKind::KD: return "KD";
        case KKind::KS_baselined: return "KS_baselined";
        case KKind::KD_baselined: return "KD_baselined";
    }
    return "?";
}

std::vector<Eigen::VectorXd> k_estimator(const Trajectory& traj, const Critic& critic,
                                         const QGMDP& mdp, const GaussianPolicy& policy,
                                         KKind kind) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(traj.horizon()));
    for (int t = 0; t < traj.horizon(); ++t) {
        const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(t)];
        const Eigen::VectorXd& u = traj.controls[static_cast<std::size_t>(t)];
        const Eigen::VectorXd mu = policy.mu(x);
        // x_{t+1} = f(x_t, u_t) is already stored.
        const Eigen::VectorXd& next = traj.states[static_cast<std::size_t>(t) + 1];
        Eigen::VectorXd k;
        switch (kind) {
            case KKind::KS: {
                const Eigen::MatrixXd Sigma = mdp.Sigma_at(x);
                k = Sigma.llt().solve(u - mu) * critic.value(next);
                break;
            }
            case KKind::KS_baselined: {
                const Eigen::MatrixXd Sigma = mdp.Sigma_at(x);
                const double baseline = critic.value(mdp.dynamics(x, mu));
                k = Sigma.llt().solve(u - mu) * (critic.value(next) - baseline);
                break;
            }
            case KKind::KD: {
                k = mdp.dynamics_jacobian_u(x, u).transpose() * critic.gradient(next);
                break;
            }
            case KKind::KD_baselined: {
                k = mdp.dynamics_jacobian_u(x, u).transpose() * critic.gradient(next);
                // Gauss-Newton curvature at the deterministic control.
                const Eigen::VectorXd f_mu = mdp.dynamics(x, mu);
                const Eigen::MatrixXd jac_mu = mdp.dynamics_jacobian_u(x, mu);
                const Eigen::MatrixXd hess =
                    jac_mu.transpose() * critic.hessian(f_mu) * jac_mu;
                k -= hess * (u - mu);
                break;
            }
        }
        out.push_back(std::move(k));
    }
    return out;
}

EstimatorResult policy_gradient_from_k(const std::vector<Trajectory>& rollouts,
                                       const Critic& critic, const QGMDP& mdp,
                                       const GaussianPolicy& policy, KKind kind) {
    const Eigen::Index n_theta = policy.theta.size();
    Eigen::MatrixXd contributions(n_theta, static_cast<Eigen::Index>(rollouts.size()));
    for (std::size_t ri = 0; ri < rollouts.size(); ++ri) {
        const Trajectory& traj = rollouts[ri];
        const std::vector<Eigen::VectorXd> ks =
            k_estimator(traj, critic, mdp, policy, kind);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n_theta);
        for (int t = 0; t < traj.horizon(); ++t) {
            const Eigen::VectorXd& x = traj.states[static_cast<std::size_t>(t)];
            const Eigen::VectorXd mu = policy.mu(x);
            const Eigen::MatrixXd dmu = policy.dmu_dtheta(x);
            g += traj.discounts[t] *
                 (dmu * (mdp.step_cost_du(x, mu) +
                         mdp.gamma * ks[static_cast<std::size_t>(t)]));
        }
        contributions.col(static_cast<Eigen::Index>(ri)) = g;
    }
    EstimatorResult result;
    result.gradient = contributions.rowwise().mean();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n_theta);
    const Eigen::Index n = contributions.cols();
    double vtrace = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd dev = contributions.col(i) - result.gradient;
        var += dev.cwiseAbs2();
        vtrace += dev.squaredNorm();
    }
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    result.standard_error = (var / static_cast<double>(n)).cwiseSqrt();
    result.variance_trace = vtrace / static_cast<double>(n > 1 ? n - 1 : 1);
    result.contributions = std::move(contributions);
    return result;
}

TrainLog train(const QGMDP& mdp, const GaussianPolicy& policy_init,
               const TrainConfig& cfg) {
    TrainLog log;
    GaussianPolicy policy = policy_init;
    for (int it = 0; it < cfg.iterations; ++it) {
        RolloutConfig rc = cfg.rollout_cfg;
        rc.master_seed = counter_hash(cfg.rollout_cfg.master_seed, 0x7261696e,
                                      static_cast<std::uint64_t>(it), 0);
        const std::vector<Trajectory> trajs = rollout(mdp, policy, rc);
        const Critic critic =
            fit_critic(trajs, cfg.critic_features, mdp.gamma, Mode::D);
        EstimatorResult grad =
            policy_gradient_from_k(trajs, critic, mdp, policy, cfg.kind);
        Eigen::VectorXd direction = grad.gradient;
        if (cfg.use_natural_gradient) {
            const FisherResult f = fisher(mdp, policy, trajs, FisherKind::D_metric);
            direction = natural_gradient(grad.gradient, f.matrix);
        }

        // Evaluate J with fresh rollouts before stepping.
        RolloutConfig ec = cfg.rollout_cfg;
        ec.n_rollouts = cfg.eval_rollouts;
        ec.master_seed = counter_hash(cfg.rollout_cfg.master_seed, 0x6576616c,
                                      static_cast<std::uint64_t>(it), 1);
        double j_est = 0.0;
        for (const Trajectory& traj : rollout(mdp, policy, ec)) {
            j_est += discounted_return(traj, mdp.gamma, Mode::D).value;
        }
        j_est /= cfg.eval_rollouts;
        if (!std::isfinite(j_est)) {
            log.aborted = true;
            log.abort_reason = "non-finite performance estimate at iteration " +
                               std::to_string(it);
            break;
        }
        TrainIteration row;
        row.iteration = it;
        row.performance = j_est;
        row.grad_norm = grad.gradient.norm();
        row.variance_trace = grad.variance_trace;
        row.step_size = cfg.step_size;
        row.seed = rc.master_seed;
        log.iterations.push_back(row);

        policy = policy.with_theta(policy.theta - cfg.step_size * direction);
    }
    log.theta_final = policy.theta;
    return log;
}

}  // namespace pgeq
