#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

#include <Eigen/Cholesky>

#include "pgeq/mdp.hpp"
#include "pgeq/rng.hpp"

namespace pgeq {
namespace {

Trajectory run_one(const QGMDP& mdp, const GaussianPolicy& policy,
                   const RolloutConfig& cfg, int rollout_index) {
    const std::uint64_t r = static_cast<std::uint64_t>(rollout_index);
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(cfg.horizon) + 1);
    traj.noises.reserve(static_cast<std::size_t>(cfg.horizon));
    traj.controls.reserve(static_cast<std::size_t>(cfg.horizon));
    traj.costs_S.resize(cfg.horizon);
    traj.costs_D.resize(cfg.horizon);
    traj.discounts.resize(cfg.horizon);

    Eigen::LLT<Eigen::MatrixXd> fixed_llt;
    if (!mdp.Sigma_fn) {
        fixed_llt.compute(mdp.Sigma);
    }

    Eigen::VectorXd x = mdp.p0.sample(cfg.master_seed, r);
    traj.states.push_back(x);
    double disc = 1.0;
    for (int t = 0; t < cfg.horizon; ++t) {
        const Eigen::VectorXd z =
            counter_normal_vector(cfg.master_seed, r, static_cast<std::uint64_t>(t),
                                  mdp.n_u);
        Eigen::VectorXd d;
        if (mdp.Sigma_fn) {
            Eigen::LLT<Eigen::MatrixXd> llt(mdp.Sigma_at(x));
            d = Eigen::MatrixXd(llt.matrixL()) * z;
        } else {
            d = Eigen::MatrixXd(fixed_llt.matrixL()) * z;
        }
        const Eigen::VectorXd mu = policy.mu(x);
        const Eigen::VectorXd u = mu + d;
        traj.costs_S[t] = mdp.step_cost(x, u);
        traj.costs_D[t] = mdp.step_cost(x, mu);
        traj.discounts[t] = disc;
        disc *= mdp.gamma;
        traj.noises.push_back(d);
        traj.controls.push_back(u);
        x = mdp.dynamics(x, u);
        if (!x.allFinite() || !std::isfinite(traj.costs_S[t]) ||
            !std::isfinite(traj.costs_D[t])) {
            throw std::runtime_error("rollout: non-finite state or cost at step " +
                                     std::to_string(t) + " of rollout " +
                                     std::to_string(rollout_index) +
                                     " (divergent dynamics)");
        }
        traj.states.push_back(x);
    }
    return traj;
}

}  // namespace

std::vector<Trajectory> rollout(const QGMDP& mdp, const GaussianPolicy& policy,
                                const RolloutConfig& cfg) {
    if (cfg.horizon < 1) {
        throw std::invalid_argument("rollout: horizon must be >= 1");
    }
    if (cfg.n_rollouts < 1) {
        throw std::invalid_argument("rollout: n_rollouts must be >= 1");
    }
    std::vector<Trajectory> out(static_cast<std::size_t>(cfg.n_rollouts));
    const int jobs = std::max(1, cfg.n_jobs);
    if (jobs == 1 || cfg.n_rollouts == 1) {
        for (int i = 0; i < cfg.n_rollouts; ++i) {
            out[static_cast<std::size_t>(i)] = run_one(mdp, policy, cfg, i);
        }
        return out;
    }
    // Each rollout writes to a pre-assigned slot; draws are counter-based, so
    // the result is identical for any worker count.
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w]() {
            try {
                for (int i = w; i < cfg.n_rollouts; i += jobs) {
                    out[static_cast<std::size_t>(i)] = run_one(mdp, policy, cfg, i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    for (const auto& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
    return out;
}

DiscountedReturn discounted_return(const Trajectory& traj, double gamma, Mode mode) {
    const Eigen::VectorXd& costs = traj.costs(mode);
    DiscountedReturn result;
    result.value = traj.discounts.dot(costs);
    const double max_abs = costs.size() > 0 ? costs.cwiseAbs().maxCoeff() : 0.0;
    result.tail_bound =
        std::pow(gamma, static_cast<double>(traj.horizon())) * max_abs / (1.0 - gamma);
    return result;
}

}  // namespace pgeq
