#include "pgeq/grid.hpp"

#include <cmath>
#include <stdexcept>

#include "pgeq/gauss.hpp"

namespace pgeq {

GridSpec GridSpec::refined() const {
    GridSpec fine = *this;
    for (auto& n : fine.nodes_per_axis) {
        n = 2 * (n - 1) + 1;
    }
    fine.quad_order = quad_order + 4;
    return fine;
}

void GridModel::init_axes(const GridSpec& spec) {
    if (dim_ < 1 || dim_ > 2) {
        throw std::invalid_argument("GridModel: state dimension must be 1 or 2");
    }
    if (spec.lo.size() != dim_ || spec.hi.size() != dim_ ||
        static_cast<int>(spec.nodes_per_axis.size()) != dim_) {
        throw std::invalid_argument("GridModel: spec dimension mismatch");
    }
    num_nodes_ = 1;
    for (int d = 0; d < dim_; ++d) {
        const int n = spec.nodes_per_axis[static_cast<std::size_t>(d)];
        if (n < 2) {
            throw std::invalid_argument("GridModel: need at least 2 nodes per axis");
        }
        Eigen::VectorXd axis(n);
        for (int i = 0; i < n; ++i) {
            axis[i] = spec.lo[d] + (spec.hi[d] - spec.lo[d]) * i / (n - 1);
        }
        axes_.push_back(axis);
        steps_.push_back((spec.hi[d] - spec.lo[d]) / (n - 1));
        num_nodes_ *= n;
    }
}

void GridModel::discretize_p0(const InitialDistribution& p0) {
    p0_weights_ = Eigen::VectorXd::Zero(num_nodes_);
    if (p0.kind == InitialDistribution::Kind::Atoms) {
        for (std::size_t a = 0; a < p0.points.size(); ++a) {
            const InterpStencil st = interpolate(p0.points[a]);
            for (int k = 0; k < st.count; ++k) {
                p0_weights_[st.index[static_cast<std::size_t>(k)]] +=
                    p0.atom_weights[a] * st.weight[static_cast<std::size_t>(k)];
            }
        }
    } else {
        for (int i = 0; i < num_nodes_; ++i) {
            const Eigen::VectorXd x = node(i);
            double pdf = 1.0;
            for (int d = 0; d < dim_; ++d) {
                const double z = x[d] - p0.mean[d];
                pdf *= std::exp(-0.5 * z * z / p0.variances[d]);
            }
            p0_weights_[i] = pdf;
        }
        p0_weights_ /= p0_weights_.sum();
    }
}

GridModel::GridModel(int n_x, double gamma, const GridSpec& spec,
                     const std::function<double(const Eigen::VectorXd&)>& cost,
                     const KernelFn& kernel, const InitialDistribution& p0)
    : dim_(n_x), gamma_(gamma), spec_(spec) {
    init_axes(spec);
    transition_ = Eigen::MatrixXd::Zero(num_nodes_, num_nodes_);
    cost_S_.resize(num_nodes_);
    cost_D_.resize(num_nodes_);
    double clamped_mass = 0.0;
    for (int i = 0; i < num_nodes_; ++i) {
        const Eigen::VectorXd x = node(i);
        double row_mass = 0.0;
        for (const auto& [y, w] : kernel(x)) {
            const InterpStencil st = interpolate(y);
            for (int k = 0; k < st.count; ++k) {
                transition_(i, st.index[static_cast<std::size_t>(k)]) +=
                    w * st.weight[static_cast<std::size_t>(k)];
            }
            if (st.clamped) {
                clamped_mass += w;
            }
            row_mass += w;
        }
        // Normalize so each row stays a convex combination even when the
        // kernel's sample weights carry quadrature roundoff.
        transition_.row(i) /= row_mass;
        cost_S_[i] = cost_D_[i] = cost(x);
    }
    clamp_fraction_ = clamped_mass / num_nodes_;
    discretize_p0(p0);
}

GridModel::GridModel(const QGMDP& mdp, const GaussianPolicy& policy,
                     const GridSpec& spec)
    : dim_(mdp.n_x), gamma_(mdp.gamma), spec_(spec) {
    if (mdp.n_u > 2) {
        throw std::invalid_argument("GridModel: control dimension must be <= 2");
    }
    init_axes(spec);

    transition_ = Eigen::MatrixXd::Zero(num_nodes_, num_nodes_);
    cost_S_.resize(num_nodes_);
    cost_D_.resize(num_nodes_);

    const QuadratureRule standard = make_standard_quadrature(mdp.n_u, spec.quad_order);
    QuadratureRule fixed_rule;
    if (!mdp.Sigma_fn) {
        fixed_rule = transform_quadrature(standard, mdp.Sigma);
    }

    double clamped_mass = 0.0;
    for (int i = 0; i < num_nodes_; ++i) {
        const Eigen::VectorXd x = node(i);
        const Eigen::VectorXd mu = policy.mu(x);
        QuadratureRule local;
        const QuadratureRule* rule_ptr = &fixed_rule;
        if (mdp.Sigma_fn) {
            local = transform_quadrature(standard, mdp.Sigma_at(x));
            rule_ptr = &local;
        }
        double extra_S = 0.0;
        for (std::size_t qi = 0; qi < rule_ptr->nodes.size(); ++qi) {
            const double w = rule_ptr->weights[static_cast<Eigen::Index>(qi)];
            const Eigen::VectorXd u = mu + rule_ptr->nodes[qi];
            const Eigen::VectorXd y = mdp.dynamics(x, u);
            if (!y.allFinite()) {
                throw std::runtime_error("GridModel: non-finite dynamics image");
            }
            const InterpStencil st = interpolate(y);
            for (int k = 0; k < st.count; ++k) {
                transition_(i, st.index[static_cast<std::size_t>(k)]) +=
                    w * st.weight[static_cast<std::size_t>(k)];
            }
            if (st.clamped) {
                clamped_mass += w;
            }
            if (mdp.extra_cost) {
                extra_S += w * mdp.extra_cost(x, u);
            }
        }
        cost_D_[i] = mdp.step_cost(x, mu);
        cost_S_[i] = expected_quadratic_cost(mdp.state_cost(x), mdp.control_cost_lin(x),
                                             mdp.R_at(x), mu, mdp.Sigma_at(x)) +
                     extra_S;
    }
    clamp_fraction_ = clamped_mass / num_nodes_;
    discretize_p0(mdp.p0);
}

Eigen::VectorXd GridModel::node(int i) const {
    Eigen::VectorXd x(dim_);
    int rem = i;
    for (int d = 0; d < dim_; ++d) {
        const int n = static_cast<int>(axes_[static_cast<std::size_t>(d)].size());
        x[d] = axes_[static_cast<std::size_t>(d)][rem % n];
        rem /= n;
    }
    return x;
}

InterpStencil GridModel::interpolate(const Eigen::VectorXd& x) const {
    InterpStencil st;
    int base_idx[2] = {0, 0};
    double frac[2] = {0.0, 0.0};
    for (int d = 0; d < dim_; ++d) {
        const auto& axis = axes_[static_cast<std::size_t>(d)];
        const int n = static_cast<int>(axis.size());
        double pos = x[d];
        if (pos <= axis[0]) {
            if (pos < axis[0]) st.clamped = true;
            pos = axis[0];
        } else if (pos >= axis[n - 1]) {
            if (pos > axis[n - 1]) st.clamped = true;
            pos = axis[n - 1];
        }
        int cell = static_cast<int>((pos - axis[0]) / steps_[static_cast<std::size_t>(d)]);
        if (cell > n - 2) cell = n - 2;
        base_idx[d] = cell;
        frac[d] = (pos - axis[cell]) / steps_[static_cast<std::size_t>(d)];
    }
    const int n0 = static_cast<int>(axes_[0].size());
    if (dim_ == 1) {
        st.count = 2;
        st.index[0] = base_idx[0];
        st.index[1] = base_idx[0] + 1;
        st.weight[0] = 1.0 - frac[0];
        st.weight[1] = frac[0];
    } else {
        st.count = 4;
        const int i0 = base_idx[0], i1 = base_idx[1];
        st.index[0] = i0 + n0 * i1;
        st.index[1] = (i0 + 1) + n0 * i1;
        st.index[2] = i0 + n0 * (i1 + 1);
        st.index[3] = (i0 + 1) + n0 * (i1 + 1);
        st.weight[0] = (1.0 - frac[0]) * (1.0 - frac[1]);
        st.weight[1] = frac[0] * (1.0 - frac[1]);
        st.weight[2] = (1.0 - frac[0]) * frac[1];
        st.weight[3] = frac[0] * frac[1];
    }
    return st;
}

double GridModel::interp_value(const Eigen::VectorXd& field,
                               const Eigen::VectorXd& x) const {
    const InterpStencil st = interpolate(x);
    double v = 0.0;
    for (int k = 0; k < st.count; ++k) {
        v += st.weight[static_cast<std::size_t>(k)] *
             field[st.index[static_cast<std::size_t>(k)]];
    }
    return v;
}

Eigen::VectorXd GridModel::interp_gradient(const Eigen::VectorXd& field,
                                           const Eigen::VectorXd& x) const {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim_);
    const InterpStencil st = interpolate(x);
    // Axis clamped => position insensitive to x along it.
    bool outside[2] = {false, false};
    for (int d = 0; d < dim_; ++d) {
        const auto& axis = axes_[static_cast<std::size_t>(d)];
        const int n = static_cast<int>(axis.size());
        outside[d] = (x[d] < axis[0]) || (x[d] > axis[n - 1]);
    }
    if (dim_ == 1) {
        if (!outside[0]) {
            grad[0] = (field[st.index[1]] - field[st.index[0]]) / steps_[0];
        }
        return grad;
    }
    const double v00 = field[st.index[0]], v10 = field[st.index[1]];
    const double v01 = field[st.index[2]], v11 = field[st.index[3]];
    const double t0 = st.weight[1] + st.weight[3];  // frac along axis 0
    const double t1 = st.weight[2] + st.weight[3];  // frac along axis 1
    if (!outside[0]) {
        grad[0] = ((v10 - v00) * (1.0 - t1) + (v11 - v01) * t1) / steps_[0];
    }
    if (!outside[1]) {
        grad[1] = ((v01 - v00) * (1.0 - t0) + (v11 - v10) * t0) / steps_[1];
    }
    return grad;
}

Eigen::VectorXd GridModel::solve(const Eigen::VectorXd& rhs, bool transpose) const {
    auto& lu = transpose ? lu_transpose_ : lu_;
    if (!lu) {
        Eigen::MatrixXd system =
            Eigen::MatrixXd::Identity(num_nodes_, num_nodes_) - gamma_ * transition_;
        if (transpose) {
            system.transposeInPlace();
        }
        lu = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXd>>(system);
    }
    return lu->solve(rhs);
}

ValueField solve_value(const GridModel& grid, const GaussianPolicy& policy, Mode mode) {
    ValueField field;
    field.mode = mode;
    field.theta = policy.theta;
    field.values = grid.solve(grid.cost(mode), false);
    if (!field.values.allFinite()) {
        throw std::runtime_error("solve_value: singular Bellman system");
    }
    const Eigen::VectorXd bellman =
        grid.cost(mode) + grid.gamma() * (grid.transition() * field.values);
    field.residual = (field.values - bellman).cwiseAbs().maxCoeff();
    field.clamp_warning = grid.clamp_fraction() > 0.10;
    return field;
}

Eigen::VectorXd discounted_density(const GridModel& grid) {
    return grid.solve(grid.p0_weights(), true);
}

double performance(const GridModel& grid, Mode mode) {
    return grid.p0_weights().dot(grid.solve(grid.cost(mode), false));
}

GradientBreakdown exact_gradient(const QGMDP& mdp, const GaussianPolicy& policy,
                                 const GridSpec& spec, Mode mode) {
    if (policy.theta.size() > 20) {
        throw std::invalid_argument("exact_gradient: n_theta must be <= 20");
    }
    const GridModel grid(mdp, policy, spec);
    const ValueField field = solve_value(grid, policy, mode);
    const Eigen::VectorXd rho = discounted_density(grid);

    const QuadratureRule standard = make_standard_quadrature(mdp.n_u, spec.quad_order);
    QuadratureRule fixed_rule;
    if (!mdp.Sigma_fn) {
        fixed_rule = transform_quadrature(standard, mdp.Sigma);
    }

    GradientBreakdown out;
    const Eigen::Index n_theta = policy.theta.size();
    out.cost_term = Eigen::VectorXd::Zero(n_theta);
    out.value_term = Eigen::VectorXd::Zero(n_theta);
    for (int i = 0; i < grid.num_nodes(); ++i) {
        const Eigen::VectorXd x = grid.node(i);
        const Eigen::VectorXd mu = policy.mu(x);
        const Eigen::MatrixXd dmu = policy.dmu_dtheta(x);
        QuadratureRule local;
        const QuadratureRule* rule = &fixed_rule;
        if (mdp.Sigma_fn) {
            local = transform_quadrature(standard, mdp.Sigma_at(x));
            rule = &local;
        }
        Eigen::VectorXd cost_du;   // d(per-step cost)/d mu
        Eigen::VectorXd value_du = Eigen::VectorXd::Zero(mdp.n_u);
        if (mode == Mode::D) {
            cost_du = mdp.step_cost_du(x, mu);
        } else {
            cost_du = Eigen::VectorXd::Zero(mdp.n_u);
        }
        for (std::size_t qi = 0; qi < rule->nodes.size(); ++qi) {
            const double w = rule->weights[static_cast<Eigen::Index>(qi)];
            const Eigen::VectorXd u = mu + rule->nodes[qi];
            if (mode == Mode::S) {
                cost_du += w * mdp.step_cost_du(x, u);
            }
            const Eigen::VectorXd y = mdp.dynamics(x, u);
            const Eigen::VectorXd vgrad = grid.interp_gradient(field.values, y);
            value_du += w * (mdp.dynamics_jacobian_u(x, u).transpose() * vgrad);
        }
        out.cost_term += rho[i] * (dmu * cost_du);
        out.value_term += rho[i] * mdp.gamma * (dmu * value_du);
    }
    out.total = out.cost_term + out.value_term;
    return out;
}

Eigen::VectorXd fd_gradient(const QGMDP& mdp, const GaussianPolicy& policy,
                            const GridSpec& spec, Mode mode, double eps) {
    Eigen::VectorXd grad(policy.theta.size());
    for (Eigen::Index i = 0; i < policy.theta.size(); ++i) {
        const double h = eps * (1.0 + std::abs(policy.theta[i]));
        Eigen::VectorXd tp = policy.theta, tm = policy.theta;
        tp[i] += h;
        tm[i] -= h;
        const GridModel gp(mdp, policy.with_theta(tp), spec);
        const GridModel gm(mdp, policy.with_theta(tm), spec);
        grad[i] = (performance(gp, mode) - performance(gm, mode)) / (2.0 * h);
    }
    return grad;
}

double q_value(const QGMDP& mdp, const GaussianPolicy& policy, const GridModel& grid,
               const ValueField& value, const Eigen::VectorXd& x,
               const Eigen::VectorXd& u) {
    (void)policy;
    const double step = mdp.step_cost(x, u);
    if (value.mode == Mode::S) {
        return step + mdp.gamma * grid.interp_value(value.values, mdp.dynamics(x, u));
    }
    const QuadratureRule rule =
        make_quadrature(mdp.n_u, grid.spec().quad_order, mdp.Sigma_at(x));
    double expect = 0.0;
    for (std::size_t qi = 0; qi < rule.nodes.size(); ++qi) {
        expect += rule.weights[static_cast<Eigen::Index>(qi)] *
                  grid.interp_value(value.values, mdp.dynamics(x, u + rule.nodes[qi]));
    }
    return step + mdp.gamma * expect;
}

}  // namespace pgeq
