#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pgeq/mdp.hpp"
#include "pgeq/quadrature.hpp"

namespace pgeq {

struct GridSpec {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::vector<int> nodes_per_axis;
    int quad_order = 10;

    GridSpec refined() const;  // double node density, raise quadrature order
};

/// Multilinear interpolation stencil (2 points in 1-D, 4 in 2-D), positions
/// clamped to the grid.
struct InterpStencil {
    std::array<int, 4> index{};
    std::array<double, 4> weight{};
    int count = 0;
    bool clamped = false;
};

/// Grid discretization of a QGMDP under a fixed policy snapshot: row-stochastic
/// transition operator (interpolation weights x quadrature weights), both
/// per-step cost vectors, and the discretized initial distribution.
class GridModel {
public:
    GridModel(const QGMDP& mdp, const GaussianPolicy& policy, const GridSpec& spec);

    /// Generic discretization of an arbitrary controlled chain: per-state cost
    /// plus a kernel that returns weighted next-state samples for each state.
    using KernelFn = std::function<std::vector<std::pair<Eigen::VectorXd, double>>(
        const Eigen::VectorXd&)>;
    GridModel(int n_x, double gamma, const GridSpec& spec,
              const std::function<double(const Eigen::VectorXd&)>& cost,
              const KernelFn& kernel, const InitialDistribution& p0);

    int dim() const { return dim_; }
    int num_nodes() const { return num_nodes_; }
    Eigen::VectorXd node(int i) const;
    const Eigen::MatrixXd& transition() const { return transition_; }
    const Eigen::VectorXd& cost(Mode mode) const {
        return mode == Mode::S ? cost_S_ : cost_D_;
    }
    const Eigen::VectorXd& p0_weights() const { return p0_weights_; }
    double clamp_fraction() const { return clamp_fraction_; }
    double gamma() const { return gamma_; }
    const GridSpec& spec() const { return spec_; }

    InterpStencil interpolate(const Eigen::VectorXd& x) const;
    double interp_value(const Eigen::VectorXd& field, const Eigen::VectorXd& x) const;
    // Spatial gradient of the multilinear interpolant (exact within the cell;
    // zero along clamped axes).
    Eigen::VectorXd interp_gradient(const Eigen::VectorXd& field,
                                    const Eigen::VectorXd& x) const;

    // Solves (I - gamma P) v = c or its transpose; factorization cached.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, bool transpose) const;

private:
    void init_axes(const GridSpec& spec);
    void discretize_p0(const InitialDistribution& p0);

    int dim_ = 0;
    int num_nodes_ = 0;
    double gamma_ = 0.0;
    GridSpec spec_;
    std::vector<Eigen::VectorXd> axes_;
    std::vector<double> steps_;
    Eigen::MatrixXd transition_;
    Eigen::VectorXd cost_S_;
    Eigen::VectorXd cost_D_;
    Eigen::VectorXd p0_weights_;
    double clamp_fraction_ = 0.0;
    mutable std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
    mutable std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_transpose_;
};

struct ValueField {
    Eigen::VectorXd values;
    Mode mode = Mode::D;
    Eigen::VectorXd theta;
    double residual = 0.0;
    bool clamp_warning = false;  // more than 10% of transition mass clamped
};

ValueField solve_value(const GridModel& grid, const GaussianPolicy& policy, Mode mode);

/// Unnormalized discounted visitation weights on grid nodes; total mass
/// 1/(1-gamma).
Eigen::VectorXd discounted_density(const GridModel& grid);

double performance(const GridModel& grid, Mode mode);

struct GradientBreakdown {
    Eigen::VectorXd total;
    Eigen::VectorXd cost_term;
    Eigen::VectorXd value_term;
};

GradientBreakdown exact_gradient(const QGMDP& mdp, const GaussianPolicy& policy,
                                 const GridSpec& spec, Mode mode);

/// Central finite differences of performance() in theta (independent oracle).
Eigen::VectorXd fd_gradient(const QGMDP& mdp, const GaussianPolicy& policy,
                            const GridSpec& spec, Mode mode, double eps = 1e-5);

double q_value(const QGMDP& mdp, const GaussianPolicy& policy, const GridModel& grid,
               const ValueField& value, const Eigen::VectorXd& x,
               const Eigen::VectorXd& u);

}  // namespace pgeq
