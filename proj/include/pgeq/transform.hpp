#pragma once

#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pgeq/grid.hpp"
#include "pgeq/mdp.hpp"
#include "pgeq/quadrature.hpp"

namespace pgeq {

/// Conditional control density u ~ pi_tilde(.|eta): Gaussian with fixed
/// covariance, mean eta.
struct GaussianFamily {
    Eigen::MatrixXd Sigma;
};

/// Mixture of Gaussians with fixed component weights, covariances and mean
/// offsets: component k has mean eta + offset_k.
struct MixtureComponent {
    double weight = 1.0;
    Eigen::VectorXd mean_offset;
    Eigen::MatrixXd cov;
};

struct MixtureFamily {
    std::vector<MixtureComponent> components;
};

using PolicyFamily = std::variant<GaussianFamily, MixtureFamily>;

/// Quadrature rule for u ~ pi_tilde(.|eta): nodes already shifted to eta.
QuadratureRule family_control_quadrature(const PolicyFamily& family,
                                         const Eigen::VectorXd& eta, int order);

double family_density(const PolicyFamily& family, const Eigen::VectorXd& eta,
                      const Eigen::VectorXd& u);

/// |integral of pi_tilde(.|eta) - 1| on a wide uniform control grid.
double family_normalization_defect(const PolicyFamily& family,
                                   const Eigen::VectorXd& eta);

/// Quadratic control cost tag that unlocks the closed-form transform.
struct QuadControlCost {
    StateCostFn q;
    StateVecFn r;
    Eigen::MatrixXd R;
};

/// The general S-MDP input: step cost, transition kernel (delta-through-f or
/// explicit density), and the sufficient-statistic decomposition of the
/// stochastic policy.
struct SMDPSpec {
    int n_x = 0;
    int n_u = 0;
    int n_eta = 0;
    double gamma = 0.9;
    InitialDistribution p0;
    ExtraCostFn step_cost;  // l_S(x,u)
    DynamicsFn dynamics;    // delta-through-f kernel (preferred route)
    // Explicit density p_S(x'|x,u) on a gridded state space (experimental).
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                         const Eigen::VectorXd&)>
        density;
    PolicyFamily family;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
        eta_map;  // eta = mu(x, theta)
    std::optional<QuadControlCost> quad_cost;  // set when l_S is quadratic in u

    void validate(const std::vector<Eigen::VectorXd>& probe_etas) const;
};

enum class DMDPProvenance { ClosedForm, Quadrature };

/// The constructed D-MDP: control eta, step cost l_D, and the transition
/// kernel represented generatively (sample u ~ pi_tilde(.|eta), apply f) for
/// delta-through-f inputs, or as a quadrature-marginalized density otherwise.
struct DMDPSpec {
    int n_x = 0;
    int n_eta = 0;
    double gamma = 0.9;
    InitialDistribution p0;
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)>
        step_cost;  // l_D(x, eta)
    PolicyFamily family;
    DynamicsFn dynamics;  // underlying f for the generative kernel
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                         const Eigen::VectorXd&)>
        density;  // p_D(x'|x,eta) for explicit-density inputs
    DMDPProvenance provenance = DMDPProvenance::Quadrature;
    int build_order = 10;  // quadrature order baked into quadrature-built maps
};

DMDPSpec build_dmdp(const SMDPSpec& smdp, int quad_order = 20);

/// Max discrepancy over probe states between the S-MDP controlled transition
/// and the D-MDP one, both projected onto grid nodes (smoothed bins). The S
/// side integrates pi_tilde at the given order; the D side uses the D-MDP's
/// own representation.
double verify_transition_equivalence(const SMDPSpec& smdp, const DMDPSpec& dmdp,
                                     const Eigen::VectorXd& theta,
                                     const std::vector<Eigen::VectorXd>& probes,
                                     const GridSpec& grid, int order);

struct ValueEquivalenceReport {
    double max_value_discrepancy = 0.0;
    double j_discrepancy = 0.0;
    double gradient_discrepancy = 0.0;  // inf-norm of FD-gradient difference
    double j_S = 0.0;
    double j_D = 0.0;
};

/// Solves both Bellman equations on the same grid and compares v, J and
/// finite-difference gradients of J in theta.
ValueEquivalenceReport verify_value_equivalence(const SMDPSpec& smdp,
                                                const DMDPSpec& dmdp,
                                                const Eigen::VectorXd& theta,
                                                const GridSpec& grid, int order);

}  // namespace pgeq
