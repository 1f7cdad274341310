#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pgeq/envs.hpp"
#include "pgeq/grid.hpp"
#include "pgeq/learn.hpp"
#include "pgeq/mdp.hpp"
#include "pgeq/transform.hpp"

namespace pgeq {

/// Schema violations; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EquivalenceOptions {
    bool expect_inequivalence = false;  // negative control: assert breakage
    bool expect_q_spread = true;        // Q_D - Q_S genuinely state-dependent
    bool state_dependent_check = true;  // run the R(x) = alpha Sigma(x)^-1 variant
    int mc_rollouts = 20000;            // Fisher Monte-Carlo budget
};

struct GradcheckOptions {
    int mc_rollouts = 20000;
};

struct TransformOptions {
    std::string family = "gaussian";  // "gaussian" | "mixture"
    Eigen::MatrixXd sigma;            // Gaussian pi_tilde covariance
    MixtureFamily mixture;
    // Non-quadratic control-cost term amp*cos(freq*u_1) added to l_S; zero
    // keeps l_S quadratic so the closed-form route applies.
    double nonquadratic_amp = 0.0;
    double nonquadratic_freq = 3.0;
    std::vector<int> orders = {4, 7, 10};  // refinement levels
    bool expect_equal_values = false;      // closed-form route: values EQUAL
    int n_probes = 5;
};

struct LearnOptions {
    int iterations = 50;
    double step_size = 0.05;
    std::vector<KKind> kinds = {KKind::KS, KKind::KD, KKind::KS_baselined,
                                KKind::KD_baselined};
    int critic_degree = 2;
    int eval_rollouts = 256;
    bool use_natural_gradient = false;
    bool assert_stationary = false;  // final theta near the Riccati gain (LQG)
    double min_improvement = 0.2;    // required relative drop in J
};

struct ExperimentConfig {
    bool is_lqg = false;
    LQGEnv lqg;
    NL1DEnv nl1d;
    Eigen::MatrixXd Theta0;  // linear-in-state policy gain
    RolloutConfig rollout;
    GridSpec grid;
    EquivalenceOptions equivalence;
    GradcheckOptions gradcheck;
    TransformOptions transform;
    LearnOptions learn;
    std::string out_dir = ".";
    std::uint64_t config_hash = 0;  // FNV-1a of the config file bytes

    QGMDP mdp() const;
    GaussianPolicy policy() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> quadrature_order;
    std::optional<int> jobs;
};

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& overrides);

}  // namespace pgeq
