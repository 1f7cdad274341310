// End-to-end acceptance gate: one PASS/FAIL line per criterion, nonzero exit
// if any criterion fails. Runs the bundled configs through the command layer
// plus a few direct library checks.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgeq/commands.hpp"
#include "pgeq/config.hpp"
#include "pgeq/envs.hpp"
#include "pgeq/gauss.hpp"
#include "pgeq/learn.hpp"
#include "pgeq/quadrature.hpp"

using namespace pgeq;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int index, bool pass, const std::string& description) {
    std::printf("[%2d] %s  %s\n", index, pass ? "PASS" : "FAIL", description.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

ExperimentConfig load(const std::string& name, const std::string& tag) {
    ExperimentConfig cfg = load_config(std::string(PGEQ_CONFIG_DIR) + "/" + name);
    const fs::path dir = fs::temp_directory_path() / ("pgeq_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    cfg.out_dir = dir.string();
    return cfg;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

bool check_passed(const json& report, const std::string& name) {
    return report.at("checks").at(name).at("pass").get<bool>();
}

}  // namespace

int main() {
    // 1. Exact, finite-difference and Monte-Carlo gradients agree in both
    //    modes on the linear and nonlinear benchmarks.
    {
        bool ok = true;
        ok = ok && cmd_gradcheck(load("lqg-1d.json", "g1")).exit_code == 0;
        ok = ok && cmd_gradcheck(load("lqg-2d.json", "g2")).exit_code == 0;
        ok = ok && cmd_gradcheck(load("nl1d.json", "g3")).exit_code == 0;
        verdict(1, ok, "gradient cross-validation (exact vs FD vs MC, both modes)");
    }

    // Shared equivalence runs for criteria 2-4.
    const CommandResult eq1 = cmd_equivalence(load("lqg-1d.json", "e1"));
    const CommandResult eq2 = cmd_equivalence(load("lqg-2d.json", "e2"));
    const CommandResult eqn = cmd_equivalence(load("nl1d.json", "en"));

    // 2. Value functions differ by the constant tr(R Sigma)/(1-gamma).
    {
        bool ok = check_passed(eq1.report, "value_offset") &&
                  check_passed(eq2.report, "value_offset") &&
                  check_passed(eqn.report, "value_offset");
        const double offset =
            eq1.report.at("checks").at("value_offset").at("offset").get<double>();
        ok = ok && std::abs(offset - 0.04) < 1e-12;  // 0.1 * 0.04 / (1 - 0.9)
        verdict(2, ok, "constant value offset tr(R Sigma)/(1-gamma)");
    }

    // 3. Score-based Fisher equals the Sigma-weighted pullback metric while
    //    the unweighted pullback stays distinct.
    verdict(3,
            check_passed(eq1.report, "fisher_identity") &&
                check_passed(eq2.report, "fisher_identity"),
            "Fisher identity F_S = Ftilde_D with F_D distinct");

    // 4. Q-function difference is genuinely state/control dependent on the
    //    nonlinear env while every gradient-level check still passes.
    verdict(4,
            eqn.exit_code == 0 && check_passed(eqn.report, "q_difference") &&
                check_passed(eqn.report, "gradient_match"),
            "state-dependent Q-difference on the nonlinear benchmark");

    // 5. Negative control: a quartic control cost breaks the gradient match.
    verdict(5, cmd_equivalence(load("nl1d-quartic.json", "neg")).exit_code == 0,
            "negative control: quartic control cost breaks equivalence");

    // 6. Transform certification for Gaussian and mixture policy families
    //    with a non-quadratic control cost (quadrature route).
    {
        const bool ok = cmd_transform(load("gaussian.json", "tg")).exit_code == 0 &&
                        cmd_transform(load("mixture.json", "tm")).exit_code == 0;
        verdict(6, ok, "transform certification: Gaussian and mixture families");
    }

    // 7. Quadratic-Gaussian special case: closed-form transformed cost gives
    //    equal value functions at every refinement level.
    verdict(7, cmd_transform(load("qg-special-case.json", "tq")).exit_code == 0,
            "quadratic special case yields equal value functions");

    // 8. Gaussian integration-by-parts residual vanishes on polynomials.
    {
        Eigen::MatrixXd Sigma(1, 1);
        Sigma << 0.25;
        Eigen::VectorXd mu(1);
        mu << 0.3;
        const QuadratureRule rule = make_quadrature(1, 10, Sigma);
        bool ok = true;
        for (int deg = 0; deg <= 5; ++deg) {
            const double res = stein_residual(
                [deg](const Eigen::VectorXd& y) { return std::pow(y[0], deg); }, mu,
                Sigma, rule);
            ok = ok && res < 1e-6;
        }
        verdict(8, ok, "integration-by-parts residual vanishes on polynomials");
    }

    // 9. The four inner K estimators share a mean and baselining reduces
    //    variance, using the exact quadratic value function as critic.
    {
        LQGEnv env;
        env.A = Eigen::MatrixXd::Constant(1, 1, 0.9);
        env.B = Eigen::MatrixXd::Constant(1, 1, 0.5);
        env.Qx = Eigen::MatrixXd::Constant(1, 1, 1.0);
        env.r = Eigen::VectorXd::Zero(1);
        env.R = Eigen::MatrixXd::Constant(1, 1, 0.1);
        env.Sigma = Eigen::MatrixXd::Constant(1, 1, 0.04);
        env.gamma = 0.9;
        env.p0 = InitialDistribution::diagonal_gaussian(
            Eigen::VectorXd::Zero(1), 0.25 * Eigen::VectorXd::Ones(1));
        const QGMDP mdp = to_qgmdp(env);
        const GaussianPolicy policy =
            linear_state_policy(1, 1, Eigen::MatrixXd::Constant(1, 1, -0.5));
        RolloutConfig rc;
        rc.horizon = 120;
        rc.n_rollouts = 4000;
        rc.master_seed = 2024;
        rc.n_jobs = 4;
        const auto trajs = rollout(mdp, policy, rc);

        const LQGValue v =
            lqg_value_oracle(env, Eigen::MatrixXd::Constant(1, 1, -0.5), Mode::D);
        Critic critic;
        critic.features = polynomial_features(1, 2);
        critic.omega = Eigen::VectorXd(3);
        critic.omega << v.k, v.b[0], v.P(0, 0);

        const double truth =
            lqg_gradient_oracle(env, Eigen::MatrixXd::Constant(1, 1, -0.5))(0, 0);
        bool ok = true;
        double var_ks = 0.0, var_ks_base = 0.0;
        for (KKind kind :
             {KKind::KS, KKind::KD, KKind::KS_baselined, KKind::KD_baselined}) {
            const EstimatorResult res =
                policy_gradient_from_k(trajs, critic, mdp, policy, kind);
            ok = ok && std::abs(res.gradient[0] - truth) <
                           3.0 * res.standard_error[0] + 0.01 * std::abs(truth);
            if (kind == KKind::KS) var_ks = res.variance_trace;
            if (kind == KKind::KS_baselined) var_ks_base = res.variance_trace;
        }
        ok = ok && var_ks_base < var_ks;
        verdict(9, ok, "K estimators agree in mean; baselining reduces variance");
    }

    // 10. Actor-critic training improves performance with every estimator
    //     kind and lands near the optimal gain.
    verdict(10, cmd_learn(load("lqg-train.json", "learn")).exit_code == 0,
            "training improves J and reaches the optimal gain");

    // 11. Reports are byte-identical across reruns and worker counts.
    {
        ExperimentConfig cfg = load("lqg-1d.json", "det1");
        cfg.gradcheck.mc_rollouts = 500;
        cfg.rollout.n_rollouts = 500;
        bool ok = cmd_gradcheck(cfg).exit_code == 0;
        const std::string first = read_bytes(cfg.out_dir + "/gradcheck_report.json");

        ExperimentConfig rerun = load("lqg-1d.json", "det2");
        rerun.gradcheck.mc_rollouts = 500;
        rerun.rollout.n_rollouts = 500;
        rerun.rollout.n_jobs = 4;
        ok = ok && cmd_gradcheck(rerun).exit_code == 0;
        const std::string second = read_bytes(rerun.out_dir + "/gradcheck_report.json");
        ok = ok && !first.empty() && first == second;
        verdict(11, ok, "byte-identical reports across reruns and worker counts");
    }

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all 11 criteria passed\n");
    return 0;
}
