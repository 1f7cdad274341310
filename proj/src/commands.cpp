#include "pgeq/commands.hpp"

#include <cmath>
#include <iomanip>
#include <memory>
#include <sstream>

#include "pgeq/envs.hpp"
#include "pgeq/gradients.hpp"
#include "pgeq/grid.hpp"
#include "pgeq/learn.hpp"
#include "pgeq/report.hpp"
#include "pgeq/transform.hpp"

namespace pgeq {
namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json report_header(const ExperimentConfig& cfg, const std::string& command) {
    json r;
    r["schema_version"] = 1;
    r["command"] = command;
    r["config_hash"] = cfg.config_hash;
    r["master_seed"] = cfg.rollout.master_seed;
    return r;
}

// Deterministic interior probe states spanning the grid box.
std::vector<Eigen::VectorXd> probe_states(const GridSpec& grid, int per_axis) {
    const int dim = static_cast<int>(grid.lo.size());
    const int total = dim == 1 ? per_axis : per_axis * per_axis;
    std::vector<Eigen::VectorXd> probes;
    for (int idx = 0; idx < total; ++idx) {
        Eigen::VectorXd x(dim);
        int rem = idx;
        for (int d = 0; d < dim; ++d) {
            const int i = rem % per_axis;
            rem /= per_axis;
            x[d] = grid.lo[d] +
                   (grid.hi[d] - grid.lo[d]) * (i + 1) / (per_axis + 1);
        }
        probes.push_back(x);
    }
    return probes;
}

SMDPSpec qg_to_smdp(const QGMDP& mdp, const GaussianPolicy& policy) {
    SMDPSpec smdp;
    smdp.n_x = mdp.n_x;
    smdp.n_u = mdp.n_u;
    smdp.n_eta = mdp.n_u;
    smdp.gamma = mdp.gamma;
    smdp.p0 = mdp.p0;
    smdp.step_cost = [mdp](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return mdp.step_cost(x, u);
    };
    smdp.dynamics = mdp.dynamics;
    smdp.family = GaussianFamily{mdp.Sigma};
    smdp.eta_map = policy.mean;
    if (!mdp.extra_cost) {
        smdp.quad_cost = QuadControlCost{mdp.state_cost, mdp.control_cost_lin, mdp.R};
    }
    return smdp;
}

std::string csv_number(double x) {
    std::ostringstream out;
    out << std::setprecision(17) << x;
    return out.str();
}

}  // namespace

CommandResult cmd_equivalence(const ExperimentConfig& cfg) {
    const QGMDP mdp = cfg.mdp();
    const GaussianPolicy policy = cfg.policy();
    const GridSpec& grid = cfg.grid;

    json report = report_header(cfg, "equivalence");
    json checks;
    bool overall = true;

    auto add_check = [&checks, &overall](const std::string& name, bool pass, json details) {
        details["pass"] = pass;
        checks[name] = details;
        overall = overall && pass;
    };

    // Negative control: a non-quadratic control cost must break gradient
    // equality; the remaining checks assume the quadratic form and are skipped.
    if (cfg.equivalence.expect_inequivalence) {
        const GradientBreakdown g_S = exact_gradient(mdp, policy, grid, Mode::S);
        const GradientBreakdown g_D = exact_gradient(mdp, policy, grid, Mode::D);
        const double diff = (g_S.total - g_D.total).cwiseAbs().maxCoeff();
        add_check("gradient_match", diff > 1e-3,
                  {{"discrepancy", diff},
                   {"tolerance", 1e-3},
                   {"expected_inequivalence", true}});
        for (const char* name : {"transition_match", "fisher_identity", "value_offset",
                                 "q_difference", "state_dependent_variant"}) {
            checks[name] = {{"pass", true}, {"skipped", "negative control run"}};
        }
        report["checks"] = checks;
        report["overall_pass"] = overall;
        write_report(cfg.out_dir + "/equivalence_report.json", report);
        write_metadata(cfg.out_dir + "/equivalence_report.json");
        return {overall ? 0 : 1, report};
    }

    // 1. Controlled transitions identical in the S and D views.
    {
        const SMDPSpec smdp = qg_to_smdp(mdp, policy);
        const DMDPSpec dmdp = build_dmdp(smdp);
        const double disc = verify_transition_equivalence(
            smdp, dmdp, policy.theta, probe_states(grid, 5), grid, grid.quad_order);
        add_check("transition_match", disc < 1e-7,
                  {{"discrepancy", disc}, {"tolerance", 1e-7}});
    }

    // 2. Exact policy gradients equal across modes.
    {
        const GradientBreakdown g_S = exact_gradient(mdp, policy, grid, Mode::S);
        const GradientBreakdown g_D = exact_gradient(mdp, policy, grid, Mode::D);
        const double diff = (g_S.total - g_D.total).cwiseAbs().maxCoeff();
        add_check("gradient_match", diff < 1e-6,
                  {{"discrepancy", diff},
                   {"tolerance", 1e-6},
                   {"grad_S", vec_to_json(g_S.total)},
                   {"grad_D", vec_to_json(g_D.total)}});
    }

    // 3. F_S equals the Sigma^-1-metric Fisher; the plain D Fisher differs
    //    whenever Sigma != I.
    {
        RolloutConfig rcfg = cfg.rollout;
        rcfg.n_rollouts = cfg.equivalence.mc_rollouts;
        const std::vector<Trajectory> rollouts = rollout(mdp, policy, rcfg);
        const FisherResult F_S = fisher(mdp, policy, rollouts, FisherKind::S);
        const FisherResult Ft_D = fisher(mdp, policy, rollouts, FisherKind::D_metric);
        const FisherResult F_D = fisher(mdp, policy, rollouts, FisherKind::D);
        const double tol =
            3.0 * std::sqrt(F_S.entry_se.array().square().sum() +
                            Ft_D.entry_se.array().square().sum());
        const double diff = (F_S.matrix - Ft_D.matrix).norm();
        const double d_sep = (F_D.matrix - F_S.matrix).norm();
        const bool sigma_is_identity =
            (mdp.Sigma - Eigen::MatrixXd::Identity(mdp.n_u, mdp.n_u)).norm() < 1e-12;
        const bool d_differs = sigma_is_identity || d_sep > tol;
        add_check("fisher_identity", diff < tol && d_differs,
                  {{"frobenius_discrepancy", diff},
                   {"tolerance_3se", tol},
                   {"fd_separation", d_sep},
                   {"n_rollouts", rcfg.n_rollouts}});
    }

    // 4/5 share one grid solve.
    const GridModel gm(mdp, policy, grid);
    const ValueField v_S = solve_value(gm, policy, Mode::S);
    const ValueField v_D = solve_value(gm, policy, Mode::D);

    // 4. Constant value offset tr(R Sigma)/(1-gamma).
    {
        const double c = (mdp.R * mdp.Sigma).trace() / (1.0 - mdp.gamma);
        const double dev =
            ((v_S.values - v_D.values).array() - c).abs().maxCoeff();
        add_check("value_offset", dev < 1e-6,
                  {{"offset", c}, {"max_deviation", dev}, {"tolerance", 1e-6}});
    }

    // 5. Q_D - Q_S: nonzero always; genuinely state/control dependent on the
    //    nonlinear env.
    {
        const int n_probe = 5;
        double qmin = 0.0, qmax = 0.0;
        bool first = true;
        for (int i = 0; i < n_probe; ++i) {
            Eigen::VectorXd x(mdp.n_x);
            for (int d = 0; d < mdp.n_x; ++d) {
                x[d] = grid.lo[d] + (grid.hi[d] - grid.lo[d]) * (i + 1) / (n_probe + 1);
            }
            for (int j = 0; j < n_probe; ++j) {
                Eigen::VectorXd u = Eigen::VectorXd::Constant(
                    mdp.n_u, -1.0 + 2.0 * j / (n_probe - 1));
                const double qd = q_value(mdp, policy, gm, v_D, x, u) -
                                  q_value(mdp, policy, gm, v_S, x, u);
                if (first || qd < qmin) qmin = qd;
                if (first || qd > qmax) qmax = qd;
                first = false;
            }
        }
        const double spread = qmax - qmin;
        const double max_abs = std::max(std::abs(qmin), std::abs(qmax));
        const double tol = 1e-5;  // 10x the quadrature/grid tolerance scale
        const bool pass = cfg.equivalence.expect_q_spread ? spread > tol : max_abs > tol;
        add_check("q_difference", pass,
                  {{"spread", spread},
                   {"max_abs", max_abs},
                   {"tolerance", tol},
                   {"expect_spread", cfg.equivalence.expect_q_spread}});
    }

    // 6. State-dependent covariances: equivalence survives R(x) = alpha
    //    Sigma(x)^-1, and the constructor gate rejects anything else.
    if (cfg.equivalence.state_dependent_check) {
        const Eigen::MatrixXd M = mdp.R * mdp.Sigma;
        const double alpha = M(0, 0);
        const bool proportional =
            (M - alpha * Eigen::MatrixXd::Identity(mdp.n_u, mdp.n_u)).norm() < 1e-9;
        if (!proportional) {
            checks["state_dependent_variant"] = {
                {"pass", true}, {"skipped", "base R*Sigma not proportional to I"}};
        } else {
            auto scale = [](const Eigen::VectorXd& x) {
                const double t = std::tanh(x[0]);
                return 1.0 + 0.5 * t * t;
            };
            QGMDP variant = mdp;
            const Eigen::MatrixXd Sigma0 = mdp.Sigma;
            const Eigen::MatrixXd R0 = mdp.R;
            variant.Sigma_fn = [Sigma0, scale](const Eigen::VectorXd& x) {
                return (Sigma0 * scale(x)).eval();
            };
            variant.R_fn = [R0, scale](const Eigen::VectorXd& x) {
                return (R0 / scale(x)).eval();
            };
            variant.validate(probe_states(grid, 5));

            bool gate_rejects = false;
            try {
                QGMDP broken = variant;
                broken.R_fn = [R0](const Eigen::VectorXd&) { return R0; };
                broken.validate(probe_states(grid, 5));
            } catch (const std::exception&) {
                gate_rejects = true;
            }

            const GradientBreakdown g_S = exact_gradient(variant, policy, grid, Mode::S);
            const GradientBreakdown g_D = exact_gradient(variant, policy, grid, Mode::D);
            const double diff = (g_S.total - g_D.total).cwiseAbs().maxCoeff();
            add_check("state_dependent_variant", diff < 1e-6 && gate_rejects,
                      {{"discrepancy", diff},
                       {"tolerance", 1e-6},
                       {"gate_rejects_nonproportional", gate_rejects},
                       {"alpha", alpha}});
        }
    } else {
        checks["state_dependent_variant"] = {{"pass", true}, {"skipped", "disabled"}};
    }

    report["checks"] = checks;
    report["overall_pass"] = overall;
    write_report(cfg.out_dir + "/equivalence_report.json", report);
    write_metadata(cfg.out_dir + "/equivalence_report.json");
    return {overall ? 0 : 1, report};
}

CommandResult cmd_gradcheck(const ExperimentConfig& cfg) {
    const QGMDP mdp = cfg.mdp();
    const GaussianPolicy policy = cfg.policy();
    const GridSpec& grid = cfg.grid;

    const GradientBreakdown exact_S = exact_gradient(mdp, policy, grid, Mode::S);
    const GradientBreakdown exact_D = exact_gradient(mdp, policy, grid, Mode::D);
    const Eigen::VectorXd fd = fd_gradient(mdp, policy, grid, Mode::D);

    RolloutConfig rcfg = cfg.rollout;
    rcfg.n_rollouts = cfg.gradcheck.mc_rollouts;
    const std::vector<Trajectory> rollouts = rollout(mdp, policy, rcfg);
    const EstimatorResult mc_S = grad_stochastic(mdp, policy, rollouts);

    auto gm = std::make_shared<const GridModel>(mdp, policy, grid);
    const ValueField field_D = solve_value(*gm, policy, Mode::D);
    const ValueFunctionHandle handle = value_handle_from_grid(gm, field_D);
    const EstimatorResult mc_D =
        grad_deterministic(mdp, policy, handle, rollouts, InnerExpectation::Quadrature,
                           grid.quad_order);

    std::ostringstream csv;
    csv << "component,exact_S,exact_D,fd,mc_S,mc_S_se,mc_D,mc_D_se\n";
    for (Eigen::Index i = 0; i < policy.theta.size(); ++i) {
        csv << i << ',' << csv_number(exact_S.total[i]) << ','
            << csv_number(exact_D.total[i]) << ',' << csv_number(fd[i]) << ','
            << csv_number(mc_S.gradient[i]) << ','
            << csv_number(mc_S.standard_error[i]) << ','
            << csv_number(mc_D.gradient[i]) << ','
            << csv_number(mc_D.standard_error[i]) << '\n';
    }
    write_text_atomic(cfg.out_dir + "/gradcheck.csv", csv.str());

    // Reference for the MC estimators: the analytic gradient when the env has
    // one (the grid gradient carries O(h^2) discretization bias that the tight
    // pathwise standard errors would flag), otherwise the grid gradient.
    Eigen::VectorXd mc_reference = exact_D.total;
    std::string mc_reference_kind = "grid";
    if (cfg.is_lqg) {
        const Eigen::MatrixXd G = lqg_gradient_oracle(cfg.lqg, cfg.Theta0);
        mc_reference.resize(G.size());
        for (Eigen::Index i = 0; i < G.rows(); ++i) {
            for (Eigen::Index k = 0; k < G.cols(); ++k) {
                mc_reference[i * G.cols() + k] = G(i, k);
            }
        }
        mc_reference_kind = "lqg_analytic";
    }

    const double sd_diff = (exact_S.total - exact_D.total).cwiseAbs().maxCoeff();
    const double fd_rel_S =
        (exact_S.total - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    const double fd_rel_D =
        (exact_D.total - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
    bool mc_S_ok = true;
    bool mc_D_ok = true;
    for (Eigen::Index i = 0; i < policy.theta.size(); ++i) {
        mc_S_ok = mc_S_ok && std::abs(mc_S.gradient[i] - mc_reference[i]) <=
                                 3.0 * mc_S.standard_error[i] + 1e-12;
        mc_D_ok = mc_D_ok && std::abs(mc_D.gradient[i] - mc_reference[i]) <=
                                 3.0 * mc_D.standard_error[i] + 1e-12;
    }

    json report = report_header(cfg, "gradcheck");
    report["exact_S"] = vec_to_json(exact_S.total);
    report["exact_D"] = vec_to_json(exact_D.total);
    report["fd"] = vec_to_json(fd);
    report["mc_S"] = vec_to_json(mc_S.gradient);
    report["mc_D"] = vec_to_json(mc_D.gradient);
    report["mc_S_se"] = vec_to_json(mc_S.standard_error);
    report["mc_D_se"] = vec_to_json(mc_D.standard_error);
    report["mc_reference"] = vec_to_json(mc_reference);
    report["mc_reference_kind"] = mc_reference_kind;
    report["checks"] = {
        {"s_vs_d", {{"pass", sd_diff < 1e-6}, {"discrepancy", sd_diff}, {"tolerance", 1e-6}}},
        {"fd_match_S", {{"pass", fd_rel_S < 1e-4}, {"relative_error", fd_rel_S}, {"tolerance", 1e-4}}},
        {"fd_match_D", {{"pass", fd_rel_D < 1e-4}, {"relative_error", fd_rel_D}, {"tolerance", 1e-4}}},
        {"mc_S_within_3se", {{"pass", mc_S_ok}}},
        {"mc_D_within_3se", {{"pass", mc_D_ok}}},
    };
    const bool overall = sd_diff < 1e-6 && fd_rel_S < 1e-4 && fd_rel_D < 1e-4 &&
                         mc_S_ok && mc_D_ok;
    report["overall_pass"] = overall;
    write_report(cfg.out_dir + "/gradcheck_report.json", report);
    write_metadata(cfg.out_dir + "/gradcheck_report.json");
    return {overall ? 0 : 1, report};
}

CommandResult cmd_transform(const ExperimentConfig& cfg) {
    const QGMDP mdp = cfg.mdp();
    const GaussianPolicy policy = cfg.policy();
    const TransformOptions& opt = cfg.transform;

    SMDPSpec smdp = qg_to_smdp(mdp, policy);
    if (opt.family == "gaussian") {
        smdp.family = GaussianFamily{opt.sigma};
    } else {
        smdp.family = opt.mixture;
    }
    if (opt.nonquadratic_amp != 0.0) {
        const double amp = opt.nonquadratic_amp;
        const double freq = opt.nonquadratic_freq;
        smdp.step_cost = [mdp, amp, freq](const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u) {
            return mdp.step_cost(x, u) + amp * std::cos(freq * u[0]);
        };
        smdp.quad_cost.reset();
    }

    std::vector<Eigen::VectorXd> probe_etas;
    for (const auto& x : probe_states(cfg.grid, 3)) {
        probe_etas.push_back(smdp.eta_map(x, policy.theta));
    }
    smdp.validate(probe_etas);
    const DMDPSpec dmdp = build_dmdp(smdp, 20);

    const std::vector<Eigen::VectorXd> probes = probe_states(cfg.grid, opt.n_probes);
    json levels = json::array();
    std::vector<double> trans, value;
    double final_j = 0.0, final_grad = 0.0;
    for (int order : opt.orders) {
        const double t =
            verify_transition_equivalence(smdp, dmdp, policy.theta, probes, cfg.grid, order);
        const ValueEquivalenceReport v =
            verify_value_equivalence(smdp, dmdp, policy.theta, cfg.grid, order);
        trans.push_back(t);
        value.push_back(v.max_value_discrepancy);
        final_j = v.j_discrepancy;
        final_grad = v.gradient_discrepancy;
        levels.push_back({{"order", order},
                          {"transition_discrepancy", t},
                          {"value_discrepancy", v.max_value_discrepancy},
                          {"j_discrepancy", v.j_discrepancy},
                          {"gradient_discrepancy", v.gradient_discrepancy},
                          {"j_S", v.j_S},
                          {"j_D", v.j_D}});
    }

    // Machine-floor slack: monotone decrease is only meaningful above roundoff.
    auto monotone = [](const std::vector<double>& xs) {
        for (std::size_t i = 1; i < xs.size(); ++i) {
            if (xs[i] > xs[i - 1] + 1e-12) return false;
        }
        return true;
    };
    const bool trans_mono = monotone(trans);
    const bool value_mono = monotone(value);
    const bool closed_form = dmdp.provenance == DMDPProvenance::ClosedForm;

    bool overall = trans.back() < 1e-7 && value.back() < 1e-6 && final_j < 1e-5 &&
                   final_grad < 1e-5;
    if (!closed_form) {
        overall = overall && trans_mono && value_mono;
    }
    if (opt.expect_equal_values) {
        // Closed-form route: the offset is absorbed into l_D, so the fields
        // are equal outright at every level.
        for (double v : value) overall = overall && v < 1e-6;
        overall = overall && final_j < 1e-8;
    }

    json report = report_header(cfg, "transform");
    report["family"] = opt.family;
    report["provenance"] = closed_form ? "closed_form" : "quadrature";
    report["levels"] = levels;
    report["transition_monotone"] = trans_mono;
    report["value_monotone"] = value_mono;
    report["overall_pass"] = overall;
    write_report(cfg.out_dir + "/transform_report.json", report);
    write_metadata(cfg.out_dir + "/transform_report.json");
    return {overall ? 0 : 1, report};
}

CommandResult cmd_learn(const ExperimentConfig& cfg) {
    const QGMDP mdp = cfg.mdp();
    const GaussianPolicy policy = cfg.policy();

    json summary = report_header(cfg, "learn");
    json runs;
    bool overall = true;

    for (KKind kind : cfg.learn.kinds) {
        TrainConfig tc;
        tc.iterations = cfg.learn.iterations;
        tc.step_size = cfg.learn.step_size;
        tc.kind = kind;
        tc.rollout_cfg = cfg.rollout;
        tc.eval_rollouts = cfg.learn.eval_rollouts;
        tc.critic_features = polynomial_features(mdp.n_x, cfg.learn.critic_degree);
        tc.use_natural_gradient = cfg.learn.use_natural_gradient;
        const TrainLog log = train(mdp, policy, tc);

        std::ostringstream csv;
        csv << "iteration,J,grad_norm,variance,step\n";
        for (const auto& it : log.iterations) {
            csv << it.iteration << ',' << csv_number(it.performance) << ','
                << csv_number(it.grad_norm) << ',' << csv_number(it.variance_trace)
                << ',' << csv_number(it.step_size) << '\n';
        }
        write_text_atomic(cfg.out_dir + "/learn_" + to_string(kind) + ".csv", csv.str());

        const double initial_j = log.iterations.front().performance;
        const double final_j = log.iterations.back().performance;
        const bool improved =
            !log.aborted && final_j <= (1.0 - cfg.learn.min_improvement) * initial_j;
        json run;
        run["initial_J"] = initial_j;
        run["final_J"] = final_j;
        run["improved"] = improved;
        run["aborted"] = log.aborted;
        run["theta_final"] = vec_to_json(log.theta_final);
        double mean_variance = 0.0;
        for (const auto& it : log.iterations) mean_variance += it.variance_trace;
        run["mean_variance_trace"] =
            mean_variance / static_cast<double>(log.iterations.size());
        bool pass = improved;
        if (cfg.is_lqg && cfg.learn.assert_stationary) {
            const Eigen::MatrixXd Theta_star = lqg_optimal_gain(cfg.lqg);
            Eigen::VectorXd theta_star(Theta_star.size());
            for (Eigen::Index i = 0; i < Theta_star.rows(); ++i) {
                for (Eigen::Index k = 0; k < Theta_star.cols(); ++k) {
                    theta_star[i * Theta_star.cols() + k] = Theta_star(i, k);
                }
            }
            const double dist =
                (log.theta_final - theta_star).cwiseAbs().maxCoeff();
            run["theta_star"] = vec_to_json(theta_star);
            run["theta_distance"] = dist;
            pass = pass && dist < 0.05;
        }
        run["pass"] = pass;
        overall = overall && pass;
        runs[to_string(kind)] = run;
    }

    summary["runs"] = runs;
    summary["overall_pass"] = overall;
    write_report(cfg.out_dir + "/learn_summary.json", summary);
    write_metadata(cfg.out_dir + "/learn_summary.json");
    return {overall ? 0 : 1, summary};
}

}  // namespace pgeq
