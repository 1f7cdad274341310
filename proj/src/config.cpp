#include "pgeq/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "pgeq/report.hpp"

namespace pgeq {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed,
                const std::set<std::string>& required) {
    if (!j.is_object()) {
        throw ConfigError("config section '" + path + "' must be an object");
    }
    for (const auto& item : j.items()) {
        if (allowed.find(item.key()) == allowed.end()) {
            throw ConfigError("unknown config key '" + path + "." + item.key() + "'");
        }
    }
    for (const auto& key : required) {
        if (!j.contains(key)) {
            throw ConfigError("missing required config key '" + path + "." + key + "'");
        }
    }
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ConfigError("config key '" + path + "' must be a number");
    }
    return j.get<double>();
}

int get_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        throw ConfigError("config key '" + path + "' must be an integer");
    }
    return j.get<int>();
}

bool get_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) {
        throw ConfigError("config key '" + path + "' must be a boolean");
    }
    return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) {
        throw ConfigError("config key '" + path + "' must be a string");
    }
    return j.get<std::string>();
}

// Scalars promote to 1-vectors so 1-D configs stay terse.
Eigen::VectorXd get_vector(const json& j, const std::string& path) {
    if (j.is_number()) {
        Eigen::VectorXd v(1);
        v[0] = j.get<double>();
        return v;
    }
    if (!j.is_array()) {
        throw ConfigError("config key '" + path + "' must be a number or array");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = get_number(j[i], path);
    }
    return v;
}

// Scalars promote to 1x1; otherwise array of equal-length rows.
Eigen::MatrixXd get_matrix(const json& j, const std::string& path) {
    if (j.is_number()) {
        Eigen::MatrixXd m(1, 1);
        m(0, 0) = j.get<double>();
        return m;
    }
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw ConfigError("config key '" + path +
                          "' must be a number or an array of rows");
    }
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols) {
            throw ConfigError("config key '" + path + "' has ragged rows");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            m(i, k) = get_number(j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                                 path);
        }
    }
    return m;
}

std::vector<int> get_int_list(const json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ConfigError("config key '" + path + "' must be an array");
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(get_int(j[i], path));
    }
    return out;
}

InitialDistribution parse_p0(const json& j, const std::string& path) {
    check_keys(j, path, {"type", "x", "points", "weights", "mean", "variances"},
               {"type"});
    const std::string type = get_string(j.at("type"), path + ".type");
    if (type == "atom") {
        check_keys(j, path, {"type", "x"}, {"type", "x"});
        return InitialDistribution::atom(get_vector(j.at("x"), path + ".x"));
    }
    if (type == "atoms") {
        check_keys(j, path, {"type", "points", "weights"},
                   {"type", "points", "weights"});
        std::vector<Eigen::VectorXd> points;
        for (std::size_t i = 0; i < j.at("points").size(); ++i) {
            points.push_back(get_vector(j.at("points")[i], path + ".points"));
        }
        const Eigen::VectorXd w = get_vector(j.at("weights"), path + ".weights");
        return InitialDistribution::atoms(
            points, std::vector<double>(w.data(), w.data() + w.size()));
    }
    if (type == "gaussian") {
        check_keys(j, path, {"type", "mean", "variances"},
                   {"type", "mean", "variances"});
        return InitialDistribution::diagonal_gaussian(
            get_vector(j.at("mean"), path + ".mean"),
            get_vector(j.at("variances"), path + ".variances"));
    }
    throw ConfigError("config key '" + path +
                      ".type' must be one of: atom, atoms, gaussian");
}

KKind parse_kind(const std::string& name, const std::string& path) {
    if (name == "KS") return KKind::KS;
    if (name == "KD") return KKind::KD;
    if (name == "KS_baselined") return KKind::KS_baselined;
    if (name == "KD_baselined") return KKind::KD_baselined;
    throw ConfigError("config key '" + path +
                      "' must be one of: KS, KD, KS_baselined, KD_baselined");
}

void parse_env(const json& j, ExperimentConfig& cfg) {
    check_keys(j, "env",
               {"family", "A", "B", "Qx", "r", "R", "Sigma", "gamma", "p0", "a", "b",
                "c", "quartic"},
               {"family", "gamma", "p0"});
    const std::string family = get_string(j.at("family"), "env.family");
    if (family == "lqg") {
        check_keys(j, "env", {"family", "A", "B", "Qx", "r", "R", "Sigma", "gamma", "p0"},
                   {"family", "A", "B", "Qx", "R", "Sigma", "gamma", "p0"});
        cfg.is_lqg = true;
        cfg.lqg.A = get_matrix(j.at("A"), "env.A");
        cfg.lqg.B = get_matrix(j.at("B"), "env.B");
        cfg.lqg.Qx = get_matrix(j.at("Qx"), "env.Qx");
        cfg.lqg.R = get_matrix(j.at("R"), "env.R");
        cfg.lqg.Sigma = get_matrix(j.at("Sigma"), "env.Sigma");
        cfg.lqg.gamma = get_number(j.at("gamma"), "env.gamma");
        cfg.lqg.r = j.contains("r") ? get_vector(j.at("r"), "env.r")
                                    : Eigen::VectorXd::Zero(cfg.lqg.B.cols()).eval();
        cfg.lqg.p0 = parse_p0(j.at("p0"), "env.p0");
    } else if (family == "nl1d") {
        check_keys(j, "env", {"family", "a", "b", "c", "R", "Sigma", "gamma", "quartic", "p0"},
                   {"family", "gamma", "p0"});
        cfg.is_lqg = false;
        if (j.contains("a")) cfg.nl1d.a = get_number(j.at("a"), "env.a");
        if (j.contains("b")) cfg.nl1d.b = get_number(j.at("b"), "env.b");
        if (j.contains("c")) cfg.nl1d.c = get_number(j.at("c"), "env.c");
        if (j.contains("R")) cfg.nl1d.R = get_number(j.at("R"), "env.R");
        if (j.contains("Sigma")) cfg.nl1d.Sigma = get_number(j.at("Sigma"), "env.Sigma");
        cfg.nl1d.gamma = get_number(j.at("gamma"), "env.gamma");
        if (j.contains("quartic")) {
            cfg.nl1d.quartic = get_number(j.at("quartic"), "env.quartic");
        }
        cfg.nl1d.p0 = parse_p0(j.at("p0"), "env.p0");
    } else {
        throw ConfigError("config key 'env.family' must be one of: lqg, nl1d");
    }
}

void parse_transform_section(const json& j, TransformOptions& opt) {
    check_keys(j, "transform",
               {"family", "sigma", "components", "nonquadratic_amp",
                "nonquadratic_freq", "orders", "expect_equal_values", "n_probes"},
               {"family"});
    opt.family = get_string(j.at("family"), "transform.family");
    if (opt.family == "gaussian") {
        if (!j.contains("sigma")) {
            throw ConfigError("missing required config key 'transform.sigma'");
        }
        opt.sigma = get_matrix(j.at("sigma"), "transform.sigma");
    } else if (opt.family == "mixture") {
        if (!j.contains("components")) {
            throw ConfigError("missing required config key 'transform.components'");
        }
        for (std::size_t i = 0; i < j.at("components").size(); ++i) {
            const json& cj = j.at("components")[i];
            const std::string path = "transform.components";
            check_keys(cj, path, {"weight", "mean_offset", "cov"},
                       {"weight", "mean_offset", "cov"});
            MixtureComponent comp;
            comp.weight = get_number(cj.at("weight"), path + ".weight");
            comp.mean_offset = get_vector(cj.at("mean_offset"), path + ".mean_offset");
            comp.cov = get_matrix(cj.at("cov"), path + ".cov");
            opt.mixture.components.push_back(comp);
        }
    } else {
        throw ConfigError("config key 'transform.family' must be one of: gaussian, mixture");
    }
    if (j.contains("nonquadratic_amp")) {
        opt.nonquadratic_amp = get_number(j.at("nonquadratic_amp"), "transform.nonquadratic_amp");
    }
    if (j.contains("nonquadratic_freq")) {
        opt.nonquadratic_freq = get_number(j.at("nonquadratic_freq"), "transform.nonquadratic_freq");
    }
    if (j.contains("orders")) {
        opt.orders = get_int_list(j.at("orders"), "transform.orders");
        if (opt.orders.size() != 3) {
            throw ConfigError("config key 'transform.orders' must list 3 levels");
        }
    }
    if (j.contains("expect_equal_values")) {
        opt.expect_equal_values = get_bool(j.at("expect_equal_values"), "transform.expect_equal_values");
    }
    if (j.contains("n_probes")) {
        opt.n_probes = get_int(j.at("n_probes"), "transform.n_probes");
    }
}

}  // namespace

QGMDP ExperimentConfig::mdp() const {
    return is_lqg ? to_qgmdp(lqg) : to_qgmdp(nl1d);
}

GaussianPolicy ExperimentConfig::policy() const {
    const int n_x = is_lqg ? lqg.n_x() : 1;
    const int n_u = is_lqg ? lqg.n_u() : 1;
    if (Theta0.rows() != n_u || Theta0.cols() != n_x) {
        throw ConfigError("policy.Theta has wrong shape for the env");
    }
    return linear_state_policy(n_x, n_u, Theta0);
}

ExperimentConfig parse_config(const nlohmann::json& j) {
    check_keys(j, "config",
               {"env", "policy", "rollout", "grid", "equivalence", "gradcheck",
                "transform", "learn", "output"},
               {"env", "policy"});
    ExperimentConfig cfg;
    parse_env(j.at("env"), cfg);

    const json& pj = j.at("policy");
    check_keys(pj, "policy", {"type", "Theta"}, {"type", "Theta"});
    if (get_string(pj.at("type"), "policy.type") != "linear_state") {
        throw ConfigError("config key 'policy.type' must be: linear_state");
    }
    cfg.Theta0 = get_matrix(pj.at("Theta"), "policy.Theta");

    if (j.contains("rollout")) {
        const json& rj = j.at("rollout");
        check_keys(rj, "rollout", {"horizon", "n_rollouts", "master_seed", "n_jobs"}, {});
        if (rj.contains("horizon")) cfg.rollout.horizon = get_int(rj.at("horizon"), "rollout.horizon");
        if (rj.contains("n_rollouts")) cfg.rollout.n_rollouts = get_int(rj.at("n_rollouts"), "rollout.n_rollouts");
        if (rj.contains("master_seed")) {
            if (!rj.at("master_seed").is_number_unsigned() &&
                !rj.at("master_seed").is_number_integer()) {
                throw ConfigError("config key 'rollout.master_seed' must be an integer");
            }
            cfg.rollout.master_seed = rj.at("master_seed").get<std::uint64_t>();
        }
        if (rj.contains("n_jobs")) cfg.rollout.n_jobs = get_int(rj.at("n_jobs"), "rollout.n_jobs");
    }

    if (j.contains("grid")) {
        const json& gj = j.at("grid");
        check_keys(gj, "grid", {"lo", "hi", "nodes", "quadrature_order"},
                   {"lo", "hi", "nodes"});
        cfg.grid.lo = get_vector(gj.at("lo"), "grid.lo");
        cfg.grid.hi = get_vector(gj.at("hi"), "grid.hi");
        cfg.grid.nodes_per_axis = get_int_list(gj.at("nodes"), "grid.nodes");
        if (gj.contains("quadrature_order")) {
            cfg.grid.quad_order = get_int(gj.at("quadrature_order"), "grid.quadrature_order");
        }
    }

    if (j.contains("equivalence")) {
        const json& ej = j.at("equivalence");
        check_keys(ej, "equivalence",
                   {"expect_inequivalence", "expect_q_spread", "state_dependent_check",
                    "mc_rollouts"},
                   {});
        if (ej.contains("expect_inequivalence")) {
            cfg.equivalence.expect_inequivalence =
                get_bool(ej.at("expect_inequivalence"), "equivalence.expect_inequivalence");
        }
        if (ej.contains("expect_q_spread")) {
            cfg.equivalence.expect_q_spread =
                get_bool(ej.at("expect_q_spread"), "equivalence.expect_q_spread");
        }
        if (ej.contains("state_dependent_check")) {
            cfg.equivalence.state_dependent_check =
                get_bool(ej.at("state_dependent_check"), "equivalence.state_dependent_check");
        }
        if (ej.contains("mc_rollouts")) {
            cfg.equivalence.mc_rollouts = get_int(ej.at("mc_rollouts"), "equivalence.mc_rollouts");
        }
    }

    if (j.contains("gradcheck")) {
        const json& gj = j.at("gradcheck");
        check_keys(gj, "gradcheck", {"mc_rollouts"}, {});
        if (gj.contains("mc_rollouts")) {
            cfg.gradcheck.mc_rollouts = get_int(gj.at("mc_rollouts"), "gradcheck.mc_rollouts");
        }
    }

    if (j.contains("transform")) {
        parse_transform_section(j.at("transform"), cfg.transform);
    }

    if (j.contains("learn")) {
        const json& lj = j.at("learn");
        check_keys(lj, "learn",
                   {"iterations", "step_size", "kinds", "critic_degree",
                    "eval_rollouts", "use_natural_gradient", "assert_stationary",
                    "min_improvement"},
                   {});
        if (lj.contains("iterations")) cfg.learn.iterations = get_int(lj.at("iterations"), "learn.iterations");
        if (lj.contains("step_size")) cfg.learn.step_size = get_number(lj.at("step_size"), "learn.step_size");
        if (lj.contains("kinds")) {
            cfg.learn.kinds.clear();
            for (std::size_t i = 0; i < lj.at("kinds").size(); ++i) {
                cfg.learn.kinds.push_back(
                    parse_kind(get_string(lj.at("kinds")[i], "learn.kinds"), "learn.kinds"));
            }
        }
        if (lj.contains("critic_degree")) cfg.learn.critic_degree = get_int(lj.at("critic_degree"), "learn.critic_degree");
        if (lj.contains("eval_rollouts")) cfg.learn.eval_rollouts = get_int(lj.at("eval_rollouts"), "learn.eval_rollouts");
        if (lj.contains("use_natural_gradient")) {
            cfg.learn.use_natural_gradient =
                get_bool(lj.at("use_natural_gradient"), "learn.use_natural_gradient");
        }
        if (lj.contains("assert_stationary")) {
            cfg.learn.assert_stationary =
                get_bool(lj.at("assert_stationary"), "learn.assert_stationary");
        }
        if (lj.contains("min_improvement")) {
            cfg.learn.min_improvement =
                get_number(lj.at("min_improvement"), "learn.min_improvement");
        }
    }

    if (j.contains("output")) {
        const json& oj = j.at("output");
        check_keys(oj, "output", {"dir"}, {"dir"});
        cfg.out_dir = get_string(oj.at("dir"), "output.dir");
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg = parse_config(j);
    cfg.config_hash = fnv1a_hash(bytes);
    return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& overrides) {
    if (overrides.seed) cfg.rollout.master_seed = *overrides.seed;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.quadrature_order) cfg.grid.quad_order = *overrides.quadrature_order;
    if (overrides.jobs) cfg.rollout.n_jobs = *overrides.jobs;
}

}  // namespace pgeq
