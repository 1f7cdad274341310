#include <cstdint>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pgeq/commands.hpp"
#include "pgeq/config.hpp"

namespace {

struct Args {
    std::string config_path;
    pgeq::CliOverrides overrides;
};

void add_common_flags(CLI::App* cmd, Args& args) {
    cmd->add_option("--config", args.config_path, "Experiment config file (JSON)")
        ->required();
    cmd->add_option("--seed", [&args](const CLI::results_t& res) {
        args.overrides.seed = std::stoull(res[0]);
        return true;
    }, "Master seed override");
    cmd->add_option("--out", [&args](const CLI::results_t& res) {
        args.overrides.out_dir = res[0];
        return true;
    }, "Output directory override");
    cmd->add_option("--quadrature-order", [&args](const CLI::results_t& res) {
        args.overrides.quadrature_order = std::stoi(res[0]);
        return true;
    }, "Quadrature order override");
    cmd->add_option("--jobs", [&args](const CLI::results_t& res) {
        args.overrides.jobs = std::stoi(res[0]);
        return true;
    }, "Worker count override");
}

int run(const Args& args,
        const std::function<pgeq::CommandResult(const pgeq::ExperimentConfig&)>& fn) {
    pgeq::ExperimentConfig cfg = pgeq::load_config(args.config_path);
    pgeq::apply_overrides(cfg, args.overrides);
    const pgeq::CommandResult result = fn(cfg);
    std::cout << (result.exit_code == 0 ? "PASS" : "FAIL") << " ("
              << result.report.at("command").get<std::string>() << ")\n";
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Policy-gradient equivalence laboratory"};
    app.require_subcommand(1);

    Args args;
    CLI::App* equivalence =
        app.add_subcommand("equivalence", "Run the six equivalence checks");
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "Exact/FD/Monte-Carlo gradient comparison");
    CLI::App* transform =
        app.add_subcommand("transform", "S-MDP to D-MDP construction and certification");
    CLI::App* learn = app.add_subcommand("learn", "Actor-critic training runs");
    for (CLI::App* cmd : {equivalence, gradcheck, transform, learn}) {
        add_common_flags(cmd, args);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (equivalence->parsed()) return run(args, pgeq::cmd_equivalence);
        if (gradcheck->parsed()) return run(args, pgeq::cmd_gradcheck);
        if (transform->parsed()) return run(args, pgeq::cmd_transform);
        if (learn->parsed()) return run(args, pgeq::cmd_learn);
    } catch (const pgeq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
