#pragma once

#include <json.hpp>

#include "pgeq/config.hpp"

namespace pgeq {

struct CommandResult {
    int exit_code = 0;  // 0 all checks pass, 1 check failures
    nlohmann::json report;
};

/// The six summary equivalence checks on a quadratic-control-cost env.
CommandResult cmd_equivalence(const ExperimentConfig& cfg);

/// Exact gradients (both modes), FD oracle, MC estimators; emits CSV + JSON.
CommandResult cmd_gradcheck(const ExperimentConfig& cfg);

/// Builds the D-MDP and certifies transition/value equivalence at three
/// refinement levels.
CommandResult cmd_transform(const ExperimentConfig& cfg);

/// Actor-critic training runs, one per estimator kind; CSV logs + summary.
CommandResult cmd_learn(const ExperimentConfig& cfg);

}  // namespace pgeq
