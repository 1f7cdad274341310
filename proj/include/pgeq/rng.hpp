#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace pgeq {

// Counter-based random stream: every draw is a pure function of
// (seed, rollout, step, component), so rollouts are bit-identical under
// any parallel schedule.
std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c);

// Uniform draw in (0, 1), never exactly 0 or 1.
double counter_uniform(std::uint64_t seed, std::uint64_t rollout,
                       std::uint64_t step, std::uint64_t component);

// Standard normal draw via inverse CDF of the uniform above.
double counter_normal(std::uint64_t seed, std::uint64_t rollout,
                      std::uint64_t step, std::uint64_t component);

// Vector of iid standard normals, component index doubling as counter.
Eigen::VectorXd counter_normal_vector(std::uint64_t seed, std::uint64_t rollout,
                                      std::uint64_t step, int dim);

// Inverse of the standard normal CDF (Acklam's rational approximation,
// relative error below 1.2e-9).
double inverse_normal_cdf(double p);

}  // namespace pgeq
