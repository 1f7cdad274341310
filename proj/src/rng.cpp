#include "pgeq/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace pgeq {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30u)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27u)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31u);
}

}  // namespace

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c) {
    std::uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ (a * 0xd1342543de82ef95ull));
    s = splitmix64(s ^ (b * 0xaf251af3b0f025b5ull));
    s = splitmix64(s ^ (c * 0x9e6c63d0876a9a47ull));
    return s;
}

double counter_uniform(std::uint64_t seed, std::uint64_t rollout,
                       std::uint64_t step, std::uint64_t component) {
    const std::uint64_t h = counter_hash(seed, rollout, step, component);
    // 53-bit mantissa, offset by half a ulp to stay strictly inside (0,1).
    return (static_cast<double>(h >> 11u) + 0.5) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t rollout,
                      std::uint64_t step, std::uint64_t component) {
    return inverse_normal_cdf(counter_uniform(seed, rollout, step, component));
}

Eigen::VectorXd counter_normal_vector(std::uint64_t seed, std::uint64_t rollout,
                                      std::uint64_t step, int dim) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) {
        z[i] = counter_normal(seed, rollout, step, static_cast<std::uint64_t>(i));
    }
    return z;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("inverse_normal_cdf: p must be in (0,1)");
    }
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r, x;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        q = p - 0.5;
        r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    return x;
}

}  // namespace pgeq
