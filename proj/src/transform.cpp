#include "pgeq/transform.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "pgeq/gauss.hpp"

namespace pgeq {
namespace {

constexpr double kPi = 3.14159265358979323846;

void validate_family(const PolicyFamily& family) {
    if (const auto* mix = std::get_if<MixtureFamily>(&family)) {
        if (mix->components.empty()) {
            throw std::invalid_argument(
                "pi_tilde family invalid; supported families: Gaussian with fixed "
                "covariance, mixture of Gaussians with fixed weights/covariances");
        }
        double total = 0.0;
        for (const auto& c : mix->components) {
            if (c.weight < 0.0) {
                throw std::invalid_argument("mixture weights must be nonnegative");
            }
            Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
            if (llt.info() != Eigen::Success) {
                throw std::invalid_argument("mixture component covariance not SPD");
            }
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw std::invalid_argument("mixture weights must sum to 1");
        }
    } else {
        const auto& g = std::get<GaussianFamily>(family);
        Eigen::LLT<Eigen::MatrixXd> llt(g.Sigma);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument(
                "pi_tilde family invalid; supported families: Gaussian with fixed "
                "covariance, mixture of Gaussians with fixed weights/covariances");
        }
    }
}

double gaussian_pdf(const Eigen::VectorXd& u, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov) {
    const Eigen::Index n = u.size();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::VectorXd d = u - mean;
    const double quad = d.dot(llt.solve(d));
    double logdet = 0.0;
    const Eigen::MatrixXd L = llt.matrixL();
    for (Eigen::Index i = 0; i < n; ++i) {
        logdet += 2.0 * std::log(L(i, i));
    }
    return std::exp(-0.5 * quad - 0.5 * logdet -
                    0.5 * static_cast<double>(n) * std::log(2.0 * kPi));
}

// Composite-Simpson integral of the family density over a wide box.
double simpson_mass(const PolicyFamily& family, const Eigen::VectorXd& eta) {
    double sigma_max = 0.0;
    double offset_max = 0.0;
    if (const auto* mix = std::get_if<MixtureFamily>(&family)) {
        for (const auto& c : mix->components) {
            sigma_max = std::max(sigma_max, std::sqrt(c.cov.diagonal().maxCoeff()));
            offset_max = std::max(offset_max, c.mean_offset.cwiseAbs().maxCoeff());
        }
    } else {
        sigma_max =
            std::sqrt(std::get<GaussianFamily>(family).Sigma.diagonal().maxCoeff());
    }
    const double half = offset_max + 10.0 * sigma_max;
    const Eigen::Index dim = eta.size();
    const int n = dim == 1 ? 20000 : 800;  // even panel counts
    const double h = 2.0 * half / n;
    auto weight1d = [n](int i) {
        if (i == 0 || i == n) return 1.0;
        return (i % 2 == 1) ? 4.0 : 2.0;
    };
    double mass = 0.0;
    if (dim == 1) {
        Eigen::VectorXd u(1);
        for (int i = 0; i <= n; ++i) {
            u[0] = eta[0] - half + h * i;
            mass += weight1d(i) * family_density(family, eta, u);
        }
        return mass * h / 3.0;
    }
    if (dim != 2) {
        throw std::invalid_argument("family normalization check supports dim <= 2");
    }
    Eigen::VectorXd u(2);
    for (int i = 0; i <= n; ++i) {
        u[0] = eta[0] - half + h * i;
        for (int j = 0; j <= n; ++j) {
            u[1] = eta[1] - half + h * j;
            mass += weight1d(i) * weight1d(j) * family_density(family, eta, u);
        }
    }
    return mass * h * h / 9.0;
}

}  // namespace

QuadratureRule family_control_quadrature(const PolicyFamily& family,
                                         const Eigen::VectorXd& eta, int order) {
    const int dim = static_cast<int>(eta.size());
    const QuadratureRule standard = make_standard_quadrature(dim, order);
    if (const auto* mix = std::get_if<MixtureFamily>(&family)) {
        QuadratureRule rule;
        rule.dim = dim;
        rule.order = order;
        std::vector<double> weights;
        for (const auto& c : mix->components) {
            const QuadratureRule comp = shift_quadrature(
                transform_quadrature(standard, c.cov), eta + c.mean_offset);
            for (std::size_t i = 0; i < comp.nodes.size(); ++i) {
                rule.nodes.push_back(comp.nodes[i]);
                weights.push_back(c.weight * comp.weights[static_cast<Eigen::Index>(i)]);
            }
        }
        rule.weights = Eigen::Map<Eigen::VectorXd>(weights.data(),
                                                   static_cast<Eigen::Index>(weights.size()));
        return rule;
    }
    const auto& g = std::get<GaussianFamily>(family);
    return shift_quadrature(transform_quadrature(standard, g.Sigma), eta);
}

double family_density(const PolicyFamily& family, const Eigen::VectorXd& eta,
                      const Eigen::VectorXd& u) {
    if (const auto* mix = std::get_if<MixtureFamily>(&family)) {
        double p = 0.0;
        for (const auto& c : mix->components) {
            p += c.weight * gaussian_pdf(u, eta + c.mean_offset, c.cov);
        }
        return p;
    }
    return gaussian_pdf(u, eta, std::get<GaussianFamily>(family).Sigma);
}

double family_normalization_defect(const PolicyFamily& family,
                                   const Eigen::VectorXd& eta) {
    return std::abs(simpson_mass(family, eta) - 1.0);
}

void SMDPSpec::validate(const std::vector<Eigen::VectorXd>& probe_etas) const {
    validate_family(family);
    if (!dynamics && !density) {
        throw std::invalid_argument("SMDPSpec: need delta-through-f dynamics or an "
                                    "explicit transition density");
    }
    for (const auto& eta : probe_etas) {
        if (family_normalization_defect(family, eta) > 1e-9) {
            throw std::invalid_argument("SMDPSpec: pi_tilde does not integrate to 1");
        }
    }
}

DMDPSpec build_dmdp(const SMDPSpec& smdp, int quad_order) {
    validate_family(smdp.family);
    DMDPSpec dmdp;
    dmdp.n_x = smdp.n_x;
    dmdp.n_eta = smdp.n_eta;
    dmdp.gamma = smdp.gamma;
    dmdp.p0 = smdp.p0;
    dmdp.family = smdp.family;
    dmdp.dynamics = smdp.dynamics;
    dmdp.build_order = quad_order;

    if (smdp.quad_cost.has_value()) {
        // Closed-form l_D for (mixtures of) Gaussians over a quadratic cost.
        const QuadControlCost qc = *smdp.quad_cost;
        const PolicyFamily family = smdp.family;
        dmdp.provenance = DMDPProvenance::ClosedForm;
        dmdp.step_cost = [qc, family](const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& eta) {
            if (const auto* mix = std::get_if<MixtureFamily>(&family)) {
                double cost = 0.0;
                for (const auto& c : mix->components) {
                    const Eigen::VectorXd m = eta + c.mean_offset;
                    cost += c.weight * expected_quadratic_cost(qc.q(x), qc.r(x), qc.R,
                                                               m, c.cov);
                }
                return cost;
            }
            const auto& g = std::get<GaussianFamily>(family);
            return expected_quadratic_cost(qc.q(x), qc.r(x), qc.R, eta, g.Sigma);
        };
    } else {
        const PolicyFamily family = smdp.family;
        const ExtraCostFn cost_S = smdp.step_cost;
        const int order = quad_order;
        dmdp.provenance = DMDPProvenance::Quadrature;
        dmdp.step_cost = [family, cost_S, order](const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& eta) {
            const QuadratureRule rule = family_control_quadrature(family, eta, order);
            double cost = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                cost += rule.weights[static_cast<Eigen::Index>(i)] *
                        cost_S(x, rule.nodes[i]);
            }
            return cost;
        };
    }

    if (smdp.density) {
        const auto p_S = smdp.density;
        const PolicyFamily family = smdp.family;
        const int order = quad_order;
        dmdp.density = [p_S, family, order](const Eigen::VectorXd& xnext,
                                            const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& eta) {
            const QuadratureRule rule = family_control_quadrature(family, eta, order);
            double p = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                p += rule.weights[static_cast<Eigen::Index>(i)] *
                     p_S(xnext, x, rule.nodes[i]);
            }
            return p;
        };
    }
    return dmdp;
}

namespace {

// Smooth test bumps standing in for x'-bins: Gaussian kernels on a coarse set
// of centers spanning the grid.
struct TestBumps {
    std::vector<Eigen::VectorXd> centers;
    double width = 1.0;

    double eval(std::size_t k, const Eigen::VectorXd& x) const {
        return std::exp(-0.5 * (x - centers[k]).squaredNorm() / (width * width));
    }
};

TestBumps make_bumps(const GridSpec& grid) {
    TestBumps bumps;
    const int dim = static_cast<int>(grid.lo.size());
    const int per_axis = 9;
    bumps.width = (grid.hi - grid.lo).maxCoeff() / 8.0;
    const int total = dim == 1 ? per_axis : per_axis * per_axis;
    for (int idx = 0; idx < total; ++idx) {
        Eigen::VectorXd c(dim);
        int rem = idx;
        for (int d = 0; d < dim; ++d) {
            const int i = rem % per_axis;
            rem /= per_axis;
            c[d] = grid.lo[d] + (grid.hi[d] - grid.lo[d]) * i / (per_axis - 1);
        }
        bumps.centers.push_back(c);
    }
    return bumps;
}

// Bump projections of the pushforward of a control quadrature through f.
Eigen::VectorXd project_pushforward(const DynamicsFn& f, const Eigen::VectorXd& x,
                                    const QuadratureRule& rule, const TestBumps& bumps) {
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(bumps.centers.size()));
    for (std::size_t qi = 0; qi < rule.nodes.size(); ++qi) {
        const Eigen::VectorXd y = f(x, rule.nodes[qi]);
        for (std::size_t k = 0; k < bumps.centers.size(); ++k) {
            proj[static_cast<Eigen::Index>(k)] +=
                rule.weights[static_cast<Eigen::Index>(qi)] * bumps.eval(k, y);
        }
    }
    return proj;
}

// Bump projections of an explicit density, integrated on the grid nodes.
Eigen::VectorXd project_density(
    const std::function<double(const Eigen::VectorXd&)>& density,
    const GridSpec& grid, const TestBumps& bumps) {
    const int dim = static_cast<int>(grid.lo.size());
    double volume = 1.0;
    int total = 1;
    std::vector<int> n(grid.nodes_per_axis);
    for (int d = 0; d < dim; ++d) {
        volume *= (grid.hi[d] - grid.lo[d]) / (n[static_cast<std::size_t>(d)] - 1);
        total *= n[static_cast<std::size_t>(d)];
    }
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(bumps.centers.size()));
    for (int idx = 0; idx < total; ++idx) {
        Eigen::VectorXd xn(dim);
        int rem = idx;
        for (int d = 0; d < dim; ++d) {
            const int i = rem % n[static_cast<std::size_t>(d)];
            rem /= n[static_cast<std::size_t>(d)];
            xn[d] = grid.lo[d] +
                    (grid.hi[d] - grid.lo[d]) * i / (n[static_cast<std::size_t>(d)] - 1);
        }
        const double p = density(xn) * volume;
        for (std::size_t k = 0; k < bumps.centers.size(); ++k) {
            proj[static_cast<Eigen::Index>(k)] += p * bumps.eval(k, xn);
        }
    }
    return proj;
}

GridModel build_smdp_grid(const SMDPSpec& smdp, const Eigen::VectorXd& theta,
                          const GridSpec& grid, int order) {
    auto eta_of = [&smdp, theta](const Eigen::VectorXd& x) {
        return smdp.eta_map(x, theta);
    };
    auto cost = [&smdp, eta_of, order](const Eigen::VectorXd& x) {
        const QuadratureRule rule =
            family_control_quadrature(smdp.family, eta_of(x), order);
        double c = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            c += rule.weights[static_cast<Eigen::Index>(i)] * smdp.step_cost(x, rule.nodes[i]);
        }
        return c;
    };
    GridModel::KernelFn kernel;
    if (smdp.dynamics) {
        kernel = [&smdp, eta_of, order](const Eigen::VectorXd& x) {
            const QuadratureRule rule =
                family_control_quadrature(smdp.family, eta_of(x), order);
            std::vector<std::pair<Eigen::VectorXd, double>> samples;
            samples.reserve(rule.nodes.size());
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                samples.emplace_back(smdp.dynamics(x, rule.nodes[i]),
                                     rule.weights[static_cast<Eigen::Index>(i)]);
            }
            return samples;
        };
    } else {
        // Explicit-density kernel discretized on the grid nodes (experimental).
        kernel = [&smdp, eta_of, order, grid](const Eigen::VectorXd& x) {
            const QuadratureRule rule =
                family_control_quadrature(smdp.family, eta_of(x), order);
            const int dim = static_cast<int>(grid.lo.size());
            std::vector<std::pair<Eigen::VectorXd, double>> samples;
            int total = 1;
            for (int d = 0; d < dim; ++d) {
                total *= grid.nodes_per_axis[static_cast<std::size_t>(d)];
            }
            for (int idx = 0; idx < total; ++idx) {
                Eigen::VectorXd xn(dim);
                int rem = idx;
                for (int d = 0; d < dim; ++d) {
                    const int nd = grid.nodes_per_axis[static_cast<std::size_t>(d)];
                    xn[d] = grid.lo[d] + (grid.hi[d] - grid.lo[d]) * (rem % nd) / (nd - 1);
                    rem /= nd;
                }
                double p = 0.0;
                for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                    p += rule.weights[static_cast<Eigen::Index>(i)] *
                         smdp.density(xn, x, rule.nodes[i]);
                }
                samples.emplace_back(xn, p);
            }
            return samples;
        };
    }
    return GridModel(smdp.n_x, smdp.gamma, grid, cost, kernel, smdp.p0);
}

GridModel build_dmdp_grid(const SMDPSpec& smdp, const DMDPSpec& dmdp,
                          const Eigen::VectorXd& theta, const GridSpec& grid,
                          int kernel_order) {
    auto eta_of = [&smdp, theta](const Eigen::VectorXd& x) {
        return smdp.eta_map(x, theta);
    };
    auto cost = [&dmdp, eta_of](const Eigen::VectorXd& x) {
        return dmdp.step_cost(x, eta_of(x));
    };
    GridModel::KernelFn kernel;
    if (dmdp.dynamics) {
        kernel = [&dmdp, eta_of, kernel_order](const Eigen::VectorXd& x) {
            const QuadratureRule rule =
                family_control_quadrature(dmdp.family, eta_of(x), kernel_order);
            std::vector<std::pair<Eigen::VectorXd, double>> samples;
            samples.reserve(rule.nodes.size());
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                samples.emplace_back(dmdp.dynamics(x, rule.nodes[i]),
                                     rule.weights[static_cast<Eigen::Index>(i)]);
            }
            return samples;
        };
    } else {
        kernel = [&dmdp, eta_of, grid](const Eigen::VectorXd& x) {
            const int dim = static_cast<int>(grid.lo.size());
            std::vector<std::pair<Eigen::VectorXd, double>> samples;
            int total = 1;
            for (int d = 0; d < dim; ++d) {
                total *= grid.nodes_per_axis[static_cast<std::size_t>(d)];
            }
            const Eigen::VectorXd eta = eta_of(x);
            for (int idx = 0; idx < total; ++idx) {
                Eigen::VectorXd xn(dim);
                int rem = idx;
                for (int d = 0; d < dim; ++d) {
                    const int nd = grid.nodes_per_axis[static_cast<std::size_t>(d)];
                    xn[d] = grid.lo[d] + (grid.hi[d] - grid.lo[d]) * (rem % nd) / (nd - 1);
                    rem /= nd;
                }
                samples.emplace_back(xn, dmdp.density(xn, x, eta));
            }
            return samples;
        };
    }
    return GridModel(dmdp.n_x, dmdp.gamma, grid, cost, kernel, dmdp.p0);
}

}  // namespace

double verify_transition_equivalence(const SMDPSpec& smdp, const DMDPSpec& dmdp,
                                     const Eigen::VectorXd& theta,
                                     const std::vector<Eigen::VectorXd>& probes,
                                     const GridSpec& grid, int order) {
    const TestBumps bumps = make_bumps(grid);
    double worst = 0.0;
    for (const auto& x : probes) {
        const Eigen::VectorXd eta = smdp.eta_map(x, theta);
        Eigen::VectorXd proj_S, proj_D;
        if (smdp.dynamics) {
            proj_S = project_pushforward(
                smdp.dynamics, x, family_control_quadrature(smdp.family, eta, order),
                bumps);
            proj_D = project_pushforward(
                dmdp.dynamics, x,
                family_control_quadrature(dmdp.family, eta, dmdp.build_order), bumps);
        } else {
            auto dens_S = [&](const Eigen::VectorXd& xn) {
                const QuadratureRule rule =
                    family_control_quadrature(smdp.family, eta, order);
                double p = 0.0;
                for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                    p += rule.weights[static_cast<Eigen::Index>(i)] *
                         smdp.density(xn, x, rule.nodes[i]);
                }
                return p;
            };
            auto dens_D = [&](const Eigen::VectorXd& xn) {
                return dmdp.density(xn, x, eta);
            };
            proj_S = project_density(dens_S, grid, bumps);
            proj_D = project_density(dens_D, grid, bumps);
        }
        worst = std::max(worst, (proj_S - proj_D).cwiseAbs().maxCoeff());
    }
    return worst;
}

ValueEquivalenceReport verify_value_equivalence(const SMDPSpec& smdp,
                                                const DMDPSpec& dmdp,
                                                const Eigen::VectorXd& theta,
                                                const GridSpec& grid, int order) {
    if (smdp.n_x > 2) {
        throw std::invalid_argument("verify_value_equivalence: n_x must be <= 2");
    }
    // The two chains share the same control quadrature for the kernel so the
    // comparison isolates the cost construction (Ddef) itself.
    const GridModel grid_S = build_smdp_grid(smdp, theta, grid, order);
    const GridModel grid_D = build_dmdp_grid(smdp, dmdp, theta, grid, order);
    const Eigen::VectorXd v_S = grid_S.solve(grid_S.cost(Mode::S), false);
    const Eigen::VectorXd v_D = grid_D.solve(grid_D.cost(Mode::D), false);

    ValueEquivalenceReport report;
    report.max_value_discrepancy = (v_S - v_D).cwiseAbs().maxCoeff();
    report.j_S = grid_S.p0_weights().dot(v_S);
    report.j_D = grid_D.p0_weights().dot(v_D);
    report.j_discrepancy = std::abs(report.j_S - report.j_D);

    auto j_of = [&](const Eigen::VectorXd& th, bool stochastic) {
        if (stochastic) {
            const GridModel g = build_smdp_grid(smdp, th, grid, order);
            return g.p0_weights().dot(g.solve(g.cost(Mode::S), false));
        }
        const GridModel g = build_dmdp_grid(smdp, dmdp, th, grid, order);
        return g.p0_weights().dot(g.solve(g.cost(Mode::D), false));
    };
    double worst_grad = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-5 * (1.0 + std::abs(theta[i]));
        Eigen::VectorXd tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        const double g_S = (j_of(tp, true) - j_of(tm, true)) / (2.0 * h);
        const double g_D = (j_of(tp, false) - j_of(tm, false)) / (2.0 * h);
        worst_grad = std::max(worst_grad, std::abs(g_S - g_D));
    }
    report.gradient_discrepancy = worst_grad;
    return report;
}

}  // namespace pgeq
