#pragma once

#include <cstddef>
#include <string>

#include "maflow/targets.hpp"

namespace maflow {

/// Integrator against the closed-form flow of phi = lambda x^2 / 2 on a
/// uniform grid of starting points in [-3, 3].
struct GaussianFlowCheck {
    double map_error = 0.0;          // max |x(T) - e^{lambda T} x(0)|
    double log_density_error = 0.0;  // max |l(T) - ln p(x(T), T)|
};

GaussianFlowCheck check_gaussian_flow(double lambda, double T, std::size_t steps, int grid_points = 601);

/// Difftape gradient against central differences on randomly chosen
/// parameter coordinates. The loss is re-evaluated with the same noise seed
/// for every perturbation.
struct GradCheck {
    std::size_t coordinates = 0;
    double max_rel_error = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckSetup {
    std::string objective = "nll";  // "nll" or "variational"
    Eigen::Index dim = 4;           // must be a square for the variational Ising target
    Eigen::Index hidden = 16;
    std::size_t steps = 20;
    double epsilon = 0.1;
    std::size_t batch = 8;
    std::size_t coordinates = 20;
    double step = 1e-5;
    std::uint64_t seed = 1;
};

GradCheck gradient_check(const GradCheckSetup& setup);

}  // namespace maflow
