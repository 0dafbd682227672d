#include "maflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "maflow/errors.hpp"

namespace maflow {

GaussianFlowCheck check_gaussian_flow(double lambda, double T, std::size_t steps, int grid_points) {
    if (!std::isfinite(lambda) || !std::isfinite(T)) throw ConfigError("lambda and T must be finite");
    if (!(T > 0.0) || steps < 1 || grid_points < 2) throw ConfigError("need T > 0, steps >= 1 and a grid");
    const QuadraticField field(lambda, 1);
    const auto oracle = gaussian_flow_oracle(lambda);
    IntegratorConfig config;
    config.steps = steps;
    config.epsilon = T / double(steps);

    FlowState state{Matrix(1, grid_points), Vector(grid_points), 0.0};
    for (int i = 0; i < grid_points; ++i) state.X(0, i) = -3.0 + 6.0 * i / (grid_points - 1);
    state.L = base_log_density_batch(state.X);
    const Matrix start = state.X;
    const auto end = integrate(field, std::move(state), config);

    GaussianFlowCheck out;
    const double scale = oracle.map_scale(T);
    for (int i = 0; i < grid_points; ++i) {
        out.map_error = std::max(out.map_error, std::abs(end.X(0, i) - scale * start(0, i)));
        out.log_density_error = std::max(out.log_density_error, std::abs(end.L[i] - oracle.log_density(end.X(0, i), T)));
    }
    return out;
}

GradCheck gradient_check(const GradCheckSetup& s) {
    if (s.objective != "nll" && s.objective != "variational") throw ConfigError("objective must be nll or variational");
    Rng rng(s.seed);
    PotentialParams params = init_params(s.hidden, s.dim, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < params.b.size(); ++k) params.b[k] = 0.5 * normal(rng);

    IntegratorConfig config;
    config.epsilon = s.epsilon;
    config.steps = s.steps;

    Matrix data(s.dim, Eigen::Index(s.batch));
    for (Eigen::Index j = 0; j < data.cols(); ++j)
        for (Eigen::Index i = 0; i < data.rows(); ++i) data(i, j) = normal(rng);

    std::unique_ptr<IsingSpec> spec;
    std::unique_ptr<IsingEnergy> energy;
    if (s.objective == "variational") {
        const int L = int(std::lround(std::sqrt(double(s.dim))));
        if (Eigen::Index(L) * L != s.dim) throw ConfigError("variational gradient check needs a square dimension");
        spec = std::make_unique<IsingSpec>(ising_spec(L, critical_coupling()));
        energy = std::make_unique<IsingEnergy>(*spec);
    }
    const std::uint64_t noise_seed = rng();
    auto loss = [&](const PotentialParams& p, bool with_grad) {
        const NetworkField field(p);
        if (s.objective == "nll") return nll_loss(field, data, config, nullptr, with_grad);
        Rng noise(noise_seed);
        return variational_loss(field, *energy, s.batch, config, noise, with_grad);
    };

    const Vector analytic = loss(params, true).grad.to_vector();
    const Vector theta = params.to_vector();
    // c never affects the drift, so it is left out of the draw.
    std::vector<Eigen::Index> coords(std::size_t(theta.size() - 1));
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = Eigen::Index(i);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min(coords.size(), s.coordinates));

    GradCheck out;
    PotentialParams probe = params;
    for (auto k : coords) {
        Vector t = theta;
        t[k] = theta[k] + s.step;
        probe.assign(t);
        const double up = loss(probe, false).value;
        t[k] = theta[k] - s.step;
        probe.assign(t);
        const double down = loss(probe, false).value;
        const double numeric = (up - down) / (2.0 * s.step);
        const double rel = std::abs(analytic[k] - numeric) / std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
        ++out.coordinates;
        if (rel >= out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst_analytic = analytic[k];
            out.worst_numeric = numeric;
        }
    }
    return out;
}

}  // namespace maflow
