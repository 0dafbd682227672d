#include "maflow/flow.hpp"

#include <cmath>
#include <string>

#include "maflow/errors.hpp"
#include "maflow/targets.hpp"

namespace maflow {

namespace {

// Shared by rk4_step and replay so the two agree bitwise.
void combine(const Matrix& X, const Vector& L, const std::array<const Matrix*, 4>& g,
             const std::array<const Vector*, 4>& lap, double dt, Matrix& X_out, Vector& L_out) {
    const double w = dt / 6.0;
    X_out = X + w * (*g[0] + 2.0 * *g[1] + 2.0 * *g[2] + *g[3]);
    L_out = L - w * (*lap[0] + 2.0 * *lap[1] + 2.0 * *lap[2] + *lap[3]);
}

void check_state(const Matrix& X, const Vector& L, std::size_t step_index) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (!std::isfinite(L[j]) || !X.col(j).allFinite()) {
            throw NumericError("non-finite flow state at step " + std::to_string(step_index) + ", batch row " +
                               std::to_string(j));
        }
    }
}

}  // namespace

void IntegratorConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("integrator step size must be positive");
    if (steps < 1) throw ConfigError("integrator needs at least one step");
}

FlowState rk4_step(const VelocityField& field, const FlowState& state, double epsilon, Direction direction,
                   const std::array<std::size_t, 4>& variants, StepRecord* record, std::size_t step_index) {
    if (state.X.rows() != field.dim()) {
        throw ShapeError("flow state has dimension " + std::to_string(state.X.rows()) + ", field expects " +
                         std::to_string(field.dim()));
    }
    if (state.L.size() != state.X.cols()) throw ShapeError("flow state log-density length differs from batch size");
    const double dt = direction == Direction::forward ? epsilon : -epsilon;
    const double half = 0.5 * dt;

    std::array<Matrix, 4> x;
    std::array<Matrix, 4> g;
    std::array<Vector, 4> lap;
    auto stage = [&](int s) {
        try {
            field.drift(variants[std::size_t(s)], x[std::size_t(s)], g[std::size_t(s)], lap[std::size_t(s)]);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (step " + std::to_string(step_index) + ", stage " +
                               std::to_string(s + 1) + ")");
        }
    };
    x[0] = state.X;
    stage(0);
    x[1] = state.X + half * g[0];
    stage(1);
    x[2] = state.X + half * g[1];
    stage(2);
    x[3] = state.X + dt * g[2];
    stage(3);

    FlowState next;
    combine(state.X, state.L, {&g[0], &g[1], &g[2], &g[3]}, {&lap[0], &lap[1], &lap[2], &lap[3]}, dt, next.X,
            next.L);
    next.t = state.t + dt;
    check_state(next.X, next.L, step_index);

    if (record != nullptr) {
        record->t = state.t;
        record->L = state.L;
        for (std::size_t s = 0; s < 4; ++s) {
            record->stages[s].x = std::move(x[s]);
            record->stages[s].grad = std::move(g[s]);
            record->stages[s].laplacian = std::move(lap[s]);
            record->stages[s].variant = variants[s];
        }
    }
    return next;
}

FlowState replay(const Trajectory& tape) {
    if (tape.steps.empty()) throw Error("cannot replay an empty trajectory");
    FlowState state;
    for (const auto& step : tape.steps) {
        const auto& st = step.stages;
        combine(st[0].x, step.L, {&st[0].grad, &st[1].grad, &st[2].grad, &st[3].grad},
                {&st[0].laplacian, &st[1].laplacian, &st[2].laplacian, &st[3].laplacian}, tape.dt, state.X,
                state.L);
        state.t = step.t + tape.dt;
    }
    return state;
}

FlowState integrate(const VelocityField& field, FlowState state, const IntegratorConfig& config, Rng* rng,
                    Trajectory* tape, const StepObserver& observer) {
    config.validate();
    const std::size_t count = field.variant_count();
    if (count > 1 && rng == nullptr) throw ConfigError("a stochastic field needs a random stream to integrate");
    auto draw = [&]() -> std::size_t {
        if (count <= 1) return 0;
        std::uniform_int_distribution<std::size_t> pick(0, count - 1);
        return pick(*rng);
    };

    if (tape != nullptr) {
        tape->dt = config.signed_step();
        tape->fingerprint = field.fingerprint();
        tape->steps.assign(config.steps, StepRecord{});
    }
    if (observer) observer(0, state);

    std::array<std::size_t, 4> variants{0, 0, 0, 0};
    if (config.resample == Resample::per_trajectory) variants.fill(draw());
    for (std::size_t k = 0; k < config.steps; ++k) {
        if (config.resample == Resample::per_step) {
            variants.fill(draw());
        } else if (config.resample == Resample::per_stage) {
            for (auto& v : variants) v = draw();
        }
        state = rk4_step(field, state, config.epsilon, config.direction, variants,
                         tape != nullptr ? &tape->steps[k] : nullptr, k);
        if (observer) observer(k + 1, state);
    }
    return state;
}

FlowState sample(const VelocityField& field, std::size_t batch, const IntegratorConfig& config, Rng& rng,
                 Trajectory* tape, const StepObserver& observer) {
    IntegratorConfig forward = config;
    forward.direction = Direction::forward;
    FlowState state;
    state.X.resize(field.dim(), Eigen::Index(batch));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < state.X.cols(); ++j)
        for (Eigen::Index i = 0; i < state.X.rows(); ++i) state.X(i, j) = normal(rng);
    state.L = base_log_density_batch(state.X);
    state.t = 0.0;
    return integrate(field, std::move(state), forward, &rng, tape, observer);
}

LogProbResult log_prob(const VelocityField& field, const Matrix& X, const IntegratorConfig& config, Rng* rng,
                       Trajectory* tape, const StepObserver& observer) {
    if (X.rows() != field.dim()) {
        throw ShapeError("data has dimension " + std::to_string(X.rows()) + ", model expects " +
                         std::to_string(field.dim()));
    }
    IntegratorConfig back = config;
    back.direction = Direction::backward;
    FlowState state{X, Vector::Zero(X.cols()), config.total_time()};
    LogProbResult out;
    out.latent = integrate(field, std::move(state), back, rng, tape, observer);
    out.log_prob = base_log_density_batch(out.latent.X) - out.latent.L;
    return out;
}

}  // namespace maflow
