#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "maflow/field.hpp"

namespace maflow {

enum class Direction { forward, backward };

/// When a field has several variants (sampled symmetrization), how often a
/// fresh one is drawn.
enum class Resample { per_step, per_stage, per_trajectory };

struct IntegratorConfig {
    double epsilon = 0.1;
    std::size_t steps = 100;
    Direction direction = Direction::forward;
    Resample resample = Resample::per_step;

    void validate() const;
    double total_time() const { return epsilon * double(steps); }
    double signed_step() const { return direction == Direction::forward ? epsilon : -epsilon; }
};

/// A batch of positions (dim x B, one sample per column) with their
/// log-densities at time t.
struct FlowState {
    Matrix X;
    Vector L;
    double t = 0.0;
};

/// One RK4 stage as evaluated during the forward pass.
struct StageRecord {
    Matrix x;
    Matrix grad;
    Vector laplacian;
    std::size_t variant = 0;
};

/// stages[0].x is the step's entry position.
struct StepRecord {
    double t = 0.0;
    Vector L;
    std::array<StageRecord, 4> stages;
};

/// Everything the reverse pass needs. Memory is O(steps * B * dim).
struct Trajectory {
    double dt = 0.0;
    std::uint64_t fingerprint = 0;
    std::vector<StepRecord> steps;
};

/// Rebuild the terminal state from the recorded stage evaluations alone.
FlowState replay(const Trajectory& tape);

/// Classical RK4 on (dx/dt, dl/dt) = (grad phi, -lap phi). The backward
/// direction uses the same stepper with a negated increment. step_index is
/// only used in diagnostics.
FlowState rk4_step(const VelocityField& field, const FlowState& state, double epsilon, Direction direction,
                   const std::array<std::size_t, 4>& variants = {0, 0, 0, 0}, StepRecord* record = nullptr,
                   std::size_t step_index = 0);

using StepObserver = std::function<void(std::size_t step, const FlowState&)>;

/// `steps` RK4 steps. rng is required when the field has more than one
/// variant. When tape is non-null it is overwritten with the full record.
/// observer, if set, sees the initial state (step 0) and every step after.
FlowState integrate(const VelocityField& field, FlowState state, const IntegratorConfig& config, Rng* rng = nullptr,
                    Trajectory* tape = nullptr, const StepObserver& observer = {});

/// z ~ N(0, I) drawn column by column from rng, L = ln N(z), then forward
/// integration (the direction in config is ignored). Variant draws, if any,
/// come from the same stream afterwards.
FlowState sample(const VelocityField& field, std::size_t batch, const IntegratorConfig& config, Rng& rng,
                 Trajectory* tape = nullptr, const StepObserver& observer = {});

struct LogProbResult {
    Vector log_prob;  // ln p(x, T)
    FlowState latent;  // state reached at t = 0; latent.L holds the accumulated change
};

/// Backward integration from the data at T to t = 0 starting with L = 0:
/// ln p(x, T) = ln N(z) - L(0). The direction in config is ignored.
LogProbResult log_prob(const VelocityField& field, const Matrix& X, const IntegratorConfig& config,
                       Rng* rng = nullptr, Trajectory* tape = nullptr, const StepObserver& observer = {});

}  // namespace maflow
