#pragma once

#include "maflow/flow.hpp"

namespace maflow {

/// Result of the reverse pass through a recorded trajectory.
struct TapeGradient {
    PotentialParams params;  // d loss / d theta
    Matrix x0;               // d loss / d X at the start of the trajectory
    Vector L0;               // d loss / d L at the start of the trajectory
};

/// Exact reverse-mode derivative of the discrete RK4 map. x_cot and L_cot are
/// the cotangents of the terminal state. The field must be the one (with the
/// same parameter values) that recorded the tape, otherwise StaleTapeError.
///
/// Steps are visited last to first and the four stages of each step in
/// reverse, so the accumulation order is fixed.
TapeGradient backprop(const Trajectory& tape, const VelocityField& field, const Matrix& x_cot, const Vector& L_cot);

}  // namespace maflow
