#include "maflow/difftape.hpp"

#include <string>

#include "maflow/errors.hpp"

namespace maflow {

TapeGradient backprop(const Trajectory& tape, const VelocityField& field, const Matrix& x_cot, const Vector& L_cot) {
    if (tape.fingerprint != field.fingerprint()) {
        throw StaleTapeError("trajectory was recorded with different potential parameters");
    }
    if (tape.steps.empty()) throw Error("cannot differentiate an empty trajectory");
    const auto& first = tape.steps.front().stages[0].x;
    if (x_cot.rows() != first.rows() || x_cot.cols() != first.cols() || L_cot.size() != first.cols()) {
        throw ShapeError("terminal cotangents do not match the recorded batch");
    }

    const double dt = tape.dt;
    const double half = 0.5 * dt;
    const double w = dt / 6.0;
    const std::array<double, 4> weight{w, 2.0 * w, 2.0 * w, w};

    TapeGradient out{field.zero_cotangent(), x_cot, L_cot};
    Matrix& xbar = out.x0;
    // L enters every step additively, so its cotangent is constant.
    const Vector& Lbar = out.L0;

    std::array<Matrix, 4> stage_xbar;
    Matrix grad_cot;
    for (auto it = tape.steps.rbegin(); it != tape.steps.rend(); ++it) {
        const auto& st = it->stages;
        for (int s = 3; s >= 0; --s) {
            const auto su = std::size_t(s);
            grad_cot = weight[su] * xbar;
            // x4 = x + dt k3, x3 = x + dt/2 k2, x2 = x + dt/2 k1
            if (s == 2) grad_cot += dt * stage_xbar[3];
            if (s == 1) grad_cot += half * stage_xbar[2];
            if (s == 0) grad_cot += half * stage_xbar[1];
            const Vector lap_cot = -weight[su] * Lbar;
            field.pullback(st[su].variant, st[su].x, grad_cot, lap_cot, stage_xbar[su], &out.params);
        }
        xbar += stage_xbar[0] + stage_xbar[1] + stage_xbar[2] + stage_xbar[3];
    }
    return out;
}

}  // namespace maflow
