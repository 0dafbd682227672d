#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>

namespace maflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Weights of the scalar potential
///
///     phi(x) = a^T softplus(W x + b) + c
///
/// with W of shape (hidden x dim). The same struct doubles as the container
/// for gradients with respect to the parameters.
struct PotentialParams {
    Matrix W;
    Vector b;
    Vector a;
    double c = 0.0;

    PotentialParams() = default;
    PotentialParams(Eigen::Index hidden, Eigen::Index dim);

    Eigen::Index hidden() const { return W.rows(); }
    Eigen::Index dim() const { return W.cols(); }
    Eigen::Index size() const { return W.size() + b.size() + a.size() + 1; }

    /// Throws ShapeError if the shapes disagree or hidden/dim is zero, and
    /// NumericError if any entry is non-finite.
    void validate() const;

    void set_zero();

    /// Flat view in the order W (column-major), b, a, c.
    Vector to_vector() const;
    void assign(const Vector& flat);

    PotentialParams& operator+=(const PotentialParams& other);
    PotentialParams& operator*=(double s);
};

/// W and a uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)); b = 0, c = 0.
PotentialParams init_params(Eigen::Index hidden, Eigen::Index dim, Rng& rng);

/// Value, velocity field and Laplacian of phi at a single point.
struct PotentialEval {
    double value = 0.0;
    Vector grad;
    double laplacian = 0.0;
};

/// Batched counterpart of PotentialEval; column j belongs to sample j.
struct BatchEval {
    Vector value;
    Matrix grad;
    Vector laplacian;
};

PotentialEval eval(const PotentialParams& params, const Vector& x);

/// X has one sample per column (dim x B).
BatchEval eval_batch(const PotentialParams& params, const Matrix& X);

/// Gradient and Laplacian only, written into caller-owned storage. This is
/// the integrator hot path.
void eval_drift(const PotentialParams& params, const Matrix& X, Matrix& grad, Vector& laplacian);

/// Cotangents of F = w_grad^T grad(phi)(x) + w_lap * lap(phi)(x).
struct ParamVjp {
    PotentialParams params;  // dF/dtheta
    Vector x;                // dF/dx
};

ParamVjp param_vjp(const PotentialParams& params, const Vector& x, const Vector& w_grad, double w_lap);

/// Batched pullback summed over samples. Column j of x_cot receives dF_j/dx_j.
/// When param_cot is non-null the parameter cotangents of sum_j F_j are added
/// into it.
void pullback_batch(const PotentialParams& params, const Matrix& X, const Matrix& grad_cot,
                    const Vector& lap_cot, Matrix& x_cot, PotentialParams* param_cot);

/// 64-bit FNV-1a over the raw parameter bytes; used to tie a recorded
/// trajectory to the parameters it was produced with.
std::uint64_t fingerprint(const PotentialParams& params);

/// Binary params section: "MAPOT" tag, format version, dim, hidden, then
/// W (column-major), b, a, c as little-endian float64.
void write_params(std::ostream& out, const PotentialParams& params);
PotentialParams read_params(std::istream& in);

inline constexpr std::uint32_t kParamsFormatVersion = 1;

}  // namespace maflow
