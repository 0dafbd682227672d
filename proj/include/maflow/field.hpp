#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>

#include "maflow/potential.hpp"

namespace maflow {

/// Source of the drift (grad phi, lap phi) that the integrator follows.
///
/// A field may expose several interchangeable variants, e.g. one per element
/// of a symmetry group when the symmetric average is sampled stochastically.
/// The integrator chooses a variant per step and records it on the tape so
/// the reverse pass differentiates exactly the computation that ran.
class VelocityField {
public:
    virtual ~VelocityField() = default;

    virtual Eigen::Index dim() const = 0;
    virtual std::size_t variant_count() const { return 1; }

    /// grad is (dim x B), laplacian has length B.
    virtual void drift(std::size_t variant, const Matrix& X, Matrix& grad, Vector& laplacian) const = 0;

    /// Pullback of sum_j [grad_cot_j . grad phi(x_j) + lap_cot_j lap phi(x_j)].
    /// x_cot is overwritten; parameter cotangents are accumulated.
    virtual void pullback(std::size_t variant, const Matrix& X, const Matrix& grad_cot, const Vector& lap_cot,
                          Matrix& x_cot, PotentialParams* param_cot) const = 0;

    /// Zero-initialised container shaped like the parameter gradient.
    virtual PotentialParams zero_cotangent() const = 0;

    virtual std::uint64_t fingerprint() const = 0;
};

/// The learnable potential, viewed without symmetrization. Holds a reference;
/// the params must outlive the field.
class NetworkField final : public VelocityField {
public:
    explicit NetworkField(const PotentialParams& params) : params_(params) {}

    Eigen::Index dim() const override { return params_.dim(); }
    void drift(std::size_t, const Matrix& X, Matrix& grad, Vector& laplacian) const override {
        eval_drift(params_, X, grad, laplacian);
    }
    void pullback(std::size_t, const Matrix& X, const Matrix& grad_cot, const Vector& lap_cot, Matrix& x_cot,
                  PotentialParams* param_cot) const override {
        pullback_batch(params_, X, grad_cot, lap_cot, x_cot, param_cot);
    }
    PotentialParams zero_cotangent() const override { return PotentialParams(params_.hidden(), params_.dim()); }
    std::uint64_t fingerprint() const override { return maflow::fingerprint(params_); }

    const PotentialParams& params() const { return params_; }

private:
    const PotentialParams& params_;
};

/// phi(x) = lambda |x|^2 / 2. Has no parameters; used to check the
/// integrator against the exact exponential solution.
class QuadraticField final : public VelocityField {
public:
    QuadraticField(double lambda, Eigen::Index dim) : lambda_(lambda), dim_(dim) {}

    Eigen::Index dim() const override { return dim_; }
    void drift(std::size_t, const Matrix& X, Matrix& grad, Vector& laplacian) const override {
        grad = lambda_ * X;
        laplacian = Vector::Constant(X.cols(), lambda_ * double(dim_));
    }
    void pullback(std::size_t, const Matrix&, const Matrix& grad_cot, const Vector&, Matrix& x_cot,
                  PotentialParams*) const override {
        x_cot = lambda_ * grad_cot;
    }
    PotentialParams zero_cotangent() const override { return PotentialParams(0, dim_); }
    std::uint64_t fingerprint() const override {
        return std::bit_cast<std::uint64_t>(lambda_) ^ (0x9e3779b97f4a7c15ull * std::uint64_t(dim_));
    }

    double lambda() const { return lambda_; }

private:
    double lambda_;
    Eigen::Index dim_;
};

}  // namespace maflow
