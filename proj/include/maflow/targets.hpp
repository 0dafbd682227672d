#pragma once

#include <Eigen/Cholesky>

#include <cstddef>
#include <functional>

#include "maflow/difftape.hpp"
#include "maflow/flow.hpp"

namespace maflow {

/// ln N(x; 0, I) = -(N/2) ln 2 pi - |x|^2 / 2
double base_log_density(const Vector& x);
Vector base_log_density_batch(const Matrix& X);

/// Unnormalized target density exp(-E(x)) for variational training.
class Energy {
public:
    virtual ~Energy() = default;
    virtual Eigen::Index dim() const = 0;
    /// energy has length B; force, when non-null, receives dE/dx (dim x B).
    virtual void evaluate(const Matrix& X, Vector& energy, Matrix* force) const = 0;
};

/// E(x) = |x|^2 / 2 + offset. offset = (N/2) ln 2 pi gives E = -ln N(x).
class GaussianEnergy final : public Energy {
public:
    GaussianEnergy(Eigen::Index dim, double offset = 0.0) : dim_(dim), offset_(offset) {}
    Eigen::Index dim() const override { return dim_; }
    void evaluate(const Matrix& X, Vector& energy, Matrix* force) const override;

private:
    Eigen::Index dim_;
    double offset_;
};

/// Continuous (Hubbard-Stratonovich) form of the periodic square-lattice
/// Ising model with uniform nearest-neighbour coupling beta.
struct IsingSpec {
    int L = 0;
    double beta = 0.0;
    double alpha = 0.0;  // diagonal offset making lambda_min(K + alpha I) = 0.1
    Matrix K;            // couplings; on L = 2 each neighbour is reached twice
    Matrix Kplus;        // K + alpha I
    Eigen::LLT<Matrix> factor;
    double log_det = 0.0;  // ln det(K + alpha I)

    Eigen::Index sites() const { return Eigen::Index(L) * L; }
};

inline constexpr double kIsingMinEigenvalue = 0.1;

/// ln(1 + sqrt 2) / 2, the square-lattice critical coupling.
double critical_coupling();

/// Requires even L >= 2; alpha = 0.1 + 4 beta from the (pi, pi) Fourier mode.
IsingSpec ising_spec(int L, double beta);

/// E(x) = x^T (K + alpha I)^{-1} x / 2 - sum_i ln cosh x_i
double ising_energy(const IsingSpec& spec, const Vector& x);
/// dE/dx = (K + alpha I)^{-1} x - tanh(x)
Vector ising_force(const IsingSpec& spec, const Vector& x);

class IsingEnergy final : public Energy {
public:
    explicit IsingEnergy(const IsingSpec& spec) : spec_(spec) {}
    Eigen::Index dim() const override { return spec_.sites(); }
    void evaluate(const Matrix& X, Vector& energy, Matrix* force) const override;

private:
    const IsingSpec& spec_;
};

struct IsingPartition {
    double alpha = 0.0;
    double log_det = 0.0;
    /// ln sum_s exp(s^T (K + alpha I) s / 2), i.e. the Ising partition sum
    /// including the constant offset N alpha / 2.
    double log_z_ising = 0.0;
    /// Free energy -ln Z of the continuous model:
    /// -ln Z = -log_z_ising - log_det / 2 + (N/2) ln(2/pi)
    double neg_log_z = 0.0;
};

inline constexpr int kMaxEnumerationSide = 4;

/// Exhaustive enumeration over all 2^N spin states (L <= 4). Larger lattices
/// are refused: they need Kaufman's finite-lattice closed form instead.
IsingPartition exact_partition(const IsingSpec& spec);
double exact_neg_log_z(const IsingSpec& spec);

/// s_i = +1 with probability logistic(2 x_i), independently.
Eigen::VectorXi spin_sampler(const Vector& x, Rng& rng);

/// Closed-form flow of N(0, 1) under phi = lambda x^2 / 2:
/// x(t) = e^{lambda t} x(0), p(x, t) = alpha/sqrt(2 pi) exp(-alpha^2 x^2 / 2),
/// alpha(t) = e^{-lambda t}.
struct GaussianFlowSolution {
    double lambda = 0.0;

    double alpha(double t) const;
    double map_scale(double t) const;
    double log_density(double x, double t) const;
};

GaussianFlowSolution gaussian_flow_oracle(double lambda);

struct LossResult {
    double value = 0.0;
    double std_error = 0.0;  // standard error of the batch mean
    Vector per_sample;
    PotentialParams grad;  // empty unless requested
};

/// NLL = -mean_j ln p(x_j, T), gradient through the backward trajectory.
LossResult nll_loss(const VelocityField& field, const Matrix& X, const IntegratorConfig& config, Rng* rng,
                    bool with_grad);

/// mean_j [ln p(x_j, T) + E(x_j)] over a fresh batch from the model, with the
/// pathwise (reparametrized) gradient at fixed base noise.
LossResult variational_loss(const VelocityField& field, const Energy& energy, std::size_t batch,
                            const IntegratorConfig& config, Rng& rng, bool with_grad);

}  // namespace maflow
