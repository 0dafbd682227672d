#include "maflow/targets.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "maflow/errors.hpp"

namespace maflow {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_cosh(double x) {
    const double ax = std::abs(x);
    return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

double standard_error(const Vector& v) {
    const auto n = v.size();
    if (n < 2) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / double(n - 1) / double(n));
}

}  // namespace

double base_log_density(const Vector& x) {
    return -double(x.size()) * kHalfLog2Pi - 0.5 * x.squaredNorm();
}

Vector base_log_density_batch(const Matrix& X) {
    return (-double(X.rows()) * kHalfLog2Pi - 0.5 * X.colwise().squaredNorm().array()).matrix().transpose();
}

void GaussianEnergy::evaluate(const Matrix& X, Vector& energy, Matrix* force) const {
    if (X.rows() != dim_) throw ShapeError("energy input has the wrong dimension");
    energy = (0.5 * X.colwise().squaredNorm().array() + offset_).matrix().transpose();
    if (force != nullptr) *force = X;
}

double critical_coupling() { return 0.5 * std::log(1.0 + std::numbers::sqrt2); }

IsingSpec ising_spec(int L, double beta) {
    if (L < 2) throw ConfigError("Ising lattice side must be at least 2");
    if (L % 2 != 0) {
        throw ConfigError("odd Ising lattice sides are unsupported: the offset construction assumes the (pi, pi) mode");
    }
    if (!std::isfinite(beta)) throw ConfigError("Ising coupling must be finite");
    IsingSpec spec;
    spec.L = L;
    spec.beta = beta;
    const Eigen::Index n = spec.sites();
    spec.K = Matrix::Zero(n, n);
    for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) {
            const Eigen::Index i = Eigen::Index(r) * L + c;
            const Eigen::Index nb[4] = {Eigen::Index(r) * L + (c + 1) % L, Eigen::Index(r) * L + (c + L - 1) % L,
                                        Eigen::Index((r + 1) % L) * L + c, Eigen::Index((r + L - 1) % L) * L + c};
            for (auto j : nb) spec.K(i, j) += beta;
        }
    }
    // Spectrum of the periodic lattice: 2 beta (cos(2 pi k1 / L) + cos(2 pi k2 / L)).
    double lambda_min = std::numeric_limits<double>::infinity();
    for (int k1 = 0; k1 < L; ++k1) {
        for (int k2 = 0; k2 < L; ++k2) {
            const double mode = 2.0 * beta *
                                (std::cos(2.0 * std::numbers::pi * k1 / L) + std::cos(2.0 * std::numbers::pi * k2 / L));
            lambda_min = std::min(lambda_min, mode);
        }
    }
    spec.alpha = kIsingMinEigenvalue - lambda_min;
    spec.Kplus = spec.K + spec.alpha * Matrix::Identity(n, n);
    spec.factor.compute(spec.Kplus);
    if (spec.factor.info() != Eigen::Success) throw Error("internal error: K + alpha I is not positive definite");
    spec.log_det = 2.0 * spec.factor.matrixLLT().diagonal().array().log().sum();
    return spec;
}

double ising_energy(const IsingSpec& spec, const Vector& x) {
    if (x.size() != spec.sites()) throw ShapeError("Ising configuration has the wrong number of sites");
    const Vector y = spec.factor.solve(x);
    double e = 0.5 * x.dot(y);
    for (Eigen::Index i = 0; i < x.size(); ++i) e -= log_cosh(x[i]);
    return e;
}

Vector ising_force(const IsingSpec& spec, const Vector& x) {
    if (x.size() != spec.sites()) throw ShapeError("Ising configuration has the wrong number of sites");
    return spec.factor.solve(x) - x.array().tanh().matrix();
}

void IsingEnergy::evaluate(const Matrix& X, Vector& energy, Matrix* force) const {
    if (X.rows() != spec_.sites()) throw ShapeError("Ising batch has the wrong number of sites");
    const Matrix Y = spec_.factor.solve(X);
    energy.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double e = 0.5 * X.col(j).dot(Y.col(j));
        for (Eigen::Index i = 0; i < X.rows(); ++i) e -= log_cosh(X(i, j));
        energy[j] = e;
    }
    if (force != nullptr) *force = Y - X.array().tanh().matrix();
}

IsingPartition exact_partition(const IsingSpec& spec) {
    if (spec.L > kMaxEnumerationSide) {
        throw ConfigError("exact enumeration is limited to L <= " + std::to_string(kMaxEnumerationSide) +
                          "; larger lattices need Kaufman's finite-lattice closed form, which is not implemented");
    }
    const Eigen::Index n = spec.sites();
    const std::uint64_t states = std::uint64_t(1) << n;
    std::vector<double> exponent(states);
    Vector s(n);
    double max_exp = -std::numeric_limits<double>::infinity();
    for (std::uint64_t bits = 0; bits < states; ++bits) {
        for (Eigen::Index i = 0; i < n; ++i) s[i] = (bits >> i) & 1u ? 1.0 : -1.0;
        const double e = 0.5 * s.dot(spec.Kplus * s);
        exponent[bits] = e;
        max_exp = std::max(max_exp, e);
    }
    double sum = 0.0;
    for (double e : exponent) sum += std::exp(e - max_exp);

    IsingPartition out;
    out.alpha = spec.alpha;
    out.log_det = spec.log_det;
    out.log_z_ising = max_exp + std::log(sum);
    out.neg_log_z = -out.log_z_ising - 0.5 * out.log_det + 0.5 * double(n) * std::log(2.0 / std::numbers::pi);
    return out;
}

double exact_neg_log_z(const IsingSpec& spec) { return exact_partition(spec).neg_log_z; }

Eigen::VectorXi spin_sampler(const Vector& x, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXi s(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        // logistic(2x) computed without overflow
        const double z = 2.0 * x[i];
        const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        s[i] = u(rng) < p ? 1 : -1;
    }
    return s;
}

double GaussianFlowSolution::alpha(double t) const { return std::exp(-lambda * t); }

double GaussianFlowSolution::map_scale(double t) const { return std::exp(lambda * t); }

double GaussianFlowSolution::log_density(double x, double t) const {
    const double a = alpha(t);
    const double y = a * x;
    return std::log(a) - kHalfLog2Pi - 0.5 * (y * y);
}

GaussianFlowSolution gaussian_flow_oracle(double lambda) { return GaussianFlowSolution{lambda}; }

LossResult nll_loss(const VelocityField& field, const Matrix& X, const IntegratorConfig& config, Rng* rng,
                    bool with_grad) {
    if (X.cols() < 1) throw ShapeError("empty data batch");
    Trajectory tape;
    const LogProbResult res = log_prob(field, X, config, rng, with_grad ? &tape : nullptr);
    LossResult out;
    out.per_sample = -res.log_prob;
    out.value = out.per_sample.mean();
    out.std_error = standard_error(out.per_sample);
    if (with_grad) {
        // loss = -(1/B) sum_j [ln N(z_j) - L_j(0)]
        const double inv_b = 1.0 / double(X.cols());
        const Matrix x_cot = inv_b * res.latent.X;
        const Vector L_cot = Vector::Constant(X.cols(), inv_b);
        out.grad = backprop(tape, field, x_cot, L_cot).params;
    }
    if (!std::isfinite(out.value)) throw NumericError("non-finite NLL");
    return out;
}

LossResult variational_loss(const VelocityField& field, const Energy& energy, std::size_t batch,
                            const IntegratorConfig& config, Rng& rng, bool with_grad) {
    if (batch < 1) throw ShapeError("variational batch must be non-empty");
    if (energy.dim() != field.dim()) throw ShapeError("energy and model differ in dimension");
    IntegratorConfig fwd = config;
    fwd.direction = Direction::forward;
    Trajectory tape;
    const FlowState terminal = sample(field, batch, fwd, rng, with_grad ? &tape : nullptr);
    Vector e;
    Matrix force;
    energy.evaluate(terminal.X, e, with_grad ? &force : nullptr);
    LossResult out;
    out.per_sample = terminal.L + e;
    out.value = out.per_sample.mean();
    out.std_error = standard_error(out.per_sample);
    if (with_grad) {
        const double inv_b = 1.0 / double(batch);
        out.grad = backprop(tape, field, inv_b * force, Vector::Constant(Eigen::Index(batch), inv_b)).params;
    }
    if (!std::isfinite(out.value)) throw NumericError("non-finite variational loss");
    return out;
}

}  // namespace maflow
