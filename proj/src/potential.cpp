#include "maflow/potential.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "maflow/binary_io.hpp"
#include "maflow/errors.hpp"

namespace maflow {

namespace {

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void require_dim(const PotentialParams& params, Eigen::Index rows, const char* what) {
    if (rows != params.dim()) {
        throw ShapeError(std::string(what) + " has dimension " + std::to_string(rows) +
                         " but the potential expects " + std::to_string(params.dim()));
    }
}

// Pre-activations Z = W X + b together with softplus derivatives.
struct Activations {
    Matrix z;
    Matrix s1;  // logistic(z)
    Matrix s2;  // logistic'(z)
};

Activations activate(const PotentialParams& params, const Matrix& X) {
    Activations act;
    act.z.noalias() = params.W * X;
    act.z.colwise() += params.b;
    act.s1 = act.z.unaryExpr(&logistic);
    act.s2 = act.s1.array() * (1.0 - act.s1.array());
    return act;
}

void check_finite(const Matrix& X, const Matrix& grad, const Vector& lap) {
    for (Eigen::Index j = 0; j < grad.cols(); ++j) {
        if (!X.col(j).allFinite() || !std::isfinite(lap[j]) || !grad.col(j).allFinite()) {
            throw NumericError("non-finite state or potential derivative at batch index " + std::to_string(j));
        }
    }
}

}  // namespace

PotentialParams::PotentialParams(Eigen::Index hidden, Eigen::Index dim)
    : W(Matrix::Zero(hidden, dim)), b(Vector::Zero(hidden)), a(Vector::Zero(hidden)) {}

void PotentialParams::validate() const {
    if (W.rows() < 1 || W.cols() < 1) throw ShapeError("potential needs hidden >= 1 and dim >= 1");
    if (b.size() != W.rows() || a.size() != W.rows()) {
        throw ShapeError("potential bias/output sizes do not match hidden width " + std::to_string(W.rows()));
    }
    if (!W.allFinite() || !b.allFinite() || !a.allFinite() || !std::isfinite(c)) {
        throw NumericError("potential parameters contain non-finite entries");
    }
}

void PotentialParams::set_zero() {
    W.setZero();
    b.setZero();
    a.setZero();
    c = 0.0;
}

Vector PotentialParams::to_vector() const {
    Vector flat(size());
    flat << Eigen::Map<const Vector>(W.data(), W.size()), b, a, c;
    return flat;
}

void PotentialParams::assign(const Vector& flat) {
    if (flat.size() != size()) throw ShapeError("flat parameter vector has the wrong length");
    Eigen::Index at = 0;
    Eigen::Map<Vector>(W.data(), W.size()) = flat.segment(at, W.size());
    at += W.size();
    b = flat.segment(at, b.size());
    at += b.size();
    a = flat.segment(at, a.size());
    at += a.size();
    c = flat[at];
}

PotentialParams& PotentialParams::operator+=(const PotentialParams& other) {
    W += other.W;
    b += other.b;
    a += other.a;
    c += other.c;
    return *this;
}

PotentialParams& PotentialParams::operator*=(double s) {
    W *= s;
    b *= s;
    a *= s;
    c *= s;
    return *this;
}

PotentialParams init_params(Eigen::Index hidden, Eigen::Index dim, Rng& rng) {
    PotentialParams p(hidden, dim);
    std::uniform_real_distribution<double> w_dist(-1.0 / std::sqrt(double(dim)), 1.0 / std::sqrt(double(dim)));
    std::uniform_real_distribution<double> a_dist(-1.0 / std::sqrt(double(hidden)), 1.0 / std::sqrt(double(hidden)));
    for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index k = 0; k < hidden; ++k) p.W(k, j) = w_dist(rng);
    for (Eigen::Index k = 0; k < hidden; ++k) p.a[k] = a_dist(rng);
    return p;
}

PotentialEval eval(const PotentialParams& params, const Vector& x) {
    require_dim(params, x.size(), "input point");
    const Eigen::Index h = params.hidden();
    const Eigen::Index n = params.dim();

    // Plain loops with a fixed accumulation order so that eval_batch, which
    // loops over this function, is bitwise identical per row.
    PotentialEval out;
    out.grad = Vector::Zero(n);
    double value = params.c;
    double lap = 0.0;
    for (Eigen::Index k = 0; k < h; ++k) {
        double z = params.b[k];
        double norm2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            z += params.W(k, i) * x[i];
            norm2 += params.W(k, i) * params.W(k, i);
        }
        const double s1 = logistic(z);
        const double s2 = s1 * (1.0 - s1);
        value += params.a[k] * softplus(z);
        lap += params.a[k] * s2 * norm2;
        const double coef = params.a[k] * s1;
        for (Eigen::Index i = 0; i < n; ++i) out.grad[i] += coef * params.W(k, i);
    }
    out.value = value;
    out.laplacian = lap;
    if (!std::isfinite(value)) throw NumericError("non-finite potential value");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(out.grad[i])) {
            throw NumericError("non-finite potential gradient at component " + std::to_string(i));
        }
    }
    if (!std::isfinite(lap)) throw NumericError("non-finite potential Laplacian");
    return out;
}

BatchEval eval_batch(const PotentialParams& params, const Matrix& X) {
    require_dim(params, X.rows(), "input batch");
    BatchEval out;
    out.value.resize(X.cols());
    out.grad.resize(X.rows(), X.cols());
    out.laplacian.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        PotentialEval e = eval(params, X.col(j));
        out.value[j] = e.value;
        out.grad.col(j) = e.grad;
        out.laplacian[j] = e.laplacian;
    }
    return out;
}

void eval_drift(const PotentialParams& params, const Matrix& X, Matrix& grad, Vector& laplacian) {
    require_dim(params, X.rows(), "input batch");
    const Activations act = activate(params, X);
    const Vector row_norm2 = params.W.rowwise().squaredNorm();
    const Vector weight = params.a.cwiseProduct(row_norm2);
    grad.noalias() = params.W.transpose() * (act.s1.array().colwise() * params.a.array()).matrix();
    laplacian.noalias() = act.s2.transpose() * weight;
    check_finite(X, grad, laplacian);
}

void pullback_batch(const PotentialParams& params, const Matrix& X, const Matrix& grad_cot,
                    const Vector& lap_cot, Matrix& x_cot, PotentialParams* param_cot) {
    require_dim(params, X.rows(), "input batch");
    if (grad_cot.rows() != X.rows() || grad_cot.cols() != X.cols() || lap_cot.size() != X.cols()) {
        throw ShapeError("pullback cotangents do not match the input batch");
    }
    const Activations act = activate(params, X);
    const Vector row_norm2 = params.W.rowwise().squaredNorm();
    const Vector weight = params.a.cwiseProduct(row_norm2);
    const Matrix s3 = act.s2.array() * (1.0 - 2.0 * act.s1.array());

    // U_kj = W_k . g_j
    Matrix u;
    u.noalias() = params.W * grad_cot;

    // dF/dz_kj = a_k s2_kj u_kj + w_lap_j a_k |W_k|^2 s3_kj
    Matrix delta = (act.s2.array() * u.array()).colwise() * params.a.array();
    delta.array() += (s3.array().colwise() * weight.array()).rowwise() * lap_cot.transpose().array();

    x_cot.noalias() = params.W.transpose() * delta;

    if (param_cot != nullptr) {
        const Matrix a_s1 = act.s1.array().colwise() * params.a.array();
        const Vector s2_lap = act.s2 * lap_cot;  // sum_j s2_kj w_lap_j
        param_cot->W.noalias() += delta * X.transpose();
        param_cot->W.noalias() += a_s1 * grad_cot.transpose();
        param_cot->W += (2.0 * params.a.cwiseProduct(s2_lap)).asDiagonal() * params.W;
        param_cot->b += delta.rowwise().sum();
        param_cot->a += (act.s1.array() * u.array()).matrix().rowwise().sum();
        param_cot->a += row_norm2.cwiseProduct(s2_lap);
    }
}

ParamVjp param_vjp(const PotentialParams& params, const Vector& x, const Vector& w_grad, double w_lap) {
    require_dim(params, x.size(), "input point");
    require_dim(params, w_grad.size(), "gradient weight");
    ParamVjp out{PotentialParams(params.hidden(), params.dim()), Vector()};
    Matrix x_cot;
    Vector lap_cot(1);
    lap_cot[0] = w_lap;
    pullback_batch(params, x, w_grad, lap_cot, x_cot, &out.params);
    out.x = x_cot.col(0);
    if (!out.params.W.allFinite() || !out.params.b.allFinite() || !out.params.a.allFinite() || !out.x.allFinite()) {
        throw NumericError("non-finite parameter cotangent");
    }
    return out;
}

std::uint64_t fingerprint(const PotentialParams& params) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const double* data, Eigen::Index n) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < std::size_t(n) * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    const double shape[2] = {double(params.hidden()), double(params.dim())};
    mix(shape, 2);
    mix(params.W.data(), params.W.size());
    mix(params.b.data(), params.b.size());
    mix(params.a.data(), params.a.size());
    mix(&params.c, 1);
    return h;
}

void write_params(std::ostream& out, const PotentialParams& params) {
    out.write("MAPOT", 5);
    binary::write_u32(out, kParamsFormatVersion);
    binary::write_u64(out, std::uint64_t(params.dim()));
    binary::write_u64(out, std::uint64_t(params.hidden()));
    for (Eigen::Index i = 0; i < params.W.size(); ++i) binary::write_f64(out, params.W.data()[i]);
    for (Eigen::Index i = 0; i < params.b.size(); ++i) binary::write_f64(out, params.b[i]);
    for (Eigen::Index i = 0; i < params.a.size(); ++i) binary::write_f64(out, params.a[i]);
    binary::write_f64(out, params.c);
}

PotentialParams read_params(std::istream& in) {
    char tag[5];
    binary::read_exact(in, tag, 5, "params tag");
    if (std::memcmp(tag, "MAPOT", 5) != 0) throw FormatError("params section tag mismatch");
    const auto version = binary::read_u32(in, "params version");
    if (version != kParamsFormatVersion) {
        throw FormatError("unsupported params format version " + std::to_string(version));
    }
    const auto dim = binary::read_u64(in, "params dim");
    const auto hidden = binary::read_u64(in, "params hidden");
    if (dim == 0 || hidden == 0 || dim > (1u << 24) || hidden > (1u << 24)) {
        throw FormatError("implausible params shape");
    }
    PotentialParams p{Eigen::Index(hidden), Eigen::Index(dim)};
    for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = binary::read_f64(in, "params W");
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b[i] = binary::read_f64(in, "params b");
    for (Eigen::Index i = 0; i < p.a.size(); ++i) p.a[i] = binary::read_f64(in, "params a");
    p.c = binary::read_f64(in, "params c");
    p.validate();
    return p;
}

}  // namespace maflow
