#include "maflow/symmetry.hpp"

#include <array>
#include <set>
#include <string>

#include "maflow/errors.hpp"

namespace maflow {

SymmetryElement identity_element(Eigen::Index dim) {
    SymmetryElement g;
    g.perm.resize(std::size_t(dim));
    for (Eigen::Index i = 0; i < dim; ++i) g.perm[std::size_t(i)] = i;
    return g;
}

SymmetryElement inverse(const SymmetryElement& g) {
    SymmetryElement inv;
    inv.perm.resize(g.perm.size());
    for (std::size_t i = 0; i < g.perm.size(); ++i) inv.perm[std::size_t(g.perm[i])] = Eigen::Index(i);
    inv.sign = g.sign;
    return inv;
}

SymmetryElement compose(const SymmetryElement& g, const SymmetryElement& h) {
    // (g (h x))_i = sg * (h x)_{pg(i)} = sg * sh * x_{ph(pg(i))}
    SymmetryElement out;
    out.perm.resize(g.perm.size());
    for (std::size_t i = 0; i < g.perm.size(); ++i) out.perm[i] = h.perm[std::size_t(g.perm[i])];
    out.sign = g.sign * h.sign;
    return out;
}

void validate_element(const SymmetryElement& g, Eigen::Index dim) {
    if (Eigen::Index(g.perm.size()) != dim) {
        throw ConfigError("symmetry element acts on " + std::to_string(g.perm.size()) + " sites, expected " +
                          std::to_string(dim));
    }
    if (g.sign != 1 && g.sign != -1) throw ConfigError("symmetry element sign must be +1 or -1");
    std::vector<bool> seen(std::size_t(dim), false);
    for (auto p : g.perm) {
        if (p < 0 || p >= dim) throw ConfigError("permutation index " + std::to_string(p) + " out of range");
        if (seen[std::size_t(p)]) throw ConfigError("permutation repeats index " + std::to_string(p));
        seen[std::size_t(p)] = true;
    }
}

Vector apply(const SymmetryElement& g, const Vector& x) {
    if (Eigen::Index(g.perm.size()) != x.size()) throw ShapeError("symmetry element and vector differ in size");
    Vector y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const auto p = g.perm[std::size_t(i)];
        if (p < 0 || p >= x.size()) throw ConfigError("permutation index out of range");
        y[i] = g.sign * x[p];
    }
    return y;
}

Matrix apply(const SymmetryElement& g, const Matrix& X) {
    if (Eigen::Index(g.perm.size()) != X.rows()) throw ShapeError("symmetry element and batch differ in size");
    Matrix Y(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto p = g.perm[std::size_t(i)];
        if (p < 0 || p >= X.rows()) throw ConfigError("permutation index out of range");
        Y.row(i) = double(g.sign) * X.row(p);
    }
    return Y;
}

Matrix apply_transpose(const SymmetryElement& g, const Matrix& Y) {
    Matrix X(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < Y.rows(); ++i) X.row(g.perm[std::size_t(i)]) = double(g.sign) * Y.row(i);
    return X;
}

SymmetryGroup::SymmetryGroup(Eigen::Index dim, std::vector<SymmetryElement> elements)
    : dim_(dim), elements_(std::move(elements)) {
    if (elements_.empty()) throw ConfigError("symmetry group is empty");
    const auto id = identity_element(dim);
    bool has_identity = false;
    for (const auto& g : elements_) {
        validate_element(g, dim);
        has_identity = has_identity || g == id;
    }
    if (!has_identity) throw ConfigError("symmetry group lacks the identity element");
}

SymmetryGroup trivial_group(Eigen::Index dim) { return SymmetryGroup(dim, {identity_element(dim)}); }

SymmetryGroup z2_group(Eigen::Index dim) {
    auto flip = identity_element(dim);
    flip.sign = -1;
    return SymmetryGroup(dim, {identity_element(dim), flip});
}

SymmetryGroup ising_group(int L) {
    if (L < 2) throw ConfigError("Ising lattice side must be at least 2");
    const Eigen::Index n = Eigen::Index(L) * L;
    auto site = [L](int r, int c) { return Eigen::Index(((r % L + L) % L) * L + (c % L + L) % L); };

    // The eight maps of the square: rotations by 0/90/180/270 degrees, each
    // optionally preceded by a mirror in the column index.
    auto d4 = [L](int k, int r, int c) {
        if (k >= 4) c = L - 1 - c;
        for (int q = 0; q < k % 4; ++q) {
            const int nr = c;
            const int nc = L - 1 - r;
            r = nr;
            c = nc;
        }
        return std::array<int, 2>{r, c};
    };

    std::vector<SymmetryElement> elements;
    std::set<SymmetryElement> seen;
    for (int sign : {1, -1}) {
        for (int dr = 0; dr < L; ++dr) {
            for (int dc = 0; dc < L; ++dc) {
                for (int k = 0; k < 8; ++k) {
                    SymmetryElement g;
                    g.sign = sign;
                    g.perm.resize(std::size_t(n));
                    for (int r = 0; r < L; ++r) {
                        for (int c = 0; c < L; ++c) {
                            const auto [rr, cc] = d4(k, r, c);
                            g.perm[std::size_t(site(r, c))] = site(rr + dr, cc + dc);
                        }
                    }
                    if (seen.insert(g).second) elements.push_back(std::move(g));
                }
            }
        }
    }
    return SymmetryGroup(n, std::move(elements));
}

SymmetryGroup make_group(const std::string& name, Eigen::Index dim, int lattice_side) {
    if (name == "none") return trivial_group(dim);
    if (name == "z2") return z2_group(dim);
    if (name == "ising-full") {
        if (Eigen::Index(lattice_side) * lattice_side != dim) {
            throw ConfigError("ising-full symmetry needs dim == L*L (dim " + std::to_string(dim) + ", L " +
                              std::to_string(lattice_side) + ")");
        }
        return ising_group(lattice_side);
    }
    throw ConfigError("unknown symmetry group '" + name + "' (expected none, z2 or ising-full)");
}

SymmetrizedField::SymmetrizedField(const PotentialParams& params, const SymmetryGroup& group, SymmetryMode mode)
    : params_(params), group_(group), mode_(mode) {
    if (group.size() == 0) throw ConfigError("symmetry group is empty");
    if (group.dim() != params.dim()) throw ShapeError("symmetry group and potential differ in dimension");
}

std::size_t SymmetrizedField::variant_count() const {
    return mode_ == SymmetryMode::sampled ? group_.size() : 1;
}

void SymmetrizedField::term_drift(const SymmetryElement& g, const Matrix& X, Matrix& grad, Vector& laplacian) const {
    // grad_x phi~(g x) = g^T grad phi~(y); the Laplacian is invariant under
    // signed permutations.
    Matrix grad_y;
    eval_drift(params_, apply(g, X), grad_y, laplacian);
    grad = apply_transpose(g, grad_y);
}

void SymmetrizedField::drift(std::size_t variant, const Matrix& X, Matrix& grad, Vector& laplacian) const {
    if (mode_ == SymmetryMode::sampled) {
        if (variant >= group_.size()) throw ShapeError("symmetry variant " + std::to_string(variant) + " out of range");
        term_drift(group_[variant], X, grad, laplacian);
        return;
    }
    grad = Matrix::Zero(X.rows(), X.cols());
    laplacian = Vector::Zero(X.cols());
    Matrix g_term;
    Vector l_term;
    for (const auto& g : group_.elements()) {
        term_drift(g, X, g_term, l_term);
        grad += g_term;
        laplacian += l_term;
    }
    const double inv = 1.0 / double(group_.size());
    grad *= inv;
    laplacian *= inv;
}

void SymmetrizedField::pullback(std::size_t variant, const Matrix& X, const Matrix& grad_cot, const Vector& lap_cot,
                                Matrix& x_cot, PotentialParams* param_cot) const {
    auto term = [&](const SymmetryElement& g, double scale, Matrix& x_term, PotentialParams* p_term) {
        Matrix y_cot;
        pullback_batch(params_, apply(g, X), scale * apply(g, grad_cot), scale * lap_cot, y_cot, p_term);
        x_term = apply_transpose(g, y_cot);
    };
    if (mode_ == SymmetryMode::sampled) {
        if (variant >= group_.size()) throw ShapeError("symmetry variant " + std::to_string(variant) + " out of range");
        term(group_[variant], 1.0, x_cot, param_cot);
        return;
    }
    const double inv = 1.0 / double(group_.size());
    x_cot = Matrix::Zero(X.rows(), X.cols());
    Matrix x_term;
    for (const auto& g : group_.elements()) {
        term(g, inv, x_term, param_cot);
        x_cot += x_term;
    }
}

std::uint64_t SymmetrizedField::fingerprint() const {
    std::uint64_t h = maflow::fingerprint(params_);
    h ^= 0x9e3779b97f4a7c15ull * (group_.size() + 1);
    h ^= mode_ == SymmetryMode::sampled ? 0x5bd1e995ull : 0x27d4eb2full;
    return h;
}

PotentialEval symmetrized_eval(const PotentialParams& params, const SymmetryGroup& group, const Vector& x,
                               SymmetryMode mode, Rng* rng, std::size_t* element_out) {
    if (group.size() == 0) throw ConfigError("symmetry group is empty");
    if (x.size() != params.dim() || group.dim() != params.dim()) {
        throw ShapeError("symmetrized_eval: dimension mismatch");
    }
    auto term = [&](const SymmetryElement& g) {
        PotentialEval e = eval(params, apply(g, x));
        e.grad = apply_transpose(g, e.grad);
        return e;
    };
    if (mode == SymmetryMode::sampled) {
        if (rng == nullptr) throw ConfigError("sampled symmetrization needs a random stream");
        std::uniform_int_distribution<std::size_t> pick(0, group.size() - 1);
        const std::size_t k = pick(*rng);
        if (element_out != nullptr) *element_out = k;
        return term(group[k]);
    }
    PotentialEval out{0.0, Vector::Zero(x.size()), 0.0};
    for (const auto& g : group.elements()) {
        const PotentialEval e = term(g);
        out.value += e.value;
        out.grad += e.grad;
        out.laplacian += e.laplacian;
    }
    const double inv = 1.0 / double(group.size());
    out.value *= inv;
    out.grad *= inv;
    out.laplacian *= inv;
    return out;
}

}  // namespace maflow
