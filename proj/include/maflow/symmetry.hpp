#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "maflow/field.hpp"

namespace maflow {

/// Signed permutation: (g x)_i = sign * x_{perm[i]}.
struct SymmetryElement {
    std::vector<Eigen::Index> perm;
    int sign = 1;

    bool operator==(const SymmetryElement&) const = default;
    auto operator<=>(const SymmetryElement&) const = default;
};

SymmetryElement identity_element(Eigen::Index dim);
SymmetryElement inverse(const SymmetryElement& g);

/// (compose(g, h)) x == g (h x)
SymmetryElement compose(const SymmetryElement& g, const SymmetryElement& h);

/// Throws ConfigError if the element is not a bijection of {0..dim-1} or the
/// sign is not +-1.
void validate_element(const SymmetryElement& g, Eigen::Index dim);

Vector apply(const SymmetryElement& g, const Vector& x);
Matrix apply(const SymmetryElement& g, const Matrix& X);

/// Transpose action on column vectors: apply_transpose(g, apply(g, x)) == x.
Matrix apply_transpose(const SymmetryElement& g, const Matrix& Y);

class SymmetryGroup {
public:
    SymmetryGroup() = default;

    /// Validates every element and requires the identity to be present.
    SymmetryGroup(Eigen::Index dim, std::vector<SymmetryElement> elements);

    Eigen::Index dim() const { return dim_; }
    std::size_t size() const { return elements_.size(); }
    const SymmetryElement& operator[](std::size_t i) const { return elements_[i]; }
    const std::vector<SymmetryElement>& elements() const { return elements_; }

private:
    Eigen::Index dim_ = 0;
    std::vector<SymmetryElement> elements_;
};

SymmetryGroup trivial_group(Eigen::Index dim);

/// Identity and global spin inversion.
SymmetryGroup z2_group(Eigen::Index dim);

/// Spin inversion x lattice translations x D4 on a periodic L x L lattice,
/// site (r, c) stored at index r * L + c. Elements are enumerated as
/// sign-major, then translation (dr, dc), then the eight D4 maps. Coinciding
/// elements (only on L = 2) are kept once, at first occurrence.
SymmetryGroup ising_group(int L);

/// Resolve a group by its config name: "none", "z2" or "ising-full".
/// The lattice side is needed for "ising-full" and must satisfy L * L == dim.
SymmetryGroup make_group(const std::string& name, Eigen::Index dim, int lattice_side);

enum class SymmetryMode { full_average, sampled };

/// phi(x) = (1/|G|) sum_g phi~(g x) for full averaging; in sampled mode the
/// variant index selects the single term g that is evaluated.
class SymmetrizedField final : public VelocityField {
public:
    SymmetrizedField(const PotentialParams& params, const SymmetryGroup& group, SymmetryMode mode);

    Eigen::Index dim() const override { return params_.dim(); }
    std::size_t variant_count() const override;
    void drift(std::size_t variant, const Matrix& X, Matrix& grad, Vector& laplacian) const override;
    void pullback(std::size_t variant, const Matrix& X, const Matrix& grad_cot, const Vector& lap_cot, Matrix& x_cot,
                  PotentialParams* param_cot) const override;
    PotentialParams zero_cotangent() const override { return PotentialParams(params_.hidden(), params_.dim()); }
    std::uint64_t fingerprint() const override;

    SymmetryMode mode() const { return mode_; }
    const SymmetryGroup& group() const { return group_; }

private:
    void term_drift(const SymmetryElement& g, const Matrix& X, Matrix& grad, Vector& laplacian) const;

    const PotentialParams& params_;
    const SymmetryGroup& group_;
    SymmetryMode mode_;
};

/// Symmetrized value, gradient and Laplacian at a single point. Sampled mode
/// draws g uniformly from rng; element_out, when given, receives its index.
PotentialEval symmetrized_eval(const PotentialParams& params, const SymmetryGroup& group, const Vector& x,
                               SymmetryMode mode, Rng* rng = nullptr, std::size_t* element_out = nullptr);

}  // namespace maflow
