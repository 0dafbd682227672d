#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <numbers>

#include "maflow/errors.hpp"
#include "maflow/symmetry.hpp"
#include "maflow/targets.hpp"
#include "oracles/ising_enumeration.hpp"
#include "support.hpp"

using namespace maflow;
using maflow::test::gray_code_log_z;

namespace {

// Reference values from tests/oracles/frozen_values.py (NumPy enumeration).
constexpr double kAlphaCritical = 1.862747174039086;
constexpr double kNegLogZ2 = -9.1254415456399123;
constexpr double kLogDet2 = 0.22951030461789723;
constexpr double kLogZIsing2 = 8.1075209827520549;
constexpr double kNegLogZ4 = -37.376731689944002;
constexpr double kLogDet4 = 6.6803543931208029;

}  // namespace

TEST_CASE("base log density") {
    CHECK(base_log_density(Vector::Zero(1)) == doctest::Approx(-0.9189385332).epsilon(1e-10));
    CHECK(base_log_density(Vector::Zero(2)) == doctest::Approx(-1.8378770664).epsilon(1e-10));
    const Vector x = (Vector(3) << 0.3, -1.2, 2.0).finished();
    CHECK(base_log_density(x) == base_log_density(Vector(-x)));
    const Matrix X = x;
    CHECK(base_log_density_batch(X)[0] == doctest::Approx(base_log_density(x)).epsilon(1e-15));
}

TEST_CASE("Ising construction") {
    const double beta = critical_coupling();
    CHECK(beta == doctest::Approx(0.44068679350977147).epsilon(1e-15));
    const auto s2 = ising_spec(2, beta);
    CHECK(std::abs(s2.alpha - kAlphaCritical) < 1e-14);
    CHECK(std::abs(s2.alpha - 1.86274717) < 1e-8);
    // each neighbour pair on the 2x2 torus is bonded twice
    CHECK(s2.K(0, 1) == doctest::Approx(2 * beta).epsilon(1e-15));
    CHECK(s2.K(0, 3) == 0.0);
    for (int L : {2, 4}) {
        const auto spec = ising_spec(L, beta);
        CHECK(spec.K.isApprox(spec.K.transpose(), 0.0));
        CHECK((spec.K.rowwise().sum().array() - 4 * beta).abs().maxCoeff() < 1e-14);
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.Kplus);
        CHECK(std::abs(eig.eigenvalues().minCoeff() - kIsingMinEigenvalue) < 1e-10);
        CHECK(std::abs(eig.eigenvalues().array().log().sum() - spec.log_det) < 1e-10);
    }
    CHECK_THROWS_AS(ising_spec(3, beta), ConfigError);
    CHECK_THROWS_AS(ising_spec(1, beta), ConfigError);
}

TEST_CASE("Ising energy and force") {
    Rng rng(1);
    const auto spec = ising_spec(4, critical_coupling());
    CHECK(ising_energy(spec, Vector::Zero(16)) == 0.0);
    const auto G = ising_group(4);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector x = test::gaussian_matrix(16, 1, rng, 2.0).col(0);
        const double e = ising_energy(spec, x);
        for (const auto& g : G.elements()) CHECK(test::rel_err(ising_energy(spec, apply(g, x)), e) < 1e-12);

        const Vector f = ising_force(spec, x);
        for (Eigen::Index i = 0; i < 16; ++i) {
            Vector up = x, down = x;
            up[i] += 1e-5;
            down[i] -= 1e-5;
            const double fd = (ising_energy(spec, up) - ising_energy(spec, down)) / 2e-5;
            CHECK(std::abs(f[i] - fd) <= 1e-6 * std::max(std::abs(fd), 1.0));
        }
    }
    // batch path agrees with the single-point path; large |x| stays finite
    Matrix X = test::gaussian_matrix(16, 3, rng);
    X(0, 2) = 800.0;
    Vector e;
    Matrix force;
    IsingEnergy(spec).evaluate(X, e, &force);
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK(e[j] == doctest::Approx(ising_energy(spec, X.col(j))).epsilon(1e-13));
        CHECK((force.col(j) - ising_force(spec, X.col(j))).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(std::isfinite(e[2]));
}

TEST_CASE("exact partition function") {
    const double beta = critical_coupling();
    SUBCASE("frozen reference values") {
        const auto p2 = exact_partition(ising_spec(2, beta));
        CHECK(std::abs(p2.log_z_ising - kLogZIsing2) < 1e-12);
        CHECK(std::abs(p2.log_det - kLogDet2) < 1e-12);
        CHECK(std::abs(p2.neg_log_z - kNegLogZ2) < 1e-12);
        const auto p4 = exact_partition(ising_spec(4, beta));
        CHECK(std::abs(p4.log_det - kLogDet4) < 1e-11);
        CHECK(std::abs(p4.neg_log_z - kNegLogZ4) < 1e-11);
    }
    SUBCASE("dual implementation") {
        for (int L : {2, 4}) {
            for (double b : {0.0, 0.2, beta, 0.7}) {
                const auto spec = ising_spec(L, b);
                CHECK(std::abs(exact_partition(spec).log_z_ising - gray_code_log_z(spec.Kplus)) < 1e-12);
            }
        }
    }
    SUBCASE("zero coupling closed form") {
        const auto spec = ising_spec(2, 0.0);
        CHECK(spec.alpha == doctest::Approx(0.1).epsilon(1e-15));
        const auto p = exact_partition(spec);
        CHECK(std::abs(p.log_z_ising - (std::log(16.0) + 2 * spec.alpha)) < 1e-13);
    }
    SUBCASE("zero coupling against direct quadrature of the continuous model") {
        // K = 0: the density factorizes into four copies of
        // exp(-x^2 / (2 alpha)) cosh(x).
        const auto spec = ising_spec(2, 0.0);
        const double h = 1e-3;
        double one_site = 0.0;
        for (double x = -8.0; x <= 8.0 + 1e-12; x += h) one_site += std::exp(-x * x / (2 * spec.alpha)) * std::cosh(x);
        one_site *= h;
        CHECK(std::abs(exact_neg_log_z(spec) - (-4.0 * std::log(one_site))) < 1e-9);
    }
    SUBCASE("large lattices are refused") { CHECK_THROWS_AS(exact_partition(ising_spec(6, beta)), ConfigError); }
}

TEST_CASE("spin sampler") {
    Rng rng(2);
    const int n = 100000;
    double m0 = 0.0, mh = 0.0;
    bool saturated = true;
    for (int k = 0; k < n; ++k) {
        const auto s = spin_sampler((Vector(3) << 0.0, 0.5, 10.0).finished(), rng);
        m0 += s[0];
        mh += s[1];
        saturated = saturated && s[2] == 1;
    }
    m0 /= n;
    mh /= n;
    CHECK(std::abs(m0) < 3.0 / std::sqrt(double(n)));
    const double mean = 0.46211715726000974;  // 2 logistic(1) - 1
    CHECK(std::abs(mh - mean) < 3.0 * std::sqrt((1 - mean * mean) / n));
    CHECK(saturated);
}

TEST_CASE("Gaussian flow oracle") {
    const auto o = gaussian_flow_oracle(0.5);
    CHECK(o.map_scale(0.0) == 1.0);
    CHECK(o.log_density(0.7, 0.0) == doctest::Approx(base_log_density(Vector::Constant(1, 0.7))).epsilon(1e-15));
    CHECK(o.map_scale(1.0) == doctest::Approx(1.6487212707001282).epsilon(1e-15));
    double mass = 0.0;
    const double h = 1e-3;
    for (double x = -20.0; x <= 20.0 + 1e-12; x += h) mass += std::exp(o.log_density(x, 1.0));
    CHECK(std::abs(mass * h - 1.0) < 1e-8);
}

TEST_CASE("NLL loss") {
    IntegratorConfig config;
    config.epsilon = 0.1;
    config.steps = 10;
    Rng rng(3);
    SUBCASE("zero potential") {
        PotentialParams p(3, 2);
        const NetworkField f(p);
        const Matrix X = test::gaussian_matrix(2, 9, rng);
        CHECK(nll_loss(f, X, config, nullptr, false).value == doctest::Approx(-base_log_density_batch(X).mean()).epsilon(1e-15));
    }
    SUBCASE("quadratic potential reaches the Gaussian entropy") {
        const QuadraticField f(0.5, 1);
        const Matrix X = test::gaussian_matrix(1, 100000, rng, std::exp(0.5));
        const auto r = nll_loss(f, X, config, nullptr, false);
        const double entropy = 0.5 * std::log(2 * std::numbers::pi * std::numbers::e) + 0.5;
        CHECK(std::abs(r.value - entropy) < 3 * r.std_error);
    }
    SUBCASE("permuting the batch leaves the loss unchanged") {
        const auto p = test::random_params(8, 2, rng);
        const NetworkField f(p);
        const Matrix X = test::gaussian_matrix(2, 6, rng);
        Matrix Y = X.rowwise().reverse();
        CHECK(nll_loss(f, X, config, nullptr, false).value ==
              doctest::Approx(nll_loss(f, Y, config, nullptr, false).value).epsilon(1e-14));
    }
}

TEST_CASE("variational loss") {
    IntegratorConfig config;
    config.epsilon = 0.1;
    config.steps = 10;
    Rng rng(4);
    PotentialParams zero(4, 3);
    const NetworkField f0(zero);
    SUBCASE("model equals target") {
        const GaussianEnergy normalized(3, 1.5 * std::log(2 * std::numbers::pi));
        const auto r = variational_loss(f0, normalized, 50, config, rng, false);
        CHECK(std::abs(r.value) < 1e-14);
    }
    SUBCASE("unnormalized Gaussian gives +ln Z") {
        const GaussianEnergy plain(3);
        const auto r = variational_loss(f0, plain, 50, config, rng, false);
        CHECK(r.value == doctest::Approx(-1.5 * std::log(2 * std::numbers::pi)).epsilon(1e-13));
    }
    SUBCASE("upper bound on the free energy") {
        const auto spec = ising_spec(2, critical_coupling());
        const IsingEnergy energy(spec);
        const double bound = exact_neg_log_z(spec);
        for (int trial = 0; trial < 10; ++trial) {
            const auto p = test::random_params(16, 4, rng, 1.0 + 0.2 * trial);
            const NetworkField f(p);
            const auto r = variational_loss(f, energy, 256, config, rng, false);
            CHECK(r.value > bound - 5 * r.std_error);
        }
        CHECK_THROWS_AS(variational_loss(f0, energy, 4, config, rng, false), ShapeError);
    }
}
