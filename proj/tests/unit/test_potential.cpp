#include <sstream>

#include "maflow/errors.hpp"
#include "maflow/potential.hpp"
#include "support.hpp"

using namespace maflow;
using maflow::test::rel_err;

namespace {

double value_at(const PotentialParams& p, Vector x) { return eval(p, x).value; }

}  // namespace

TEST_CASE("constant potential has zero drift") {
    PotentialParams p(3, 2);
    p.c = 5.0;
    const auto e = eval(p, Vector::Constant(2, 0.7));
    CHECK(e.value == 5.0);
    CHECK(e.grad.isZero(0.0));
    CHECK(e.laplacian == 0.0);
}

TEST_CASE("single unit at the origin") {
    PotentialParams p(1, 1);
    p.W(0, 0) = 1.0;
    p.a[0] = 1.0;
    const auto e = eval(p, Vector::Zero(1));
    CHECK(e.value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(e.grad[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(e.laplacian == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("gradient and laplacian match finite differences of the value") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = test::random_params(8, 3, rng, 1.5);
        const Vector x = test::gaussian_matrix(3, 1, rng).col(0);
        const auto e = eval(p, x);
        const double h1 = 1e-4, h2 = 1e-3;
        double trace = 0.0;
        for (int i = 0; i < 3; ++i) {
            Vector xp = x, xm = x;
            xp[i] += h1;
            xm[i] -= h1;
            const double fd = (value_at(p, xp) - value_at(p, xm)) / (2 * h1);
            CHECK(rel_err(e.grad[i], fd) < 1e-5);
            xp = x;
            xm = x;
            xp[i] += h2;
            xm[i] -= h2;
            trace += (value_at(p, xp) - 2 * e.value + value_at(p, xm)) / (h2 * h2);
        }
        CHECK(rel_err(e.laplacian, trace) < 1e-5);
    }
}

TEST_CASE("batch evaluation equals per-point evaluation bitwise") {
    Rng rng(5);
    const auto p = test::random_params(512, 16, rng);
    const Matrix X = test::gaussian_matrix(16, 64, rng);
    const auto batch = eval_batch(p, X);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const auto e = eval(p, X.col(j));
        CHECK(batch.value[j] == e.value);
        CHECK(batch.laplacian[j] == e.laplacian);
        CHECK((batch.grad.col(j).array() == e.grad.array()).all());
    }

    Matrix twin(16, 2);
    twin.col(0) = X.col(3);
    twin.col(1) = X.col(3);
    const auto t = eval_batch(p, twin);
    CHECK(t.value[0] == t.value[1]);
    CHECK(t.laplacian[0] == t.laplacian[1]);
}

TEST_CASE("drift hot path agrees with the reference evaluation") {
    Rng rng(6);
    const auto p = test::random_params(64, 5, rng);
    const Matrix X = test::gaussian_matrix(5, 9, rng);
    Matrix g;
    Vector lap;
    eval_drift(p, X, g, lap);
    const auto ref = eval_batch(p, X);
    CHECK((g - ref.grad).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lap - ref.laplacian).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shape and finiteness errors") {
    Rng rng(1);
    const auto p = test::random_params(4, 3, rng);
    CHECK_THROWS_AS(eval(p, Vector::Zero(2)), ShapeError);
    auto bad = p;
    bad.a[0] = std::nan("");
    CHECK_THROWS_AS(bad.validate(), NumericError);
    Matrix X = Matrix::Zero(3, 2);
    X(0, 1) = std::numeric_limits<double>::infinity();
    Matrix g;
    Vector lap;
    CHECK_THROWS_AS(eval_drift(p, X, g, lap), NumericError);
}

TEST_CASE("parameter VJP") {
    Rng rng(21);
    const auto p = test::random_params(6, 3, rng, 1.2);
    const Vector x = test::gaussian_matrix(3, 1, rng).col(0);

    SUBCASE("zero weights give zero cotangents") {
        const auto v = param_vjp(p, x, Vector::Zero(3), 0.0);
        CHECK(v.params.to_vector().isZero(0.0));
        CHECK(v.x.isZero(0.0));
    }

    SUBCASE("matches finite differences in every parameter and input") {
        const Vector wg = test::gaussian_matrix(3, 1, rng).col(0);
        const double wl = 0.7;
        auto F = [&](const PotentialParams& q, const Vector& y) {
            const auto e = eval(q, y);
            return wg.dot(e.grad) + wl * e.laplacian;
        };
        const auto v = param_vjp(p, x, wg, wl);
        CHECK(v.params.c == 0.0);
        const Vector theta = p.to_vector();
        const Vector analytic = v.params.to_vector();
        const double h = 1e-5;
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            PotentialParams qp = p, qm = p;
            Vector tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            qp.assign(tp);
            qm.assign(tm);
            const double fd = (F(qp, x) - F(qm, x)) / (2 * h);
            CHECK_MESSAGE(std::abs(analytic[k] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3), "coordinate ", k);
        }
        for (Eigen::Index i = 0; i < 3; ++i) {
            Vector xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (F(p, xp) - F(p, xm)) / (2 * h);
            CHECK(std::abs(v.x[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
        }
    }

    SUBCASE("batched pullback sums per-point VJPs") {
        const Matrix X = test::gaussian_matrix(3, 4, rng);
        const Matrix G = test::gaussian_matrix(3, 4, rng);
        const Vector lc = test::gaussian_matrix(4, 1, rng).col(0);
        Matrix xc;
        PotentialParams acc(6, 3);
        pullback_batch(p, X, G, lc, xc, &acc);
        PotentialParams want(6, 3);
        for (Eigen::Index j = 0; j < 4; ++j) {
            const auto v = param_vjp(p, X.col(j), G.col(j), lc[j]);
            want += v.params;
            CHECK((xc.col(j) - v.x).cwiseAbs().maxCoeff() < 1e-12);
        }
        CHECK((acc.to_vector() - want.to_vector()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("flat vector round trip and arithmetic") {
    Rng rng(2);
    const auto p = test::random_params(5, 2, rng);
    PotentialParams q(5, 2);
    q.assign(p.to_vector());
    CHECK(q.to_vector() == p.to_vector());
    CHECK(q.size() == 5 * 2 + 5 + 5 + 1);
    q += p;
    q *= 0.5;
    CHECK((q.to_vector() - p.to_vector()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(q.assign(Vector::Zero(3)), ShapeError);
}

TEST_CASE("params serialization") {
    Rng rng(3);
    const auto p = test::random_params(7, 3, rng);
    std::stringstream s1, s2;
    write_params(s1, p);
    const auto q = read_params(s1);
    CHECK(q.to_vector() == p.to_vector());
    write_params(s2, q);
    std::stringstream s3;
    write_params(s3, p);
    CHECK(s2.str() == s3.str());
    CHECK(fingerprint(p) == fingerprint(q));

    std::string truncated = s3.str().substr(0, 40);
    std::stringstream s4(truncated);
    CHECK_THROWS_AS(read_params(s4), FormatError);
}

TEST_CASE("fingerprint tracks parameter changes") {
    Rng rng(4);
    auto p = test::random_params(3, 2, rng);
    const auto before = fingerprint(p);
    p.b[1] = std::nextafter(p.b[1], 10.0);
    CHECK(fingerprint(p) != before);
}
