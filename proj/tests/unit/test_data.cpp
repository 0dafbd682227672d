#include <cmath>
#include <fstream>
#include <numeric>

#include "maflow/data.hpp"
#include "maflow/errors.hpp"
#include "support.hpp"

using namespace maflow;

namespace {

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
}

}  // namespace

TEST_CASE("IDX round trip and errors") {
    const auto dir = test::scratch_dir("idx");
    // Two 2x3 images with distinctive bytes.
    Dataset raw{Matrix(6, 2), Space::raw};
    for (int i = 0; i < 12; ++i) raw.X.data()[i] = double((i * 37 + 5) % 256);
    const auto img = (dir / "img.idx").string();
    const auto lab = (dir / "lab.idx").string();
    write_idx_images(img, raw, 2, 3);
    write_idx_labels(lab, {7, 3});
    const auto loaded = load_idx(img, lab);
    CHECK(loaded.images.X == raw.X);
    CHECK(loaded.images.space == Space::raw);
    CHECK(*loaded.labels == std::vector<std::uint8_t>{7, 3});
    CHECK(is_idx_file(img));
    CHECK_FALSE(is_idx_file(lab));

    const auto again = (dir / "again.idx").string();
    write_idx_images(again, loaded.images, 2, 3);
    CHECK(read_bytes(again) == read_bytes(img));
    const std::string bytes = read_bytes(img);
    CHECK(bytes.size() == 16 + 12);
    CHECK(bytes.substr(0, 4) == std::string("\0\0\x08\x03", 4));

    write_bytes((dir / "empty").string(), "");
    CHECK_THROWS_AS(load_idx((dir / "empty").string()), FormatError);
    write_bytes((dir / "short").string(), bytes.substr(0, 20));
    try {
        load_idx((dir / "short").string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset 20") != std::string::npos);
    }
    write_bytes((dir / "magic").string(), std::string("\0\0\x08\x01", 4) + bytes.substr(4));
    CHECK_THROWS_AS(load_idx((dir / "magic").string()), FormatError);
    write_bytes((dir / "hdr").string(), bytes.substr(0, 10));
    CHECK_THROWS_AS(load_idx((dir / "hdr").string()), FormatError);
    CHECK_THROWS_AS(load_idx((dir / "missing").string()), FormatError);
    CHECK_THROWS_AS(write_idx_images((dir / "x").string(), Dataset{Matrix::Constant(6, 1, 0.5), Space::raw}, 2, 3),
                    FormatError);
}

TEST_CASE("dequantization") {
    Dataset raw{Matrix(2, 1000), Space::raw};
    raw.X.row(0).setConstant(0.0);
    raw.X.row(1).setConstant(255.0);
    Rng a(1), b(1);
    const auto d = dequantize(raw, a);
    CHECK(d.space == Space::unit_interval);
    CHECK(d.X.row(0).minCoeff() >= 0.0);
    CHECK(d.X.row(0).maxCoeff() < 1.0 / 256.0);
    CHECK(d.X.row(1).minCoeff() >= 255.0 / 256.0);
    CHECK(d.X.row(1).maxCoeff() < 1.0);
    CHECK(dequantize(raw, b).X == d.X);
}

TEST_CASE("logit transform") {
    Dataset unit{Matrix(3, 1), Space::unit_interval};
    unit.X << 0.5, 0.0, 0.9;
    const auto r = logit_transform(unit);
    CHECK(r.data.X(0, 0) == 0.0);
    CHECK(r.data.X(1, 0) == doctest::Approx(-13.815509557963773).epsilon(1e-12));
    const auto back = inverse_logit_transform(r.data);
    CHECK((back.X - unit.X).cwiseAbs().maxCoeff() < 1e-12);

    // log-det equals the sum of log derivatives, checked by differences
    unit.X << 0.5, 0.02, 0.9;
    const auto r2 = logit_transform(unit);
    double want = 0.0;
    for (Eigen::Index p = 0; p < 3; ++p) {
        Dataset up = unit, down = unit;
        const double h = 1e-7;
        const double x = unit.X(p, 0);
        up.X(p, 0) = std::min(x + h, 1.0);
        down.X(p, 0) = std::max(x - h, 0.0);
        want += std::log((logit_transform(up).data.X(p, 0) - logit_transform(down).data.X(p, 0)) /
                         (up.X(p, 0) - down.X(p, 0)));
    }
    CHECK(r2.log_det[0] == doctest::Approx(want).epsilon(1e-6));

    unit.X(2, 0) = 1.5;
    CHECK_THROWS_AS(logit_transform(unit), ShapeError);
    CHECK_THROWS_AS(logit_transform(Dataset{Matrix::Zero(1, 1), Space::unit_interval}, 0.0), ConfigError);
}

TEST_CASE("toy densities") {
    SUBCASE("mixture entropy floor") {
        // grid quadrature reference from tests/oracles/frozen_values.py
        CHECK(std::abs(toy_entropy("mixture-of-8") - 0.312148422101) < 1e-6);
    }
    SUBCASE("densities are normalized") {
        for (const std::string name : {"mixture-of-8", "ring", "two-moons"}) {
            const double h = 0.04;
            double mass = 0.0;
            Matrix pts(2, 1);
            for (double x = -3.0; x <= 3.0; x += h) {
                for (double y = -3.0; y <= 3.0; y += h) {
                    pts << x, y;
                    mass += std::exp(toy_log_density(name, pts)[0]);
                }
            }
            CHECK_MESSAGE(std::abs(mass * h * h - 1.0) < 1e-3, name);
        }
    }
    SUBCASE("samples follow the stated density") {
        // E[-ln p(x)] under the sampler equals the quadrature entropy.
        for (const std::string name : {"mixture-of-8", "ring", "two-moons"}) {
            Rng rng(4);
            const auto d = toy_density(name, 20000, rng);
            const Vector nlp = -toy_log_density(name, d.X);
            const double mean = nlp.mean();
            const double se = std::sqrt((nlp.array() - mean).square().sum() / (nlp.size() - 1) / nlp.size());
            CHECK_MESSAGE(std::abs(mean - toy_entropy(name)) < 4 * se, name);
        }
    }
    SUBCASE("ring radius is concentrated") {
        Rng rng(5);
        const auto d = toy_density("ring", 5000, rng);
        const Vector r = d.X.colwise().norm();
        CHECK((r.array() - 2.0).abs().maxCoeff() < 0.6);
        CHECK((r.array() - 2.0).abs().mean() == doctest::Approx(0.1 * std::sqrt(2.0 / M_PI)).epsilon(0.05));
    }
    SUBCASE("seeded reproducibility and errors") {
        Rng a(6), b(6);
        CHECK(toy_density("two-moons", 50, a).X == toy_density("two-moons", 50, b).X);
        CHECK_THROWS_AS(toy_density("spiral", 1, a), ConfigError);
        CHECK_THROWS_AS(toy_entropy("spiral"), ConfigError);
    }
}

TEST_CASE("batching helpers") {
    Rng a(7), b(7);
    const auto idx = shuffled_indices(100, a);
    CHECK(idx == shuffled_indices(100, b));
    auto sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
    Matrix X(1, 5);
    X << 0, 1, 2, 3, 4;
    const Matrix g = gather_columns(X, {4, 2, 0, 1, 3}, 1, 3);
    CHECK(g(0, 0) == 2.0);
    CHECK(g(0, 1) == 0.0);
}

TEST_CASE("CSV") {
    const auto dir = test::scratch_dir("csv");
    Rng rng(8);
    const Matrix X = test::gaussian_matrix(3, 10, rng);
    const auto path = (dir / "x.csv").string();
    write_csv(path, X);
    CHECK(read_csv(path) == X);
    write_csv(path, X, {"x0", "x1", "x2"});
    CHECK(read_csv(path) == X);

    write_bytes(path, "1,2\n# comment\n3,4\n5,oops\n");
    try {
        read_csv(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("row 4") != std::string::npos);
    }
    write_bytes(path, "1,2\n3\n");
    CHECK_THROWS_AS(read_csv(path), FormatError);
    write_bytes(path, "");
    CHECK_THROWS_AS(read_csv(path), FormatError);
}
