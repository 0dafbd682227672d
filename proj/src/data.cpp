#include "maflow/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "maflow/errors.hpp"

namespace maflow {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t be_u32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& path) {
    if (offset + 4 > buf.size()) {
        throw FormatError(path + ": truncated IDX header at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
           (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

void put_be_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {char((v >> 24) & 0xff), char((v >> 16) & 0xff), char((v >> 8) & 0xff), char(v & 0xff)};
    out.write(bytes, 4);
}

double normal_pdf(double x, double sigma) {
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

// Toy distribution parameters.
constexpr double kMixtureRadius = 2.0;
constexpr double kMixtureSigma = 0.1;
constexpr int kMixtureComponents = 8;
constexpr double kRingRadius = 2.0;
constexpr double kRingSigma = 0.1;
constexpr double kMoonsSigma = 0.1;
constexpr int kMoonsQuadrature = 500;

std::array<double, 2> moon_point(int moon, double theta) {
    if (moon == 0) return {std::cos(theta), std::sin(theta)};
    return {1.0 - std::cos(theta), 0.5 - std::sin(theta)};
}

double toy_density_at(const std::string& name, double x, double y) {
    if (name == "mixture-of-8") {
        double p = 0.0;
        for (int k = 0; k < kMixtureComponents; ++k) {
            const double ang = 2.0 * std::numbers::pi * k / kMixtureComponents;
            const double dx = x - kMixtureRadius * std::cos(ang);
            const double dy = y - kMixtureRadius * std::sin(ang);
            p += std::exp(-0.5 * (dx * dx + dy * dy) / (kMixtureSigma * kMixtureSigma));
        }
        return p / (2.0 * std::numbers::pi * kMixtureSigma * kMixtureSigma * kMixtureComponents);
    }
    if (name == "ring") {
        // radius rho = |R + sigma e|, angle uniform
        const double rho = std::hypot(x, y);
        if (rho < 1e-12) return 0.0;
        const double radial = normal_pdf(rho - kRingRadius, kRingSigma) + normal_pdf(rho + kRingRadius, kRingSigma);
        return radial / (2.0 * std::numbers::pi * rho);
    }
    if (name == "two-moons") {
        // Uniform arc parameter, equal moon weights, isotropic Gaussian noise;
        // the arc integral uses composite Simpson on [0, pi].
        const double h = std::numbers::pi / kMoonsQuadrature;
        double total = 0.0;
        for (int moon = 0; moon < 2; ++moon) {
            double acc = 0.0;
            for (int i = 0; i <= kMoonsQuadrature; ++i) {
                const auto m = moon_point(moon, i * h);
                const double w = (i == 0 || i == kMoonsQuadrature) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                const double dx = x - m[0];
                const double dy = y - m[1];
                acc += w * std::exp(-0.5 * (dx * dx + dy * dy) / (kMoonsSigma * kMoonsSigma));
            }
            total += 0.5 * (acc * h / 3.0) / std::numbers::pi;
        }
        return total / (2.0 * std::numbers::pi * kMoonsSigma * kMoonsSigma);
    }
    throw ConfigError("unknown toy density '" + name + "' (expected two-moons, ring or mixture-of-8)");
}

}  // namespace

IdxImages load_idx(const std::string& images_path, const std::optional<std::string>& labels_path) {
    const auto buf = read_file(images_path);
    if (buf.empty()) throw FormatError(images_path + ": empty file");
    const auto magic = be_u32(buf, 0, images_path);
    if (magic != kIdxImagesMagic) {
        std::ostringstream msg;
        msg << images_path << ": bad IDX image magic 0x" << std::hex << magic << " at byte offset 0";
        throw FormatError(msg.str());
    }
    const auto count = be_u32(buf, 4, images_path);
    const auto rows = be_u32(buf, 8, images_path);
    const auto cols = be_u32(buf, 12, images_path);
    const std::size_t pixels = std::size_t(rows) * cols;
    const std::size_t need = 16 + std::size_t(count) * pixels;
    if (buf.size() < need) {
        throw FormatError(images_path + ": truncated image data at byte offset " + std::to_string(buf.size()) +
                          " (expected " + std::to_string(need) + " bytes)");
    }
    IdxImages out;
    out.images.space = Space::raw;
    out.images.X.resize(Eigen::Index(pixels), Eigen::Index(count));
    for (std::size_t n = 0; n < count; ++n)
        for (std::size_t p = 0; p < pixels; ++p)
            out.images.X(Eigen::Index(p), Eigen::Index(n)) = double(buf[16 + n * pixels + p]);

    if (labels_path) {
        const auto lbuf = read_file(*labels_path);
        if (lbuf.empty()) throw FormatError(*labels_path + ": empty file");
        if (be_u32(lbuf, 0, *labels_path) != kIdxLabelsMagic) {
            throw FormatError(*labels_path + ": bad IDX label magic at byte offset 0");
        }
        const auto lcount = be_u32(lbuf, 4, *labels_path);
        if (lcount != count) throw FormatError(*labels_path + ": label count differs from image count");
        if (lbuf.size() < 8 + std::size_t(lcount)) {
            throw FormatError(*labels_path + ": truncated label data at byte offset " + std::to_string(lbuf.size()));
        }
        out.labels.emplace(lbuf.begin() + 8, lbuf.begin() + 8 + lcount);
    }
    return out;
}

void write_idx_images(const std::string& path, const Dataset& raw, std::uint32_t rows, std::uint32_t cols) {
    if (raw.dim() != Eigen::Index(rows) * cols) throw ShapeError("image shape does not match dataset dimension");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    put_be_u32(out, kIdxImagesMagic);
    put_be_u32(out, std::uint32_t(raw.size()));
    put_be_u32(out, rows);
    put_be_u32(out, cols);
    for (Eigen::Index n = 0; n < raw.size(); ++n) {
        for (Eigen::Index p = 0; p < raw.dim(); ++p) {
            const double v = raw.X(p, n);
            if (v < 0.0 || v > 255.0 || v != std::floor(v)) throw FormatError("pixel value is not a byte");
            out.put(char(static_cast<unsigned char>(v)));
        }
    }
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    put_be_u32(out, kIdxLabelsMagic);
    put_be_u32(out, std::uint32_t(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
}

Dataset dequantize(const Dataset& raw, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // (255 + u) / 256 can round up to 1.0 for u close to 1.
    const double below_one = std::nextafter(1.0, 0.0);
    Dataset out{Matrix(raw.X.rows(), raw.X.cols()), Space::unit_interval};
    for (Eigen::Index n = 0; n < raw.X.cols(); ++n)
        for (Eigen::Index p = 0; p < raw.X.rows(); ++p)
            out.X(p, n) = std::min((raw.X(p, n) + u(rng)) / 256.0, below_one);
    return out;
}

LogitResult logit_transform(const Dataset& unit, double lambda) {
    if (!(lambda > 0.0 && lambda < 0.5)) throw ConfigError("logit padding must lie in (0, 0.5)");
    LogitResult out;
    out.data.space = Space::logit;
    out.data.X.resize(unit.X.rows(), unit.X.cols());
    out.log_det = Vector::Zero(unit.X.cols());
    const double scale = 1.0 - 2.0 * lambda;
    const double log_scale = std::log(scale);
    for (Eigen::Index n = 0; n < unit.X.cols(); ++n) {
        double ld = 0.0;
        for (Eigen::Index p = 0; p < unit.X.rows(); ++p) {
            const double x = unit.X(p, n);
            if (!(x >= 0.0 && x <= 1.0)) {
                throw ShapeError("logit transform expects values in [0, 1], sample " + std::to_string(n));
            }
            const double y = lambda + scale * x;
            out.data.X(p, n) = std::log(y) - std::log1p(-y);
            ld += log_scale - std::log(y) - std::log1p(-y);
        }
        out.log_det[n] = ld;
    }
    return out;
}

Dataset inverse_logit_transform(const Dataset& logit, double lambda) {
    Dataset out{Matrix(logit.X.rows(), logit.X.cols()), Space::unit_interval};
    const double scale = 1.0 - 2.0 * lambda;
    for (Eigen::Index n = 0; n < logit.X.cols(); ++n) {
        for (Eigen::Index p = 0; p < logit.X.rows(); ++p) {
            const double z = logit.X(p, n);
            const double y = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            out.X(p, n) = (y - lambda) / scale;
        }
    }
    return out;
}

Dataset toy_density(const std::string& name, std::size_t count, Rng& rng) {
    Dataset out{Matrix(2, Eigen::Index(count)), Space::logit};
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index n = 0; n < out.X.cols(); ++n) {
        if (name == "mixture-of-8") {
            std::uniform_int_distribution<int> comp(0, kMixtureComponents - 1);
            const double ang = 2.0 * std::numbers::pi * comp(rng) / kMixtureComponents;
            out.X(0, n) = kMixtureRadius * std::cos(ang) + kMixtureSigma * normal(rng);
            out.X(1, n) = kMixtureRadius * std::sin(ang) + kMixtureSigma * normal(rng);
        } else if (name == "ring") {
            const double ang = 2.0 * std::numbers::pi * unit(rng);
            const double rho = std::abs(kRingRadius + kRingSigma * normal(rng));
            out.X(0, n) = rho * std::cos(ang);
            out.X(1, n) = rho * std::sin(ang);
        } else if (name == "two-moons") {
            const int moon = unit(rng) < 0.5 ? 0 : 1;
            const auto m = moon_point(moon, std::numbers::pi * unit(rng));
            out.X(0, n) = m[0] + kMoonsSigma * normal(rng);
            out.X(1, n) = m[1] + kMoonsSigma * normal(rng);
        } else {
            throw ConfigError("unknown toy density '" + name + "' (expected two-moons, ring or mixture-of-8)");
        }
    }
    return out;
}

Vector toy_log_density(const std::string& name, const Matrix& X) {
    if (X.rows() != 2) throw ShapeError("toy densities are two-dimensional");
    Vector out(X.cols());
    for (Eigen::Index n = 0; n < X.cols(); ++n) out[n] = std::log(toy_density_at(name, X(0, n), X(1, n)));
    return out;
}

double toy_entropy(const std::string& name, double grid_step) {
    double x0 = -2.8, x1 = 2.8, y0 = -2.8, y1 = 2.8;
    if (name == "two-moons") {
        x0 = -1.7;
        x1 = 2.7;
        y0 = -1.2;
        y1 = 1.7;
        grid_step = std::max(grid_step, 0.01);
    } else {
        toy_density_at(name, 0.0, 0.0);  // validates the name
    }
    const auto nx = long(std::ceil((x1 - x0) / grid_step));
    const auto ny = long(std::ceil((y1 - y0) / grid_step));
    double h = 0.0;
    for (long i = 0; i <= nx; ++i) {
        for (long j = 0; j <= ny; ++j) {
            const double p = toy_density_at(name, x0 + i * grid_step, y0 + j * grid_step);
            if (p > 0.0) h -= p * std::log(p);
        }
    }
    return h * grid_step * grid_step;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

Matrix gather_columns(const Matrix& X, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
    Matrix out(X.rows(), Eigen::Index(end - begin));
    for (std::size_t k = begin; k < end; ++k) out.col(Eigen::Index(k - begin)) = X.col(Eigen::Index(idx[k]));
    return out;
}

Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (rows.empty() && !header_seen && std::isalpha(static_cast<unsigned char>(line[0]))) {
            header_seen = true;
            continue;
        }
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (true) {
            while (p < end && *p == ' ') ++p;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc() || !std::isfinite(v)) {
                throw FormatError(path + ": malformed value in row " + std::to_string(line_no));
            }
            row.push_back(v);
            p = next;
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            if (*p != ',') throw FormatError(path + ": malformed separator in row " + std::to_string(line_no));
            ++p;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw FormatError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                              " columns, expected " + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(path + ": no data rows");
    Matrix X(Eigen::Index(rows.front().size()), Eigen::Index(rows.size()));
    for (std::size_t n = 0; n < rows.size(); ++n)
        for (std::size_t p = 0; p < rows[n].size(); ++p) X(Eigen::Index(p), Eigen::Index(n)) = rows[n][p];
    return X;
}

void write_csv(const std::string& path, const Matrix& X, const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    if (!header.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << '\n';
    }
    std::array<char, 64> buf{};
    std::string line;
    for (Eigen::Index n = 0; n < X.cols(); ++n) {
        line.clear();
        for (Eigen::Index p = 0; p < X.rows(); ++p) {
            if (p) line.push_back(',');
            auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), X(p, n));
            line.append(buf.data(), end);
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) throw FormatError("failed writing " + path);
}

bool is_idx_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char head[4] = {};
    in.read(reinterpret_cast<char*>(head), 4);
    return in.gcount() == 4 && head[0] == 0 && head[1] == 0 && head[2] == 0x08 && head[3] == 0x03;
}

}  // namespace maflow
