#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maflow/potential.hpp"

namespace maflow {

/// raw: image bytes 0..255; unit_interval: dequantized; logit: model space
/// (also used for data that needs no preprocessing, e.g. toy densities).
enum class Space { raw, unit_interval, logit };

/// Samples stored one per column (dim x num_samples).
struct Dataset {
    Matrix X;
    Space space = Space::raw;

    Eigen::Index dim() const { return X.rows(); }
    Eigen::Index size() const { return X.cols(); }
};

struct IdxImages {
    Dataset images;  // raw grayscale bytes as doubles in 0..255
    std::optional<std::vector<std::uint8_t>> labels;
};

/// Reads a big-endian IDX3 image file (magic 0x00000803) and optionally the
/// matching IDX1 labels (magic 0x00000801). Images are flattened row-major.
IdxImages load_idx(const std::string& images_path, const std::optional<std::string>& labels_path = std::nullopt);

/// Writes raw pixel values (must be integers 0..255) as IDX3 with the given
/// image shape.
void write_idx_images(const std::string& path, const Dataset& raw, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

/// x = (byte + u) / 256 with u ~ U[0, 1) per pixel; result lies in [0, 1).
Dataset dequantize(const Dataset& raw, Rng& rng);

inline constexpr double kLogitPadding = 1e-6;

struct LogitResult {
    Dataset data;
    Vector log_det;  // per-sample ln |d logit-space / d unit-space|
};

/// y = lambda + (1 - 2 lambda) x, x -> logit(y).
LogitResult logit_transform(const Dataset& unit, double lambda = kLogitPadding);
Dataset inverse_logit_transform(const Dataset& logit, double lambda = kLogitPadding);

/// Desk-scale 2D densities, already in model space:
///   mixture-of-8  eight equal Gaussians, sigma 0.1, centres on a circle of radius 2
///   ring          radius |2 + 0.1 e| with e ~ N(0, 1), uniform angle
///   two-moons     arcs (cos t, sin t) and (1 - cos t, 0.5 - sin t), t ~ U[0, pi],
///                 plus isotropic N(0, 0.1^2) noise
Dataset toy_density(const std::string& name, std::size_t count, Rng& rng);

/// Exact log-density of the named toy distribution at each column of X.
Vector toy_log_density(const std::string& name, const Matrix& X);

/// Differential entropy of the named toy distribution by 2D grid quadrature
/// of -p ln p. This is the floor for any model's expected NLL.
double toy_entropy(const std::string& name, double grid_step = 0.004);

/// A permutation of 0..n-1 drawn from rng (Fisher-Yates via std::shuffle).
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

/// Columns of X listed in idx[begin, end).
Matrix gather_columns(const Matrix& X, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end);

/// One sample per CSV line, comma separated. Lines starting with '#' are
/// skipped, as is a first line starting with a letter (a header). Malformed
/// lines raise FormatError naming the 1-based line number.
Matrix read_csv(const std::string& path);
void write_csv(const std::string& path, const Matrix& X, const std::vector<std::string>& header = {});

/// True when the file starts with the IDX3 image magic.
bool is_idx_file(const std::string& path);

}  // namespace maflow
