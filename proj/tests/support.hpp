#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "maflow/potential.hpp"

namespace maflow::test {

inline double rel_err(double got, double want, double floor = 1e-8) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

/// Random params with nonzero biases and c, so every term is exercised.
inline PotentialParams random_params(Eigen::Index hidden, Eigen::Index dim, Rng& rng, double scale = 1.0) {
    PotentialParams p = init_params(hidden, dim, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b[i] = 0.5 * n(rng);
    p.W *= scale;
    p.a *= scale;
    p.c = n(rng);
    return p;
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sigma = 1.0) {
    std::normal_distribution<double> n(0.0, sigma);
    Matrix X(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) X(i, j) = n(rng);
    return X;
}

/// Fresh empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("maflow-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace maflow::test
