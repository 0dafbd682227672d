#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

#include "maflow/potential.hpp"

namespace maflow::test {

// Independent enumeration of ln sum_s exp(s^T A s / 2): spins visited in
// Gray-code order, exponent as an explicit double sum over site pairs,
// running log-sum-exp.
inline double gray_code_log_z(const Matrix& A) {
    const auto n = A.rows();
    Vector s = Vector::Ones(n);
    auto exponent = [&] {
        double e = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) e += A(i, j) * s[i] * s[j];
        return 0.5 * e;
    };
    double m = exponent(), acc = 1.0;
    const std::uint64_t states = std::uint64_t(1) << n;
    for (std::uint64_t k = 1; k < states; ++k) {
        const int i = std::countr_zero(k);
        s[i] = -s[i];
        const double e = exponent();
        if (e > m) {
            acc = acc * std::exp(m - e) + 1.0;
            m = e;
        } else {
            acc += std::exp(e - m);
        }
    }
    return m + std::log(acc);
}

}  // namespace maflow::test
