// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "osd/linalg.hpp"

namespace osd::testing {

inline linalg::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double stddev = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    linalg::Matrix m(rows, cols);
    for (double& x : m.values()) x = normal(rng);
    return m;
}

inline linalg::Matrix naive_matmul(const linalg::Matrix& a, const linalg::Matrix& b) {
    linalg::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    }
    return c;
}

}  // namespace osd::testing
