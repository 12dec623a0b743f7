#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace endoclass {

// Dense row-major matrix of doubles. Used for feature batches, logits and
// probability matrices (N rows, K columns).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }
};

using LogitMatrix = Matrix;
using ProbMatrix = Matrix;

// True when every row of `m` is a probability vector: entries in [0,1] and
// row sum within `tol` of 1.
inline bool is_prob_matrix(const Matrix& m, double tol = 1e-6) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) {
            double v = m(r, c);
            if (v < -1e-9 || v > 1.0 + 1e-9) return false;
            sum += v;
        }
        if (sum < 1.0 - tol || sum > 1.0 + tol) return false;
    }
    return true;
}

}  // namespace endoclass
