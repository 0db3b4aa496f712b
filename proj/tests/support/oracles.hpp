/// @file oracles.hpp
/// @brief Independent dense reference implementations used only by tests.
/// Deliberately written as the most naive possible algorithms so they share
/// no code path with the library kernels they check.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vlump/dense.hpp"
#include "vlump/sparse.hpp"
#include "vlump/types.hpp"

namespace oracle {

using vlump::CsrMatrix;
using vlump::Dense;
using vlump::index_t;

inline std::vector<double> dense_spmv(const Dense<double>& a, const std::vector<double>& x) {
    std::vector<double> y(a.rows, 0.0);
    for (index_t i = 0; i < a.rows; ++i)
        for (index_t j = 0; j < a.cols; ++j) y[i] += a(i, j) * x[j];
    return y;
}

inline Dense<double> dense_mul(const Dense<double>& a, const Dense<double>& b) {
    if (a.cols != b.rows) throw std::invalid_argument("oracle dense_mul: shape");
    Dense<double> c(a.rows, b.cols);
    for (index_t i = 0; i < a.rows; ++i)
        for (index_t k = 0; k < a.cols; ++k) {
            double av = a(i, k);
            if (av == 0.0) continue;
            for (index_t j = 0; j < b.cols; ++j) c(i, j) += av * b(k, j);
        }
    return c;
}

inline Dense<double> dense_transpose(const Dense<double>& a) {
    Dense<double> t(a.cols, a.rows);
    for (index_t i = 0; i < a.rows; ++i)
        for (index_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

/// P^T A P the slow way.
inline Dense<double> dense_ptap(const Dense<double>& p, const Dense<double>& a) {
    return dense_mul(dense_transpose(p), dense_mul(a, p));
}

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices. Different
/// algorithm family from the library's tridiagonalization path on purpose.
inline std::vector<double> jacobi_eigenvalues(Dense<double> a, int max_sweeps = 100) {
    if (a.rows != a.cols) throw std::invalid_argument("oracle jacobi: not square");
    index_t n = a.rows;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (index_t i = 0; i < n; ++i)
            for (index_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (index_t p = 0; p < n; ++p)
            for (index_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (index_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (index_t k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (index_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

/// Random sparse symmetric positive definite CSR test instance.
inline CsrMatrix random_spd(vlump::Rng& rng, index_t n, double density = 0.3) {
    vlump::TripletBuilder b(n, n);
    std::vector<double> rowsum(n, 0.0);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = i + 1; j < n; ++j)
            if (rng.next_double() < density) {
                double v = rng.uniform(-1.0, 1.0);
                b.add(i, j, v);
                b.add(j, i, v);
                rowsum[i] += std::abs(v);
                rowsum[j] += std::abs(v);
            }
    for (index_t i = 0; i < n; ++i) b.add(i, i, rowsum[i] + rng.uniform(0.5, 1.5));
    return b.finalize();
}

/// Random rectangular sparse CSR instance.
inline CsrMatrix random_sparse(vlump::Rng& rng, index_t rows, index_t cols,
                               double density = 0.3) {
    vlump::TripletBuilder b(rows, cols);
    for (index_t i = 0; i < rows; ++i)
        for (index_t j = 0; j < cols; ++j)
            if (rng.next_double() < density) b.add(i, j, rng.uniform(-2.0, 2.0));
    return b.finalize();
}

inline std::vector<double> random_vector(vlump::Rng& rng, index_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

}  // namespace oracle
