/// @file dense.hpp
/// @brief Small dense helpers: LU solves for oracle paths (templated so tests
/// can run them in extended precision) and the Cholesky used at the coarsest
/// multigrid level.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vlump/sparse.hpp"
#include "vlump/types.hpp"

namespace vlump {

#if defined(__SIZEOF_FLOAT128__)
using quad = __float128;
#else
using quad = long double;
#endif

template <class T>
struct Dense {
    index_t rows = 0, cols = 0;
    std::vector<T> a;

    Dense() = default;
    Dense(index_t r, index_t c) : rows(r), cols(c), a(std::size_t(r) * c, T(0)) {}

    T& operator()(index_t i, index_t j) { return a[std::size_t(i) * cols + j]; }
    const T& operator()(index_t i, index_t j) const { return a[std::size_t(i) * cols + j]; }
};

template <class T>
Dense<T> dense_from_csr(const CsrMatrix& m) {
    Dense<T> d(m.n_rows, m.n_cols);
    for (index_t i = 0; i < m.n_rows; ++i)
        for (index_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
            d(i, m.col_indices[k]) = T(m.values[k]);
    return d;
}

template <class T>
T abs_val(T x) {
    return x < T(0) ? -x : x;
}

/// In-place LU factorization with partial pivoting. Throws on singularity.
template <class T>
void lu_factor(Dense<T>& m, std::vector<index_t>& piv) {
    if (m.rows != m.cols) throw std::invalid_argument("lu_factor: matrix not square");
    index_t n = m.rows;
    piv.resize(n);
    for (index_t k = 0; k < n; ++k) {
        index_t p = k;
        T best = abs_val(m(k, k));
        for (index_t i = k + 1; i < n; ++i)
            if (abs_val(m(i, k)) > best) {
                best = abs_val(m(i, k));
                p = i;
            }
        if (best == T(0)) throw std::runtime_error("lu_factor: singular matrix");
        piv[k] = p;
        if (p != k)
            for (index_t j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
        for (index_t i = k + 1; i < n; ++i) {
            T f = m(i, k) / m(k, k);
            m(i, k) = f;
            for (index_t j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
        }
    }
}

template <class T>
void lu_solve(const Dense<T>& lu, const std::vector<index_t>& piv, std::vector<T>& x) {
    index_t n = lu.rows;
    if (index_t(x.size()) != n) throw std::invalid_argument("lu_solve: size mismatch");
    for (index_t k = 0; k < n; ++k)
        if (piv[k] != k) std::swap(x[k], x[piv[k]]);
    for (index_t i = 1; i < n; ++i) {
        T s = x[i];
        for (index_t j = 0; j < i; ++j) s -= lu(i, j) * x[j];
        x[i] = s;
    }
    for (index_t i = n - 1; i >= 0; --i) {
        T s = x[i];
        for (index_t j = i + 1; j < n; ++j) s -= lu(i, j) * x[j];
        x[i] = s / lu(i, i);
    }
}

/// Convenience one-shot dense solve.
template <class T>
std::vector<T> dense_solve(Dense<T> m, std::vector<T> b) {
    std::vector<index_t> piv;
    lu_factor(m, piv);
    lu_solve(m, piv, b);
    return b;
}

/// Dense Cholesky of an SPD matrix; solves count flops (the factorization is
/// a one-time setup cost and is not counted).
class CholeskyFactor {
public:
    CholeskyFactor() = default;

    explicit CholeskyFactor(const CsrMatrix& a) {
        if (a.n_rows != a.n_cols)
            throw std::invalid_argument("CholeskyFactor: matrix not square");
        n_ = a.n_rows;
        l_ = dense_from_csr<double>(a);
        for (index_t k = 0; k < n_; ++k) {
            for (index_t j = 0; j < k; ++j) {
                double s = l_(k, j);
                for (index_t i = 0; i < j; ++i) s -= l_(k, i) * l_(j, i);
                l_(k, j) = s / l_(j, j);
            }
            double s = l_(k, k);
            for (index_t i = 0; i < k; ++i) s -= l_(k, i) * l_(k, i);
            if (s <= 0.0)
                throw std::runtime_error("CholeskyFactor: matrix not positive definite at row " +
                                         std::to_string(k));
            l_(k, k) = std::sqrt(s);
        }
    }

    index_t size() const { return n_; }

    std::vector<double> solve(std::span<const double> b) const {
        if (index_t(b.size()) != n_) throw std::invalid_argument("CholeskyFactor::solve: size");
        std::vector<double> x(b.begin(), b.end());
        for (index_t i = 0; i < n_; ++i) {
            double s = x[i];
            for (index_t j = 0; j < i; ++j) s -= l_(i, j) * x[j];
            x[i] = s / l_(i, i);
        }
        for (index_t i = n_ - 1; i >= 0; --i) {
            double s = x[i];
            for (index_t j = i + 1; j < n_; ++j) s -= l_(j, i) * x[j];
            x[i] = s / l_(i, i);
        }
        FlopCounter::add(2ull * n_ * (n_ + 1));
        return x;
    }

private:
    index_t n_ = 0;
    Dense<double> l_;
};

}  // namespace vlump
