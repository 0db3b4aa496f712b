/// @file sparse.hpp
/// @brief CSR matrix storage and the sparse kernels everything else builds on.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "vlump/types.hpp"

namespace vlump {

/// Compressed sparse row matrix. Column indices are strictly ascending
/// within each row and no structural duplicates are stored.
struct CsrMatrix {
    index_t n_rows = 0;
    index_t n_cols = 0;
    std::vector<index_t> row_offsets;  // size n_rows + 1
    std::vector<index_t> col_indices;  // size nnz
    std::vector<double> values;        // size nnz

    index_t nnz() const { return index_t(col_indices.size()); }

    /// Value at (i, j), 0.0 if the entry is not stored. Binary search.
    double at(index_t i, index_t j) const;

    /// Throws std::runtime_error if the CSR structure is malformed.
    void check_invariants() const;
};

/// Accumulates (i, j, v) triplets; finalize() sorts, merges duplicates by
/// summation, and emits a valid CsrMatrix.
class TripletBuilder {
public:
    TripletBuilder(index_t n_rows, index_t n_cols);

    void add(index_t i, index_t j, double v);
    void reserve(std::size_t n) { entries_.reserve(n); }
    CsrMatrix finalize();

private:
    struct Entry {
        index_t row, col;
        double value;
    };
    index_t n_rows_, n_cols_;
    std::vector<Entry> entries_;
};

enum class SweepDirection { Forward, Backward };

/// y = A x. Counts 2*nnz flops.
std::vector<double> spmv(const CsrMatrix& a, std::span<const double> x);
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);

/// y = A^T x without forming the transpose. Counts 2*nnz flops.
std::vector<double> spmv_transpose(const CsrMatrix& a, std::span<const double> x);

/// One in-place SOR sweep on A x = b. Requires a nonzero stored diagonal in
/// every row (throws identifying the first offending row otherwise).
/// Counts 2*nnz + 2*n flops.
void sor_sweep(const CsrMatrix& a, std::span<double> x, std::span<const double> b,
               double omega, SweepDirection direction);

/// P^T A P for p (n x m) and a (n x n). Row-merge (Gustavson) product,
/// deterministic ordering; counts 2 flops per multiply-add.
CsrMatrix triple_product(const CsrMatrix& p, const CsrMatrix& a);

/// General sparse product A B.
CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b);

CsrMatrix transpose(const CsrMatrix& a);

/// A + beta * B on the union sparsity pattern.
CsrMatrix add_scaled(const CsrMatrix& a, double beta, const CsrMatrix& b);

/// Submatrix a[rows, cols] preserving the relative order of the index sets.
/// Throws on out-of-range or duplicate indices.
CsrMatrix extract_submatrix(const CsrMatrix& a, std::span<const index_t> rows,
                            std::span<const index_t> cols);

/// max over stored pairs of |a_ij - a_ji|; used by symmetry checks.
double symmetry_gap(const CsrMatrix& a);

/// Matrix Market coordinate I/O (real, general or symmetric). Symmetric
/// export stores the lower triangle; import mirrors it back.
void mm_write(const std::string& path, const CsrMatrix& a, bool symmetric);
CsrMatrix mm_read(const std::string& path);

// --- counted vector helpers -------------------------------------------------

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);

}  // namespace vlump
