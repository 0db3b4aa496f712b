#include "vlump/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vlump {

std::atomic<std::uint64_t> FlopCounter::total_{0};

double CsrMatrix::at(index_t i, index_t j) const {
    if (i < 0 || i >= n_rows || j < 0 || j >= n_cols)
        throw std::out_of_range("CsrMatrix::at: index out of range");
    auto begin = col_indices.begin() + row_offsets[i];
    auto end = col_indices.begin() + row_offsets[i + 1];
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return values[it - col_indices.begin()];
}

void CsrMatrix::check_invariants() const {
    if (n_rows < 0 || n_cols < 0) throw std::runtime_error("csr: negative dimension");
    if (index_t(row_offsets.size()) != n_rows + 1)
        throw std::runtime_error("csr: row_offsets size mismatch");
    if (row_offsets.front() != 0 || row_offsets.back() != nnz())
        throw std::runtime_error("csr: row_offsets endpoints wrong");
    if (col_indices.size() != values.size())
        throw std::runtime_error("csr: col/value size mismatch");
    for (index_t i = 0; i < n_rows; ++i) {
        if (row_offsets[i] > row_offsets[i + 1])
            throw std::runtime_error("csr: row_offsets not monotone");
        for (index_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            if (col_indices[k] < 0 || col_indices[k] >= n_cols)
                throw std::runtime_error("csr: column index out of range");
            if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1])
                throw std::runtime_error("csr: columns not strictly ascending");
        }
    }
}

TripletBuilder::TripletBuilder(index_t n_rows, index_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols) {
    if (n_rows < 0 || n_cols < 0)
        throw std::invalid_argument("TripletBuilder: negative dimension");
}

void TripletBuilder::add(index_t i, index_t j, double v) {
    if (i < 0 || i >= n_rows_ || j < 0 || j >= n_cols_)
        throw std::out_of_range("TripletBuilder::add: index out of range");
    entries_.push_back({i, j, v});
}

CsrMatrix TripletBuilder::finalize() {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.n_rows = n_rows_;
    m.n_cols = n_cols_;
    m.row_offsets.assign(n_rows_ + 1, 0);
    for (std::size_t k = 0; k < entries_.size();) {
        std::size_t k2 = k;
        double sum = 0.0;
        while (k2 < entries_.size() && entries_[k2].row == entries_[k].row &&
               entries_[k2].col == entries_[k].col)
            sum += entries_[k2++].value;
        m.col_indices.push_back(entries_[k].col);
        m.values.push_back(sum);
        ++m.row_offsets[entries_[k].row + 1];
        k = k2;
    }
    for (index_t i = 0; i < n_rows_; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
    return m;
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
    if (index_t(x.size()) != a.n_cols || index_t(y.size()) != a.n_rows)
        throw std::invalid_argument("spmv: dimension mismatch");
    for (index_t i = 0; i < a.n_rows; ++i) {
        double s = 0.0;
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            s += a.values[k] * x[a.col_indices[k]];
        y[i] = s;
    }
    FlopCounter::add(2ull * a.nnz());
}

std::vector<double> spmv(const CsrMatrix& a, std::span<const double> x) {
    std::vector<double> y(a.n_rows);
    spmv(a, x, y);
    return y;
}

std::vector<double> spmv_transpose(const CsrMatrix& a, std::span<const double> x) {
    if (index_t(x.size()) != a.n_rows)
        throw std::invalid_argument("spmv_transpose: dimension mismatch");
    std::vector<double> y(a.n_cols, 0.0);
    for (index_t i = 0; i < a.n_rows; ++i) {
        double xi = x[i];
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            y[a.col_indices[k]] += a.values[k] * xi;
    }
    FlopCounter::add(2ull * a.nnz());
    return y;
}

void sor_sweep(const CsrMatrix& a, std::span<double> x, std::span<const double> b,
               double omega, SweepDirection direction) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("sor_sweep: matrix not square");
    if (index_t(x.size()) != a.n_rows || index_t(b.size()) != a.n_rows)
        throw std::invalid_argument("sor_sweep: dimension mismatch");
    index_t n = a.n_rows;
    auto relax_row = [&](index_t i) {
        double s = b[i];
        double diag = 0.0;
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            index_t j = a.col_indices[k];
            if (j == i)
                diag = a.values[k];
            else
                s -= a.values[k] * x[j];
        }
        if (diag == 0.0)
            throw std::runtime_error("sor_sweep: zero diagonal in row " + std::to_string(i));
        x[i] += omega * (s / diag - x[i]);
    };
    if (direction == SweepDirection::Forward)
        for (index_t i = 0; i < n; ++i) relax_row(i);
    else
        for (index_t i = n - 1; i >= 0; --i) relax_row(i);
    FlopCounter::add(2ull * a.nnz() + 2ull * n);
}

CsrMatrix transpose(const CsrMatrix& a) {
    CsrMatrix t;
    t.n_rows = a.n_cols;
    t.n_cols = a.n_rows;
    t.row_offsets.assign(a.n_cols + 1, 0);
    t.col_indices.resize(a.col_indices.size());
    t.values.resize(a.values.size());
    for (index_t k = 0; k < a.nnz(); ++k) ++t.row_offsets[a.col_indices[k] + 1];
    for (index_t j = 0; j < a.n_cols; ++j) t.row_offsets[j + 1] += t.row_offsets[j];
    std::vector<index_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
    for (index_t i = 0; i < a.n_rows; ++i)
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            index_t pos = cursor[a.col_indices[k]]++;
            t.col_indices[pos] = i;
            t.values[pos] = a.values[k];
        }
    return t;
}

CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b) {
    if (a.n_cols != b.n_rows) throw std::invalid_argument("spgemm: dimension mismatch");
    CsrMatrix c;
    c.n_rows = a.n_rows;
    c.n_cols = b.n_cols;
    c.row_offsets.assign(a.n_rows + 1, 0);
    std::vector<index_t> marker(b.n_cols, -1);
    std::vector<double> accum(b.n_cols, 0.0);
    std::vector<index_t> cols;
    std::uint64_t flops = 0;
    for (index_t i = 0; i < a.n_rows; ++i) {
        cols.clear();
        for (index_t ka = a.row_offsets[i]; ka < a.row_offsets[i + 1]; ++ka) {
            index_t j = a.col_indices[ka];
            double av = a.values[ka];
            for (index_t kb = b.row_offsets[j]; kb < b.row_offsets[j + 1]; ++kb) {
                index_t col = b.col_indices[kb];
                if (marker[col] != i) {
                    marker[col] = i;
                    accum[col] = 0.0;
                    cols.push_back(col);
                }
                accum[col] += av * b.values[kb];
                flops += 2;
            }
        }
        std::sort(cols.begin(), cols.end());
        for (index_t col : cols) {
            c.col_indices.push_back(col);
            c.values.push_back(accum[col]);
        }
        c.row_offsets[i + 1] = index_t(c.col_indices.size());
    }
    FlopCounter::add(flops);
    return c;
}

CsrMatrix triple_product(const CsrMatrix& p, const CsrMatrix& a) {
    if (p.n_rows != a.n_rows || a.n_rows != a.n_cols)
        throw std::invalid_argument("triple_product: dimension mismatch");
    CsrMatrix ap = spgemm(a, p);
    CsrMatrix pt = transpose(p);
    return spgemm(pt, ap);
}

CsrMatrix add_scaled(const CsrMatrix& a, double beta, const CsrMatrix& b) {
    if (a.n_rows != b.n_rows || a.n_cols != b.n_cols)
        throw std::invalid_argument("add_scaled: dimension mismatch");
    CsrMatrix c;
    c.n_rows = a.n_rows;
    c.n_cols = a.n_cols;
    c.row_offsets.assign(a.n_rows + 1, 0);
    for (index_t i = 0; i < a.n_rows; ++i) {
        index_t ka = a.row_offsets[i], ea = a.row_offsets[i + 1];
        index_t kb = b.row_offsets[i], eb = b.row_offsets[i + 1];
        while (ka < ea || kb < eb) {
            index_t ca = ka < ea ? a.col_indices[ka] : index_t(a.n_cols);
            index_t cb = kb < eb ? b.col_indices[kb] : index_t(b.n_cols);
            if (ca < cb) {
                c.col_indices.push_back(ca);
                c.values.push_back(a.values[ka++]);
            } else if (cb < ca) {
                c.col_indices.push_back(cb);
                c.values.push_back(beta * b.values[kb++]);
            } else {
                c.col_indices.push_back(ca);
                c.values.push_back(a.values[ka++] + beta * b.values[kb++]);
            }
        }
        c.row_offsets[i + 1] = index_t(c.col_indices.size());
    }
    return c;
}

CsrMatrix extract_submatrix(const CsrMatrix& a, std::span<const index_t> rows,
                            std::span<const index_t> cols) {
    std::vector<index_t> col_map(a.n_cols, -1);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] < 0 || cols[j] >= a.n_cols)
            throw std::out_of_range("extract_submatrix: column index out of range");
        if (col_map[cols[j]] != -1)
            throw std::invalid_argument("extract_submatrix: duplicate column index");
        col_map[cols[j]] = index_t(j);
    }
    CsrMatrix s;
    s.n_rows = index_t(rows.size());
    s.n_cols = index_t(cols.size());
    s.row_offsets.assign(rows.size() + 1, 0);
    std::vector<std::pair<index_t, double>> row_entries;
    std::vector<char> seen(a.n_rows, 0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        index_t i = rows[r];
        if (i < 0 || i >= a.n_rows)
            throw std::out_of_range("extract_submatrix: row index out of range");
        if (seen[i]) throw std::invalid_argument("extract_submatrix: duplicate row index");
        seen[i] = 1;
        row_entries.clear();
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            index_t jm = col_map[a.col_indices[k]];
            if (jm >= 0) row_entries.emplace_back(jm, a.values[k]);
        }
        std::sort(row_entries.begin(), row_entries.end());
        for (auto& [j, v] : row_entries) {
            s.col_indices.push_back(j);
            s.values.push_back(v);
        }
        s.row_offsets[r + 1] = index_t(s.col_indices.size());
    }
    return s;
}

double symmetry_gap(const CsrMatrix& a) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("symmetry_gap: matrix not square");
    double gap = 0.0;
    for (index_t i = 0; i < a.n_rows; ++i)
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            index_t j = a.col_indices[k];
            gap = std::max(gap, std::abs(a.values[k] - a.at(j, i)));
        }
    return gap;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void mm_write(const std::string& path, const CsrMatrix& a, bool symmetric) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("mm_write: cannot open " + path);
    out << "%%MatrixMarket matrix coordinate real "
        << (symmetric ? "symmetric" : "general") << "\n";
    index_t count = 0;
    for (index_t i = 0; i < a.n_rows; ++i)
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            if (!symmetric || a.col_indices[k] <= i) ++count;
    out << a.n_rows << " " << a.n_cols << " " << count << "\n";
    for (index_t i = 0; i < a.n_rows; ++i)
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            index_t j = a.col_indices[k];
            if (symmetric && j > i) continue;
            out << (i + 1) << " " << (j + 1) << " " << format_double(a.values[k]) << "\n";
        }
    if (!out) throw std::runtime_error("mm_write: write failed for " + path);
}

CsrMatrix mm_read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("mm_read: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("mm_read: empty file " + path);
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket" || object != "matrix" || format != "coordinate" ||
        field != "real" || (symmetry != "general" && symmetry != "symmetric"))
        throw std::runtime_error("mm_read: unsupported banner in " + path + ": " + line);
    bool symmetric = symmetry == "symmetric";
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '%') continue;
        break;
    }
    std::istringstream sizes(line);
    long rows = -1, cols = -1, nnz = -1;
    sizes >> rows >> cols >> nnz;
    if (rows < 0 || cols < 0 || nnz < 0)
        throw std::runtime_error("mm_read: bad size line " + std::to_string(lineno) + " in " + path);
    TripletBuilder builder{index_t(rows), index_t(cols)};
    for (long k = 0; k < nnz; ++k) {
        if (!std::getline(in, line))
            throw std::runtime_error("mm_read: truncated entry list in " + path);
        ++lineno;
        std::istringstream entry(line);
        long i = 0, j = 0;
        double v = 0.0;
        if (!(entry >> i >> j >> v))
            throw std::runtime_error("mm_read: bad entry at line " + std::to_string(lineno) +
                                     " in " + path);
        builder.add(index_t(i - 1), index_t(j - 1), v);
        if (symmetric && i != j) builder.add(index_t(j - 1), index_t(i - 1), v);
    }
    return builder.finalize();
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    FlopCounter::add(2ull * x.size());
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
    FlopCounter::add(2ull * x.size());
}

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    FlopCounter::add(2ull * x.size());
    return std::sqrt(s);
}

double norm_inf(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace vlump
