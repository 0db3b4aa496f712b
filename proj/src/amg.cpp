#include "vlump/amg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace vlump {

namespace {

std::vector<double> positive_diagonal(const CsrMatrix& a, const char* who) {
    std::vector<double> d(static_cast<std::size_t>(a.n_rows), 0.0);
    for (index_t i = 0; i < a.n_rows; ++i)
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            if (a.col_indices[k] == i) d[static_cast<std::size_t>(i)] = a.values[k];
    for (index_t i = 0; i < a.n_rows; ++i)
        if (!(d[static_cast<std::size_t>(i)] > 0.0))
            throw std::invalid_argument(std::string(who) + ": non-positive diagonal at row " +
                                        std::to_string(i));
    return d;
}

}  // namespace

StrengthGraph strength_graph(const CsrMatrix& a, double theta) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("strength_graph: matrix not square");
    if (!(theta >= 0.0)) throw std::invalid_argument("strength_graph: threshold must be >= 0");
    const index_t n = a.n_rows;
    const std::vector<double> diag = positive_diagonal(a, "strength_graph");

    // Collect strong edges once per unordered pair, symmetrizing the coupling
    // by magnitude so the kept set cannot depend on which triangle a rounding
    // difference landed in.
    struct Edge {
        index_t u, v;
        double w;
    };
    std::vector<Edge> edges;
    for (index_t i = 0; i < n; ++i) {
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            const index_t j = a.col_indices[k];
            if (j <= i) continue;
            const double coupling = std::max(std::abs(a.values[k]), std::abs(a.at(j, i)));
            const double scale = std::sqrt(diag[static_cast<std::size_t>(i)] *
                                           diag[static_cast<std::size_t>(j)]);
            if (coupling > theta * scale) edges.push_back({i, j, coupling / scale});
        }
    }
    // A strictly lower stored entry with no upper twin is not visited above;
    // sweep the lower triangle for such one-sided entries.
    for (index_t i = 0; i < n; ++i) {
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            const index_t j = a.col_indices[k];
            if (j >= i) break;
            if (a.at(j, i) != 0.0) continue;  // upper twin exists, already handled
            const double coupling = std::abs(a.values[k]);
            const double scale = std::sqrt(diag[static_cast<std::size_t>(i)] *
                                           diag[static_cast<std::size_t>(j)]);
            if (coupling > theta * scale) edges.push_back({j, i, coupling / scale});
        }
    }

    StrengthGraph g;
    g.n_nodes = n;
    g.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const Edge& e : edges) {
        ++g.offsets[static_cast<std::size_t>(e.u) + 1];
        ++g.offsets[static_cast<std::size_t>(e.v) + 1];
    }
    for (index_t i = 0; i < n; ++i) g.offsets[i + 1] += g.offsets[i];
    g.neighbors.resize(edges.size() * 2);
    g.weights.resize(edges.size() * 2);
    std::vector<index_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    // Edges were discovered in ascending (u, v) order per row, so filling by
    // cursor keeps each neighbor list ascending for u; for v the sources
    // arrive in ascending u as well because the outer loop is row-major.
    for (const Edge& e : edges) {
        g.neighbors[cursor[e.u]] = e.v;
        g.weights[cursor[e.u]++] = e.w;
        g.neighbors[cursor[e.v]] = e.u;
        g.weights[cursor[e.v]++] = e.w;
    }
    for (index_t i = 0; i < n; ++i)
        std::stable_sort(g.neighbors.begin() + g.offsets[i], g.neighbors.begin() + g.offsets[i + 1]);
    // Re-pair weights after the sort: rebuild per node via a scratch map of
    // the (rare) out-of-order rows instead of sorting index pairs.
    // Simpler and still linear: recompute the weight from the matrix.
    for (index_t i = 0; i < n; ++i) {
        for (index_t k = g.offsets[i]; k < g.offsets[i + 1]; ++k) {
            const index_t j = g.neighbors[k];
            const double coupling = std::max(std::abs(a.at(i, j)), std::abs(a.at(j, i)));
            g.weights[k] = coupling / std::sqrt(diag[static_cast<std::size_t>(i)] *
                                                diag[static_cast<std::size_t>(j)]);
        }
    }
    return g;
}

std::vector<index_t> aggregate(const StrengthGraph& graph) {
    const index_t n = graph.n_nodes;
    std::vector<index_t> agg(static_cast<std::size_t>(n), -1);
    index_t next_id = 0;

    for (index_t i = 0; i < n; ++i) {
        if (agg[static_cast<std::size_t>(i)] != -1) continue;
        bool neighborhood_free = true;
        for (index_t k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
            if (agg[static_cast<std::size_t>(graph.neighbors[k])] != -1) {
                neighborhood_free = false;
                break;
            }
        }
        if (!neighborhood_free) continue;
        agg[static_cast<std::size_t>(i)] = next_id;
        for (index_t k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k)
            agg[static_cast<std::size_t>(graph.neighbors[k])] = next_id;
        ++next_id;
    }

    // Pass 2 reads the pass-1 assignment only, so the outcome does not depend
    // on the order in which leftovers are attached.
    const std::vector<index_t> pass1 = agg;
    for (index_t i = 0; i < n; ++i) {
        if (pass1[static_cast<std::size_t>(i)] != -1) continue;
        index_t best = -1;
        double best_weight = -1.0;
        for (index_t k = graph.offsets[i]; k < graph.offsets[i + 1]; ++k) {
            const index_t j = graph.neighbors[k];
            const index_t target = pass1[static_cast<std::size_t>(j)];
            if (target == -1) continue;
            if (graph.weights[k] > best_weight) {
                best_weight = graph.weights[k];
                best = target;
            }
        }
        agg[static_cast<std::size_t>(i)] = (best != -1) ? best : next_id++;
    }
    return agg;
}

index_t count_aggregates(const std::vector<index_t>& aggregates) {
    index_t m = 0;
    for (index_t id : aggregates) m = std::max(m, id + 1);
    return m;
}

CsrMatrix smoothed_prolongator(const CsrMatrix& a, const std::vector<index_t>& aggregates,
                               double omega) {
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument("smoothed_prolongator: matrix not square");
    const index_t n = a.n_rows;
    if (index_t(aggregates.size()) != n)
        throw std::invalid_argument("smoothed_prolongator: aggregate map has " +
                                    std::to_string(aggregates.size()) + " entries for " +
                                    std::to_string(n) + " rows");
    const index_t m = count_aggregates(aggregates);
    std::vector<char> used(static_cast<std::size_t>(m), 0);
    for (index_t i = 0; i < n; ++i) {
        const index_t id = aggregates[static_cast<std::size_t>(i)];
        if (id < 0)
            throw std::invalid_argument("smoothed_prolongator: node " + std::to_string(i) +
                                        " is unassigned");
        used[static_cast<std::size_t>(id)] = 1;
    }
    for (index_t c = 0; c < m; ++c)
        if (!used[static_cast<std::size_t>(c)])
            throw std::invalid_argument("smoothed_prolongator: empty aggregate " +
                                        std::to_string(c));

    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    for (index_t i = 0; i < n; ++i)
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            if (a.col_indices[k] == i) diag[static_cast<std::size_t>(i)] = a.values[k];
    for (index_t i = 0; i < n; ++i)
        if (diag[static_cast<std::size_t>(i)] == 0.0)
            throw std::invalid_argument("smoothed_prolongator: zero diagonal at row " +
                                        std::to_string(i));

    TripletBuilder builder{n, m};
    builder.reserve(static_cast<std::size_t>(n) +
                    (omega != 0.0 ? static_cast<std::size_t>(a.nnz()) : 0));
    for (index_t i = 0; i < n; ++i) {
        builder.add(i, aggregates[static_cast<std::size_t>(i)], 1.0);
        if (omega == 0.0) continue;
        const double scale = omega / diag[static_cast<std::size_t>(i)];
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            const double v = -scale * a.values[k];
            if (v != 0.0)
                builder.add(i, aggregates[static_cast<std::size_t>(a.col_indices[k])], v);
        }
    }
    return builder.finalize();
}

namespace {

void check_hierarchy_args(const CsrMatrix& a, index_t coarsest_cap, index_t max_levels) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("build_hierarchy: matrix not square");
    if (a.n_rows == 0) throw std::invalid_argument("build_hierarchy: empty matrix");
    if (coarsest_cap < 1) throw std::invalid_argument("build_hierarchy: coarsest_cap must be positive");
    if (max_levels < 1) throw std::invalid_argument("build_hierarchy: max_levels must be positive");
}

/// Weak couplings dropped and lumped into the diagonal so the action on
/// constants survives; a row with no strong coupling keeps its original
/// diagonal instead of collapsing to zero. Both row orderings (CSR columns
/// and strength neighbors) are ascending, so one merge walk classifies every
/// entry.
CsrMatrix filter_matrix(const CsrMatrix& a, const StrengthGraph& graph) {
    TripletBuilder builder{a.n_rows, a.n_cols};
    for (index_t i = 0; i < a.n_rows; ++i) {
        index_t e = graph.offsets[static_cast<std::size_t>(i)];
        const index_t e_end = graph.offsets[static_cast<std::size_t>(i) + 1];
        double diag = 0.0, lumped = 0.0;
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            const index_t j = a.col_indices[k];
            const double v = a.values[k];
            if (j == i) {
                diag = v;
                continue;
            }
            while (e < e_end && graph.neighbors[static_cast<std::size_t>(e)] < j) ++e;
            const bool strong = e < e_end && graph.neighbors[static_cast<std::size_t>(e)] == j;
            if (strong)
                builder.add(i, j, v);
            else
                lumped += v;
        }
        double filtered_diag = diag + lumped;
        if (!(filtered_diag > 1e-12 * diag)) filtered_diag = diag;
        builder.add(i, i, filtered_diag);
    }
    return builder.finalize();
}

/// P = (I - omega D^{-1} A) T for an explicit tentative prolongator; the
/// indicator-column path in smoothed_prolongator fuses this with the T build.
CsrMatrix jacobi_smooth_tentative(const CsrMatrix& a, const CsrMatrix& t, double omega) {
    if (omega == 0.0) return t;
    const std::vector<double> diag = positive_diagonal(a, "build_hierarchy");
    const CsrMatrix at = spgemm(a, t);
    TripletBuilder builder{t.n_rows, t.n_cols};
    builder.reserve(static_cast<std::size_t>(t.nnz() + at.nnz()));
    for (index_t i = 0; i < t.n_rows; ++i)
        for (index_t k = t.row_offsets[i]; k < t.row_offsets[i + 1]; ++k)
            builder.add(i, t.col_indices[k], t.values[k]);
    for (index_t i = 0; i < at.n_rows; ++i) {
        const double scale = omega / diag[static_cast<std::size_t>(i)];
        for (index_t k = at.row_offsets[i]; k < at.row_offsets[i + 1]; ++k) {
            const double v = -scale * at.values[k];
            if (v != 0.0) builder.add(i, at.col_indices[k], v);
        }
    }
    return builder.finalize();
}

struct TentativeMulti {
    CsrMatrix t;
    CandidateBlock coarse_candidates;  // one row per coarse column
};

/// Per-aggregate modified Gram-Schmidt over the candidate columns. Columns
/// whose residual norm falls below 1e-10 of their original norm are dropped
/// (so linearly dependent candidates cost nothing), the column count is
/// capped by the aggregate size, and an aggregate where every candidate
/// vanishes gets its normalized indicator column. The R coefficients are the
/// coarse-level candidates: candidate c restricted to aggregate g equals the
/// kept columns times (R_g)_{.,c} exactly.
TentativeMulti tentative_from_candidates(const std::vector<index_t>& aggregates, index_t n_agg,
                                         const CandidateBlock& candidates) {
    constexpr std::size_t kWidth = std::tuple_size<CandidateBlock::value_type>::value;
    const index_t n = index_t(aggregates.size());
    std::vector<std::vector<index_t>> members(static_cast<std::size_t>(n_agg));
    for (index_t i = 0; i < n; ++i)
        members[static_cast<std::size_t>(aggregates[static_cast<std::size_t>(i)])].push_back(i);

    TentativeMulti out;
    struct Entry {
        index_t row, col;
        double value;
    };
    std::vector<Entry> entries;  // column count known only after the scan
    entries.reserve(static_cast<std::size_t>(n));
    index_t next_col = 0;
    std::vector<std::vector<double>> q;  // kept orthonormal columns, one aggregate at a time
    std::vector<double> w;
    for (index_t g = 0; g < n_agg; ++g) {
        const std::vector<index_t>& mem = members[static_cast<std::size_t>(g)];
        const std::size_t mg = mem.size();
        q.clear();
        std::vector<std::array<double, kWidth>> r_rows;
        for (std::size_t c = 0; c < kWidth; ++c) {
            w.assign(mg, 0.0);
            double original_norm2 = 0.0;
            for (std::size_t i = 0; i < mg; ++i) {
                w[i] = candidates[static_cast<std::size_t>(mem[i])][c];
                original_norm2 += w[i] * w[i];
            }
            for (const std::vector<double>& qk : q) {
                double dot = 0.0;
                for (std::size_t i = 0; i < mg; ++i) dot += qk[i] * w[i];
                for (std::size_t i = 0; i < mg; ++i) w[i] -= dot * qk[i];
            }
            double norm2 = 0.0;
            for (std::size_t i = 0; i < mg; ++i) norm2 += w[i] * w[i];
            if (q.size() < mg && norm2 > 1e-20 * original_norm2 && norm2 > 0.0) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (std::size_t i = 0; i < mg; ++i) w[i] *= inv;
                q.push_back(w);
            }
        }
        if (q.empty()) {  // every candidate vanishes here: indicator fallback
            w.assign(mg, 1.0 / std::sqrt(double(mg)));
            q.push_back(w);
        }
        // R = Q^T V, recomputed against the original candidates so the coarse
        // block reproduces them exactly.
        r_rows.assign(q.size(), {});
        for (std::size_t k = 0; k < q.size(); ++k)
            for (std::size_t c = 0; c < kWidth; ++c) {
                double dot = 0.0;
                for (std::size_t i = 0; i < mg; ++i)
                    dot += q[k][i] * candidates[static_cast<std::size_t>(mem[i])][c];
                r_rows[k][c] = dot;
            }
        for (std::size_t k = 0; k < q.size(); ++k) {
            for (std::size_t i = 0; i < mg; ++i)
                if (q[k][i] != 0.0) entries.push_back({mem[i], next_col, q[k][i]});
            out.coarse_candidates.push_back(r_rows[k]);
            ++next_col;
        }
    }
    TripletBuilder builder{n, next_col};
    builder.reserve(entries.size());
    for (const Entry& entry : entries) builder.add(entry.row, entry.col, entry.value);
    out.t = builder.finalize();
    return out;
}

}  // namespace

AmgHierarchy build_hierarchy(const CsrMatrix& a, double theta, double omega,
                             index_t coarsest_cap, index_t max_levels, bool filtered) {
    check_hierarchy_args(a, coarsest_cap, max_levels);

    AmgHierarchy h;
    h.strength_threshold = theta;
    h.prolongator_omega = omega;
    {
        AmgLevel finest;
        finest.a = a;
        h.levels.push_back(std::move(finest));
    }
    while (index_t(h.levels.size()) < max_levels && h.levels.back().a.n_rows > coarsest_cap) {
        const CsrMatrix& fine = h.levels.back().a;
        const StrengthGraph graph = strength_graph(fine, theta);
        const std::vector<index_t> agg = aggregate(graph);
        const index_t n_coarse = count_aggregates(agg);
        if (double(n_coarse) > 0.9 * double(fine.n_rows)) break;  // aggregation stagnated
        CsrMatrix p = filtered ? smoothed_prolongator(filter_matrix(fine, graph), agg, omega)
                               : smoothed_prolongator(fine, agg, omega);
        CsrMatrix coarse = triple_product(p, fine);
        AmgLevel level;
        level.a = std::move(coarse);
        level.p = std::move(p);
        h.levels.push_back(std::move(level));
    }
    h.coarsest_solver = CholeskyFactor(h.levels.back().a);
    return h;
}

AmgHierarchy build_hierarchy(const CsrMatrix& a, const CandidateBlock& candidates, double theta,
                             double omega, index_t coarsest_cap, index_t max_levels,
                             bool filtered) {
    check_hierarchy_args(a, coarsest_cap, max_levels);
    if (index_t(candidates.size()) != a.n_rows)
        throw std::invalid_argument("build_hierarchy: candidate block has " +
                                    std::to_string(candidates.size()) + " rows for " +
                                    std::to_string(a.n_rows) + " unknowns");

    AmgHierarchy h;
    h.strength_threshold = theta;
    h.prolongator_omega = omega;
    {
        AmgLevel finest;
        finest.a = a;
        h.levels.push_back(std::move(finest));
    }
    CandidateBlock level_candidates = candidates;
    while (index_t(h.levels.size()) < max_levels && h.levels.back().a.n_rows > coarsest_cap) {
        const CsrMatrix& fine = h.levels.back().a;
        const StrengthGraph graph = strength_graph(fine, theta);
        const std::vector<index_t> agg = aggregate(graph);
        const index_t n_agg = count_aggregates(agg);
        TentativeMulti tentative = tentative_from_candidates(agg, n_agg, level_candidates);
        if (double(tentative.t.n_cols) > 0.9 * double(fine.n_rows)) break;  // stagnated
        CsrMatrix p = jacobi_smooth_tentative(filtered ? filter_matrix(fine, graph) : fine,
                                              tentative.t, omega);
        CsrMatrix coarse = triple_product(p, fine);
        AmgLevel level;
        level.a = std::move(coarse);
        level.p = std::move(p);
        h.levels.push_back(std::move(level));
        level_candidates = std::move(tentative.coarse_candidates);
    }
    h.coarsest_solver = CholeskyFactor(h.levels.back().a);
    return h;
}

namespace {

void cycle_at_level(const AmgHierarchy& h, std::size_t k, std::span<const double> b,
                    std::vector<double>& x) {
    if (k + 1 == h.levels.size()) {
        x = h.coarsest_solver.solve(b);
        return;
    }
    const AmgLevel& level = h.levels[k];
    for (index_t s = 0; s < level.presmoother.sweeps; ++s)
        sor_sweep(level.a, x, b, level.presmoother.omega, level.presmoother.direction);

    std::vector<double> ax = spmv(level.a, x);
    std::vector<double> r(b.begin(), b.end());
    axpy(-1.0, ax, r);

    const CsrMatrix& p = *h.levels[k + 1].p;
    const std::vector<double> coarse_b = spmv_transpose(p, r);
    std::vector<double> coarse_x(static_cast<std::size_t>(p.n_cols), 0.0);
    cycle_at_level(h, k + 1, coarse_b, coarse_x);
    const std::vector<double> correction = spmv(p, coarse_x);
    axpy(1.0, correction, x);

    for (index_t s = 0; s < level.postsmoother.sweeps; ++s)
        sor_sweep(level.a, x, b, level.postsmoother.omega, level.postsmoother.direction);
}

}  // namespace

std::vector<double> vcycle(const AmgHierarchy& h, std::span<const double> b,
                           std::span<const double> x0) {
    if (h.levels.empty()) throw std::invalid_argument("vcycle: empty hierarchy");
    const index_t n = h.levels.front().a.n_rows;
    if (index_t(b.size()) != n)
        throw std::invalid_argument("vcycle: right-hand side has " + std::to_string(b.size()) +
                                    " entries for an operator with " + std::to_string(n) + " rows");
    if (index_t(x0.size()) != n)
        throw std::invalid_argument("vcycle: initial guess has " + std::to_string(x0.size()) +
                                    " entries for an operator with " + std::to_string(n) + " rows");
    std::vector<double> x(x0.begin(), x0.end());
    cycle_at_level(h, 0, b, x);
    return x;
}

std::vector<double> vcycle(const AmgHierarchy& h, std::span<const double> b) {
    const std::vector<double> zero(b.size(), 0.0);
    return vcycle(h, b, zero);
}

std::string hierarchy_csv(const AmgHierarchy& h) {
    std::ostringstream out;
    out << "level,rows,nnz,operator_complexity\n";
    const double finest_nnz = h.levels.empty() ? 1.0 : double(h.levels.front().a.nnz());
    std::uint64_t cumulative = 0;
    for (std::size_t k = 0; k < h.levels.size(); ++k) {
        cumulative += static_cast<std::uint64_t>(h.levels[k].a.nnz());
        out << k << ',' << h.levels[k].a.n_rows << ',' << h.levels[k].a.nnz() << ','
            << std::setprecision(6) << double(cumulative) / finest_nnz << '\n';
    }
    return out.str();
}

}  // namespace vlump
