/// @file amg.hpp
/// @brief Smoothed-aggregation algebraic multigrid: strength graphs, two-pass
/// aggregation, smoothed prolongators, hierarchy setup, and V-cycles. Used
/// directly as a baseline preconditioner and as the engine behind the
/// vertically lumped preconditioner's coarse and interior solves.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlump/dense.hpp"
#include "vlump/sparse.hpp"
#include "vlump/types.hpp"

namespace vlump {

/// Parameters of one SOR smoothing stage.
struct SorConfig {
    SweepDirection direction = SweepDirection::Forward;
    double omega = 1.0;
    index_t sweeps = 1;
};

/// Undirected strength-of-connection graph in adjacency (CSR-like) form.
/// weights[k] is the normalized coupling max(|a_ij|, |a_ji|) / sqrt(a_ii a_jj)
/// of the edge to neighbors[k]; each edge is stored in both directions and
/// neighbor lists are ascending.
struct StrengthGraph {
    index_t n_nodes = 0;
    std::vector<index_t> offsets;    // size n_nodes + 1
    std::vector<index_t> neighbors;  // size 2 * n_edges()
    std::vector<double> weights;     // parallel to neighbors

    index_t n_edges() const { return index_t(neighbors.size() / 2); }
    index_t degree(index_t i) const { return offsets[i + 1] - offsets[i]; }
};

/// Keeps edge (i, j), i != j, iff |a_ij| > theta * sqrt(a_ii * a_jj); entries
/// are symmetrized by magnitude first so a one-sided rounding difference
/// cannot produce a directed graph. Requires theta >= 0 and a strictly
/// positive diagonal (throws std::invalid_argument naming the first offending
/// row otherwise).
StrengthGraph strength_graph(const CsrMatrix& a, double theta);

/// Two-pass aggregation. Pass 1 visits nodes in order and turns each node
/// whose neighborhood is still fully unaggregated into a new aggregate (root
/// plus neighborhood). Pass 2 attaches every leftover node to the adjacent
/// pass-1 aggregate with the strongest connection (ties keep the lowest
/// neighbor index); a leftover with no aggregated neighbor becomes its own
/// aggregate. Returns a node -> aggregate-id map with ids dense in
/// [0, n_aggregates); every node is assigned and no aggregate is empty.
/// Deterministic given the node ordering.
std::vector<index_t> aggregate(const StrengthGraph& graph);

/// Number of aggregates in a map produced by aggregate() (max id + 1).
index_t count_aggregates(const std::vector<index_t>& aggregates);

/// Tentative prolongator T (one unit column per aggregate) smoothed into
/// P = (I - omega * D^{-1} A) * T with D = diag(A). omega = 0 returns T
/// itself with no fill. Throws std::invalid_argument on a zero diagonal or an
/// aggregate map that is mis-sized, has unassigned nodes, or skips an id.
CsrMatrix smoothed_prolongator(const CsrMatrix& a, const std::vector<index_t>& aggregates,
                               double omega);

/// One level of a multigrid hierarchy; levels are ordered finest first.
struct AmgLevel {
    CsrMatrix a;                 // operator on this level
    std::optional<CsrMatrix> p;  // prolongator to the finer neighbor; absent at the finest level
    SorConfig presmoother = {SweepDirection::Forward, 1.0, 1};
    SorConfig postsmoother = {SweepDirection::Backward, 1.0, 1};
};

/// Immutable once built; V-cycle applications on distinct right-hand sides
/// may run concurrently.
struct AmgHierarchy {
    std::vector<AmgLevel> levels;    // finest first, sizes strictly decreasing
    CholeskyFactor coarsest_solver;  // dense factorization of levels.back().a
    double strength_threshold = 0.01;
    double prolongator_omega = 2.0 / 3.0;

    index_t n() const { return levels.front().a.n_rows; }
    index_t depth() const { return index_t(levels.size()); }
};

/// Repeats strength -> aggregate -> prolongate -> Galerkin projection until
/// the operator has at most coarsest_cap rows or max_levels levels exist,
/// then stores a dense Cholesky factorization of the coarsest operator.
/// Coarse operators are built with triple_product(p, fine) so tests can
/// reproduce them bit-identically. Coarsening stops early when aggregation
/// stagnates (coarse size > 0.9 * fine size, e.g. on an edgeless strength
/// graph); the current level is then factored as-is.
///
/// filtered = true smooths the tentative prolongator with the
/// strength-filtered operator instead of the full one: couplings below the
/// threshold are dropped and lumped into the diagonal (so the action on
/// constants is preserved; a row left without strong couplings keeps its
/// original diagonal). This confines prolongator fill to strong connections,
/// which thins coarse stencils on strongly anisotropic operators. Galerkin
/// products always use the unfiltered operator.
AmgHierarchy build_hierarchy(const CsrMatrix& a, double theta = 0.01, double omega = 2.0 / 3.0,
                             index_t coarsest_cap = 64, index_t max_levels = 40,
                             bool filtered = false);

/// Near-null candidate block: one row of values per fine degree of freedom,
/// up to three columns (e.g. the constant and the two horizontal coordinate
/// fields for a surface operator whose slow modes are the planar ones).
using CandidateBlock = std::vector<std::array<double, 3>>;

/// build_hierarchy with user-supplied near-null candidates. The tentative
/// prolongator is built per aggregate by modified Gram-Schmidt over the
/// candidate columns restricted to the aggregate (drop tolerance 1e-10
/// relative to each column's norm, column count additionally capped by the
/// aggregate size), so every supplied candidate is reproduced exactly by the
/// unsmoothed coarse space. The orthogonalization coefficients become the
/// coarse level's candidate block, and an aggregate on which every candidate
/// vanishes falls back to its indicator column. Aggregation, smoothing
/// (P = (I - omega D^{-1} A) T), Galerkin products, stagnation handling
/// (counting all candidate columns), and the coarsest-level factorization
/// match the single-candidate builder. Throws std::invalid_argument if the
/// candidate block's row count differs from the operator's.
AmgHierarchy build_hierarchy(const CsrMatrix& a, const CandidateBlock& candidates,
                             double theta = 0.01, double omega = 2.0 / 3.0,
                             index_t coarsest_cap = 64, index_t max_levels = 40,
                             bool filtered = false);

/// One V-cycle: pre-smooth, restrict the residual with P^T, recurse,
/// prolongate and correct, post-smooth; the coarsest level is solved
/// directly (a single-level hierarchy is therefore an exact solve). With the
/// default smoothers (one forward SOR sweep down, one backward sweep up,
/// omega = 1) the cycle with x0 = 0 is a fixed symmetric linear operator,
/// which is what makes it a valid CG preconditioner. Throws
/// std::invalid_argument on a dimension mismatch.
std::vector<double> vcycle(const AmgHierarchy& h, std::span<const double> b,
                           std::span<const double> x0);

/// vcycle starting from the zero vector: the preconditioner application form.
std::vector<double> vcycle(const AmgHierarchy& h, std::span<const double> b);

/// Per-level summary "level,rows,nnz,operator_complexity". The last column is
/// the cumulative stored-entry count through that level divided by the finest
/// level's count, so the final row reports the hierarchy's overall operator
/// complexity.
std::string hierarchy_csv(const AmgHierarchy& h);

}  // namespace vlump
