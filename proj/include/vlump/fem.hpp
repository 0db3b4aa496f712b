/// @file fem.hpp
/// @brief P1 finite element assembly of the anisotropic operator
/// A_eps = A_0 + eps^2 A_H, its point-constrained form, and the
/// surface/interior block decomposition.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vlump/mesh.hpp"
#include "vlump/sparse.hpp"

namespace vlump {

/// Element stiffness split into the vertical part (d/dz terms only), the
/// horizontal part (d/dx and d/dy), and the consistent mass matrix.
struct ElementMatrices {
    std::array<std::array<double, 4>, 4> vertical;
    std::array<std::array<double, 4>, 4> horizontal;
    std::array<std::array<double, 4>, 4> mass;
};

/// Exact closed-form P1 matrices on one tet: gradients are constant, so
/// stiffness entries are V * (grad_i . grad_j) restricted to the vertical or
/// horizontal components, and mass is V/20 * (1 + delta_ij).
ElementMatrices element_matrices(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Assembled Galerkin system for -d/dz^2 - eps^2 (d/dx^2 + d/dy^2) with
/// natural boundary conditions. The pure-Neumann operator is singular
/// (constants); a_eps stores the constrained matrix with one reference node
/// pinned to zero by symmetric row/column elimination (unit diagonal).
struct AssembledSystem {
    CsrMatrix a_eps;         // constrained A_eps
    CsrMatrix a_vertical;    // unconstrained A_0
    CsrMatrix a_horizontal;  // unconstrained A_H
    CsrMatrix mass;          // unconstrained consistent mass
    double epsilon = 1.0;
    index_t constrained_node = -1;       // reference node on the top surface
    std::vector<index_t> surface_dofs;   // top-surface nodes minus the reference node
    std::vector<index_t> interior_dofs;  // nodes not on the top surface
    std::vector<Vec3> node_coords;

    index_t n() const { return a_eps.n_rows; }
};

/// Assemble on the given mesh. epsilon = 0 gives the pure vertical
/// (hydrostatic-limit) operator. The reference node is the top-surface node
/// with lexicographically smallest (x, y).
AssembledSystem assemble(const TetMesh& mesh, double epsilon);

/// Blocks of the constrained operator in (surface, interior) ordering:
/// [ B  C ; C^T  A_int ].
struct BlockDecomposition {
    CsrMatrix surface_block;  // B, m' x m'
    CsrMatrix coupling;       // C, m' x m_int
    CsrMatrix interior;       // A_int, m_int x m_int
};

BlockDecomposition decompose(const AssembledSystem& system);

enum class RhsField { SmoothCosine, SeededRandom };

/// Nodal field with the reference node forced to zero, and b = A_eps * x.
struct ManufacturedProblem {
    std::vector<double> x_exact;
    std::vector<double> b;
};

/// SmoothCosine evaluates cos(pi x) cos(pi y) cos(pi z) shifted so the
/// reference node's value is zero (seed unused); SeededRandom draws uniform
/// [-1, 1) entries and zeroes the reference slot.
ManufacturedProblem manufactured_rhs(const AssembledSystem& system, RhsField field, std::uint64_t seed);

/// x minus its mass-weighted mean: x - (1^T M x / 1^T M 1) * ones.
std::vector<double> subtract_mean(const AssembledSystem& system, const std::vector<double>& x);

}  // namespace vlump
