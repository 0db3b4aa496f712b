/// @file lumping.hpp
/// @brief Vertically lumped preconditioning. An approximate extrapolation
/// operator E~ maps top-surface coefficients to full-mesh coefficients by
/// projecting every node straight up onto the surface triangulation; the
/// induced coarse system E~^T A_eps E~ is solved by one AMG V-cycle inside
/// a two-level cycle with SOR pre/post sweeps, optionally plus a damped
/// interior AMG correction (the additive variant). Dense oracles for the
/// exact extrapolation operator and the Schur-complement solve back the
/// tests.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlump/amg.hpp"
#include "vlump/dense.hpp"
#include "vlump/fem.hpp"
#include "vlump/mesh.hpp"
#include "vlump/pcg.hpp"
#include "vlump/sparse.hpp"
#include "vlump/types.hpp"

namespace vlump {

/// Sparse extrapolation operator: n x m' where m' is the number of surface
/// DOFs. Rows indexed by surface_dofs form the identity; every other row
/// holds the barycentric weights of the node's vertical projection onto the
/// top-surface triangulation (at most 3 entries, nonnegative, summing to 1).
/// The constrained reference node has no column, so weight that would land
/// on it is dropped: affected rows sum to less than 1 (a node directly
/// beneath the reference node gets an empty row) and are listed ascending in
/// pinned_rows, together with the reference node's own row.
struct ExtrapolationOperator {
    CsrMatrix matrix;  // n x m'; column c belongs to surface_dofs[c]
    std::vector<index_t> surface_dofs;
    std::vector<index_t> interior_dofs;
    std::vector<index_t> pinned_rows;
};

/// Build E~ by projecting each node of the mesh onto the surface
/// triangulation along z. Containing triangles are found through a uniform
/// background grid over the footprint bounding box; points within
/// 1e-9 x footprint diameter of a triangle are snapped to it, points farther
/// out fall back to the nearest triangle within 1e-6 x diameter.
///
/// Throws std::invalid_argument on mesh/system size mismatch or an empty
/// surface, and std::runtime_error naming the node if a projection lands
/// beyond the fallback distance from every triangle.
ExtrapolationOperator build_extrapolation(const TetMesh& mesh, const SurfaceMesh& surface,
                                          const AssembledSystem& system);

/// Dense exact extrapolation operator E = [I; -Abar^{-1} C^T] in original
/// node indexing (n x m'): surface-DOF rows are identity, interior rows are
/// the discrete harmonic extension of the surface values, and the reference
/// node's row is zero. Factorization runs in extended precision. Oracle for
/// tests; throws std::invalid_argument above n = 500.
Dense<double> exact_extrapolation(const AssembledSystem& system);

enum class VlumpVariant {
    Sor,          // VL-SOR: forward sweep, coarse correction, backward sweep
    AdditiveAmg,  // VL-ADD: the same cycle plus a damped interior AMG correction
};

/// "vl-sor" / "vl-add" (the names used by the benchmark CLI).
std::string to_string(VlumpVariant variant);

struct VlumpConfig {
    VlumpVariant variant = VlumpVariant::Sor;
    double sor_omega = 1.0;            // pre/post sweeps of the cycle
    double strength_threshold = 0.01;  // inner AMG hierarchies
    double prolongator_omega = 2.0 / 3.0;
    index_t coarsest_cap = 64;
    index_t max_levels = 40;
    // Feed span{1, x, y} as near-null candidates to the coarse hierarchy.
    // On vertically unstructured meshes the lumped coarse operator's slow
    // modes at small epsilon are exactly the planar fields (interpolating a
    // surface function back into the volume leaves an O(h^2) vertical energy
    // that vanishes on linears), and an indicator-only hierarchy cannot
    // transfer them: its V-cycle quality then degrades like 1/epsilon^2.
    bool planar_coarse_candidates = true;
    // VL-ADD: damping of the added interior term. The cycle alone has
    // preconditioned eigenvalues in (0, 1]; adding the full interior term
    // doubles the upper edge and costs iterations, while a damped term still
    // lifts the slow vertically-dominated components the sweeps undershoot.
    double additive_scale = 0.3;
};

/// The vertically lumped preconditioner. Both variants run the same
/// two-level cycle with E~ as the coarsening operator: one forward SOR
/// pre-sweep on the full operator, the coarse correction
/// z_c = E~ Vcycle(E~^T A_eps E~, E~^T residual), and one backward
/// post-sweep.
///
///   VL-SOR is exactly that cycle.
///
///   VL-ADD additionally adds additive_scale times an interior correction:
///   one AMG V-cycle on the interior block Abar_eps applied to the interior
///   part of r (extended by zero to the surface), plus the matching rank-one
///   identity term on the reference node. The interior cycle serves the
///   vertically-dominated components that two SOR sweeps barely move — on
///   strongly graded meshes this is what removes the sweeps' bottleneck —
///   and the damping keeps the summed operator's spectrum close to the
///   cycle's own.
///
/// Applications are deterministic, linear, symmetric, and positive definite;
/// the hierarchies are built once in the constructor. Holds a reference to
/// the system, which must outlive the preconditioner.
class VlumpPreconditioner final : public Preconditioner {
public:
    VlumpPreconditioner(const AssembledSystem& system, ExtrapolationOperator e_tilde,
                        VlumpConfig config = {});

    std::vector<double> apply(std::span<const double> r) const override;
    std::string name() const override { return to_string(config_.variant); }

    const ExtrapolationOperator& extrapolation() const { return e_tilde_; }
    const AmgHierarchy& coarse_hierarchy() const { return coarse_; }
    bool has_interior_hierarchy() const { return interior_.has_value(); }
    /// VL-ADD only; throws std::logic_error for VL-SOR.
    const AmgHierarchy& interior_hierarchy() const;
    const VlumpConfig& config() const { return config_; }

    /// One-line build report: header + data row with the variant, fine size,
    /// coarse size/nnz, and the depths of the two inner hierarchies
    /// (interior depth is 0 for VL-SOR).
    std::string build_report_csv() const;

private:
    const AssembledSystem* system_;
    ExtrapolationOperator e_tilde_;
    VlumpConfig config_;
    AmgHierarchy coarse_;
    std::optional<AmgHierarchy> interior_;
};

/// Dense Schur-complement reference solve of the constrained system
/// (oracle, n <= 500): eliminates the interior block, solves
/// (B - C Abar^{-1} C^T) phi' = b' - C Abar^{-1} bbar for the surface part,
/// reconstructs the interior part from Abar phibar = bbar - C^T phi', and
/// copies the reference component straight from b (its row is identity).
/// Runs in extended precision. Throws std::invalid_argument on the size cap
/// or a length mismatch.
std::vector<double> schur_solve_reference(const AssembledSystem& system,
                                          std::span<const double> b);

}  // namespace vlump
