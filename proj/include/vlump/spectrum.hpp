/// @file spectrum.hpp
/// @brief Extreme-eigenvalue estimation (Lanczos with full reorthogonalization,
/// shift-and-invert refinement for the small end) and dense full spectra for
/// small systems, plus the condition-number scaling sweeps and spectral-gap
/// census built on top of them.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vlump/fem.hpp"
#include "vlump/mesh.hpp"
#include "vlump/pcg.hpp"
#include "vlump/sparse.hpp"
#include "vlump/types.hpp"

namespace vlump {

enum class BcVariant { Neumann, DirichletTop };

std::string to_string(BcVariant bc);

/// Eigenvalue extremes (and optionally the full spectrum) of one operator.
struct SpectrumReport {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double cond = 0.0;  // lambda_max / lambda_min
    /// Present on the dense path (n <= 2000): all eigenvalues, ascending.
    std::optional<std::vector<double>> full_spectrum;
    double epsilon = 0.0;
    BcVariant bc_variant = BcVariant::Neumann;
};

struct ExtremeEigenvalues {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

/// Thrown when the iteration budget runs out; carries the best Ritz estimates
/// seen so far so callers can still report something.
class EigenvalueError : public std::runtime_error {
public:
    EigenvalueError(const std::string& what, double best_min, double best_max)
        : std::runtime_error(what), best_lambda_min(best_min), best_lambda_max(best_max) {}

    double best_lambda_min;
    double best_lambda_max;
};

/// Smallest and largest eigenvalue of a symmetric matrix. Lanczos with full
/// reorthogonalization; an end is accepted once successive Ritz estimates
/// change by less than `tol` relative. When the small end stalls (typical for
/// badly conditioned operators) it is refined by shift-and-invert Lanczos with
/// inner CG solves at relative tolerance 1e-10.
///
/// Throws std::invalid_argument if the matrix is not symmetric to 1e-10
/// relative on stored pairs, and EigenvalueError (carrying the best estimates)
/// if `max_iters` Lanczos steps do not converge either end.
ExtremeEigenvalues extreme_eigenvalues(const CsrMatrix& a, double tol, index_t max_iters);

/// All eigenvalues of a symmetric matrix with n <= 2000, sorted ascending.
/// Householder tridiagonalization followed by implicit-shift QL.
std::vector<double> full_spectrum_dense(const CsrMatrix& a);

/// Largest multiplicative gap between consecutive eigenvalues of a sorted
/// spectrum: `gap_ratio` is the ratio across the widest gap and
/// `below_gap_count` the number of eigenvalues below it. The caller's
/// surface-DOF count is echoed so reports can say whether the low cluster
/// matches the z-independent mode count.
struct GapCensus {
    double gap_ratio = 0.0;
    index_t below_gap_count = 0;
    index_t surface_dof_count = 0;
    bool matches_surface_modes = false;
};

GapCensus spectral_gap_census(const std::vector<double>& spectrum, index_t surface_dof_count);

/// Condition-number sweep over a descending list of epsilons on one mesh.
/// Neumann uses the singular full operator with its constant kernel deflated
/// by a rank-one shift (the node-pinned solver matrix would contribute an
/// artificial weakly-constrained mode that dominates the small end at
/// order-one epsilon); the deflation is explicit, so Neumann sweeps are
/// limited to n <= 2000. DirichletTop uses the interior block (all
/// top-surface values fixed). The dense spectrum is attached to each report
/// when the operator is small enough (n <= 500).
struct ScalingSweepResult {
    std::vector<SpectrumReport> reports;
    /// Least-squares slope of log(cond) vs log(epsilon); Neumann sweeps with
    /// at least two entries only.
    std::optional<double> fitted_slope;
    /// max/min condition number across the sweep; DirichletTop sweeps only.
    std::optional<double> cond_ratio;
};

ScalingSweepResult scaling_sweep(const TetMesh& mesh, const std::vector<double>& epsilons,
                                 BcVariant bc);

/// Extreme-eigenvalue estimate of the preconditioned operator M^{-1}A from
/// `steps` preconditioned-CG iterations on a seeded random right-hand side:
/// the CG coefficients form the Lanczos tridiagonal of M^{-1}A in the
/// M-inner product. Estimates approach the true extremes from inside, so the
/// implied condition number is a (sharpening) lower bound. Throws
/// std::invalid_argument on dimension errors and std::runtime_error if
/// either operator fails to be positive on the probe.
ExtremeEigenvalues preconditioned_extremes(const CsrMatrix& a, const Preconditioner& m,
                                           index_t steps, std::uint64_t seed);

}  // namespace vlump
