/// @file pcg.hpp
/// @brief Preconditioned Conjugate Gradient with pluggable preconditioners,
/// exact-error instrumentation, and per-iteration convergence traces.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlump/amg.hpp"
#include "vlump/sparse.hpp"
#include "vlump/types.hpp"

namespace vlump {

/// A fixed symmetric positive linear operator z = M^{-1} r. Implementations
/// must apply the same operator on every call (no inner iteration to a
/// tolerance), which is what keeps plain CG valid.
class Preconditioner {
public:
    virtual ~Preconditioner() = default;
    virtual std::vector<double> apply(std::span<const double> r) const = 0;
    virtual std::string name() const = 0;
};

/// Classical SSOR: one forward plus one backward SOR sweep from a zero
/// initial guess, symmetric by construction for symmetric input. Holds a
/// reference to the matrix; the caller keeps it alive. Throws
/// std::invalid_argument on a missing or zero diagonal.
class SsorPreconditioner : public Preconditioner {
public:
    SsorPreconditioner(const CsrMatrix& a, double omega);

    std::vector<double> apply(std::span<const double> r) const override;
    std::string name() const override { return "ssor"; }
    double omega() const { return omega_; }

private:
    const CsrMatrix* a_;
    double omega_;
};

/// One multigrid V-cycle from a zero initial guess as a preconditioner; owns
/// its hierarchy.
class AmgPreconditioner : public Preconditioner {
public:
    explicit AmgPreconditioner(AmgHierarchy hierarchy) : hierarchy_(std::move(hierarchy)) {}

    std::vector<double> apply(std::span<const double> r) const override {
        return vcycle(hierarchy_, r);
    }
    std::string name() const override { return "amg"; }
    const AmgHierarchy& hierarchy() const { return hierarchy_; }

private:
    AmgHierarchy hierarchy_;
};

enum class StopReason {
    Converged,   // relative preconditioned residual reached tol
    ExactError,  // inf-norm error reached tol * ||x_exact||_inf (experiment mode)
    Floor,       // inf-norm error stopped improving for 25 iterations (experiment mode)
    MaxIters,
};

std::string to_string(StopReason reason);

struct TraceRecord {
    index_t iteration = 0;
    double inf_error = 0.0;       // NaN when no exact solution was supplied
    double residual_2norm = 0.0;  // recurrence residual sqrt(r'r)
    std::uint64_t cumulative_flops = 0;
};

/// Per-iteration convergence record, iteration 0 (the initial state) included.
/// Flop counts cover solver work only: matrix-vector products, vector algebra,
/// and preconditioner applications; error/residual instrumentation is excluded.
struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    std::string preconditioner;  // "none" when unpreconditioned
    double epsilon = 0.0;        // metadata filled by the caller
    std::string mesh_id;         // metadata filled by the caller
    index_t n = 0;
    StopReason stop_reason = StopReason::MaxIters;
    std::optional<double> floor_value;  // best inf-error when stop_reason == Floor

    index_t iterations() const { return records.empty() ? 0 : records.back().iteration; }
};

struct PcgResult {
    std::vector<double> x;
    ConvergenceTrace trace;
};

/// Called after every recorded iteration (including iteration 0) with the
/// current iterate; used by tests to watch invariants like the A-norm of the
/// error.
using IterationObserver = std::function<void(index_t iteration, std::span<const double> x)>;

/// Standard PCG from x0 = 0 on an SPD system.
///
/// Stopping rules: without x_exact the solve stops when the relative
/// preconditioned residual sqrt(r'z) drops below tol times its initial value,
/// or at max_iters. With x_exact (experiment mode) the residual test is
/// replaced by the exact-error rules: success when the inf-norm error is at
/// most tol * ||x_exact||_inf, and floor detection when the best inf-error
/// has not improved for 25 consecutive iterations (the trace then records the
/// floor value). Throws std::runtime_error naming the iteration if a
/// curvature p'Ap <= 0 is met (matrix not positive definite); preconditioner
/// asymmetry is not detected here.
PcgResult pcg(const CsrMatrix& a, std::span<const double> b, const Preconditioner* precond,
              const std::vector<double>* x_exact, double tol, index_t max_iters,
              const IterationObserver& observer = {});

/// max_i |x_i - x_exact_i|; throws std::invalid_argument on a length mismatch.
double inf_error(std::span<const double> x, std::span<const double> x_exact);

/// Serializes the per-iteration records as "iter,inf_error,resid2,flops" CSV
/// (no metadata comments; callers writing files prepend those). Values are
/// printed with 17 significant digits so round-trips are exact.
std::string trace_csv(const ConvergenceTrace& trace);

}  // namespace vlump
