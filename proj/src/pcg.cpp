#include "vlump/pcg.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace vlump {

namespace {

/// Instrumentation norms bypass the flop counter so that recorded flop totals
/// measure solver work only.
double raw_norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double raw_inf_diff(std::span<const double> x, std::span<const double> y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

}  // namespace

SsorPreconditioner::SsorPreconditioner(const CsrMatrix& a, double omega) : a_(&a), omega_(omega) {
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument("SsorPreconditioner: matrix not square");
    for (index_t i = 0; i < a.n_rows; ++i) {
        double diag = 0.0;
        for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
            if (a.col_indices[k] == i) diag = a.values[k];
        if (diag == 0.0)
            throw std::invalid_argument("SsorPreconditioner: zero diagonal at row " +
                                        std::to_string(i));
    }
}

std::vector<double> SsorPreconditioner::apply(std::span<const double> r) const {
    if (index_t(r.size()) != a_->n_rows)
        throw std::invalid_argument("SsorPreconditioner::apply: size mismatch");
    std::vector<double> x(r.size(), 0.0);
    sor_sweep(*a_, x, r, omega_, SweepDirection::Forward);
    sor_sweep(*a_, x, r, omega_, SweepDirection::Backward);
    return x;
}

std::string to_string(StopReason reason) {
    switch (reason) {
        case StopReason::Converged: return "converged";
        case StopReason::ExactError: return "exact_error";
        case StopReason::Floor: return "floor";
        case StopReason::MaxIters: return "max_iters";
    }
    return "unknown";
}

double inf_error(std::span<const double> x, std::span<const double> x_exact) {
    if (x.size() != x_exact.size())
        throw std::invalid_argument("inf_error: vectors have lengths " +
                                    std::to_string(x.size()) + " and " +
                                    std::to_string(x_exact.size()));
    return raw_inf_diff(x, x_exact);
}

PcgResult pcg(const CsrMatrix& a, std::span<const double> b, const Preconditioner* precond,
              const std::vector<double>* x_exact, double tol, index_t max_iters,
              const IterationObserver& observer) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument("pcg: matrix not square");
    const index_t n = a.n_rows;
    if (index_t(b.size()) != n)
        throw std::invalid_argument("pcg: right-hand side has " + std::to_string(b.size()) +
                                    " entries for an operator with " + std::to_string(n) +
                                    " rows");
    if (x_exact && index_t(x_exact->size()) != n)
        throw std::invalid_argument("pcg: exact solution has " + std::to_string(x_exact->size()) +
                                    " entries for an operator with " + std::to_string(n) +
                                    " rows");
    if (max_iters < 0) throw std::invalid_argument("pcg: negative iteration limit");

    const bool experiment = x_exact != nullptr;
    const std::uint64_t flops_at_entry = FlopCounter::total();

    PcgResult result;
    ConvergenceTrace& trace = result.trace;
    trace.preconditioner = precond ? precond->name() : "none";
    trace.n = n;

    std::vector<double>& x = result.x;
    x.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> z = precond ? precond->apply(r) : r;
    std::vector<double> p = z;
    double rz = dot(r, z);
    const double rz0 = rz;

    double exact_scale = 0.0;
    if (experiment)
        for (double v : *x_exact) exact_scale = std::max(exact_scale, std::abs(v));

    double best_error = std::numeric_limits<double>::infinity();
    index_t stall = 0;

    auto record = [&](index_t iteration) {
        TraceRecord rec;
        rec.iteration = iteration;
        rec.inf_error = experiment ? raw_inf_diff(x, *x_exact)
                                   : std::numeric_limits<double>::quiet_NaN();
        rec.residual_2norm = raw_norm2(r);
        rec.cumulative_flops = FlopCounter::total() - flops_at_entry;
        trace.records.push_back(rec);
        if (observer) observer(iteration, x);
        return rec;
    };

    TraceRecord rec = record(0);
    auto stopped = [&](const TraceRecord& latest) {
        if (experiment) {
            if (latest.inf_error <= tol * exact_scale) {
                trace.stop_reason = StopReason::ExactError;
                return true;
            }
            if (latest.inf_error < best_error) {
                best_error = latest.inf_error;
                stall = 0;
            } else if (++stall >= 25) {
                trace.stop_reason = StopReason::Floor;
                trace.floor_value = best_error;
                return true;
            }
            return false;
        }
        if (latest.residual_2norm == 0.0 ||
            (rz > 0.0 && rz0 > 0.0 && std::sqrt(rz / rz0) <= tol)) {
            trace.stop_reason = StopReason::Converged;
            return true;
        }
        return false;
    };
    if (stopped(rec)) return result;

    for (index_t k = 1; k <= max_iters; ++k) {
        const std::vector<double> ap = spmv(a, p);
        const double pap = dot(p, ap);
        if (pap <= 0.0)
            throw std::runtime_error("pcg: curvature p'Ap = " + std::to_string(pap) +
                                     " at iteration " + std::to_string(k) +
                                     " (matrix not positive definite)");
        const double alpha = rz / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        z = precond ? precond->apply(r) : r;
        const double rz_next = dot(r, z);

        rec = record(k);
        const double beta = rz_next / rz;
        rz = rz_next;
        if (stopped(rec)) return result;
        // The update p = z + beta p is solver work: count its 2n flops.
        for (index_t i = 0; i < n; ++i)
            p[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] +
                                             beta * p[static_cast<std::size_t>(i)];
        FlopCounter::add(2ull * static_cast<std::uint64_t>(n));
    }
    trace.stop_reason = StopReason::MaxIters;
    return result;
}

std::string trace_csv(const ConvergenceTrace& trace) {
    std::string out = "iter,inf_error,resid2,flops\n";
    char line[160];
    for (const TraceRecord& rec : trace.records) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%llu\n", int(rec.iteration),
                      rec.inf_error, rec.residual_2norm,
                      static_cast<unsigned long long>(rec.cumulative_flops));
        out += line;
    }
    return out;
}

}  // namespace vlump
