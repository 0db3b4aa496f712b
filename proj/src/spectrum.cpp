#include "vlump/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "vlump/dense.hpp"

namespace vlump {

namespace {

/// Eigenvalues of a symmetric tridiagonal matrix (diag d, subdiagonal e with
/// e[i] coupling d[i] and d[i+1]) by the implicit-shift QL iteration, sorted
/// ascending.
std::vector<double> tridiagonal_eigenvalues(std::vector<double> d, std::vector<double> e) {
    const index_t n = index_t(d.size());
    if (n == 0) return {};
    if (e.size() + 1 != d.size())
        throw std::invalid_argument("tridiagonal_eigenvalues: off-diagonal size mismatch");
    e.push_back(0.0);  // sentinel slot written by the rotation loop
    for (index_t l = 0; l < n; ++l) {
        int iter = 0;
        index_t m = l;
        do {
            for (m = l; m + 1 < n; ++m) {
                double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (++iter == 50)
                    throw std::runtime_error("tridiagonal_eigenvalues: QL failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                index_t i = m;
                while (i > l) {
                    --i;
                    double f = s * e[i];
                    double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {  // deflate: split off a converged eigenvalue
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    std::sort(d.begin(), d.end());
    return d;
}

/// Householder reduction of a dense symmetric matrix to tridiagonal form.
/// Only the lower triangle of `a` is referenced; `a` is destroyed. On return
/// `d` holds the diagonal and `e` the subdiagonal (e[i] couples d[i], d[i+1]).
void householder_tridiagonalize(Dense<double>& a, std::vector<double>& d, std::vector<double>& e) {
    const index_t n = a.rows;
    d.assign(std::size_t(n), 0.0);
    std::vector<double> sub(std::size_t(n), 0.0);  // sub[i] couples d[i-1], d[i]
    for (index_t i = n - 1; i >= 1; --i) {
        index_t l = i - 1;
        double h = 0.0;
        if (l > 0) {
            double scale = 0.0;
            for (index_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
            if (scale == 0.0) {
                sub[i] = a(i, l);
            } else {
                for (index_t k = 0; k <= l; ++k) {
                    a(i, k) /= scale;
                    h += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                double g = (f >= 0.0 ? -std::sqrt(h) : std::sqrt(h));
                sub[i] = scale * g;
                h -= f * g;
                a(i, l) = f - g;
                f = 0.0;
                for (index_t j = 0; j <= l; ++j) {
                    g = 0.0;
                    for (index_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
                    for (index_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
                    sub[j] = g / h;
                    f += sub[j] * a(i, j);
                }
                double hh = f / (h + h);
                for (index_t j = 0; j <= l; ++j) {
                    f = a(i, j);
                    g = sub[j] - hh * f;
                    sub[j] = g;
                    for (index_t k = 0; k <= j; ++k) a(j, k) -= f * sub[k] + g * a(i, k);
                }
            }
        } else {
            sub[i] = a(i, l);
        }
    }
    for (index_t i = 0; i < n; ++i) d[std::size_t(i)] = a(i, i);
    e.assign(std::size_t(n > 0 ? n - 1 : 0), 0.0);
    for (index_t i = 0; i + 1 < n; ++i) e[std::size_t(i)] = sub[std::size_t(i) + 1];
}

struct LanczosOutcome {
    double theta_min = 0.0;
    double theta_max = 0.0;
    bool min_converged = false;
    bool max_converged = false;
};

/// Lanczos with full reorthogonalization on an abstract symmetric operator.
/// An end is flagged converged once successive Ritz extremes change by less
/// than `tol` relative on two consecutive steps; exhausting the space
/// (breakdown or n steps) makes the tridiagonal matrix similar to the
/// operator on the Krylov space, so both ends are then accepted.
template <class Apply>
LanczosOutcome lanczos_extremes(index_t n, Apply&& apply, double tol, index_t max_steps,
                                Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    double nrm = norm2(v);
    if (!(nrm > 0.0)) throw std::runtime_error("lanczos: zero start vector");
    for (double& x : v) x /= nrm;

    std::vector<std::vector<double>> basis{v};
    std::vector<double> v_prev(std::size_t(n), 0.0);
    std::vector<double> alphas, betas;
    double beta_prev = 0.0;
    LanczosOutcome out;
    double prev_min = 0.0, prev_max = 0.0;
    int min_streak = 0, max_streak = 0;
    const index_t steps = std::min<index_t>(n, max_steps);

    for (index_t j = 0; j < steps; ++j) {
        std::vector<double> w = apply(basis.back());
        axpy(-beta_prev, v_prev, w);
        double alpha = dot(basis.back(), w);
        axpy(-alpha, basis.back(), w);
        for (int pass = 0; pass < 2; ++pass)
            for (const std::vector<double>& u : basis) axpy(-dot(u, w), u, w);
        alphas.push_back(alpha);

        std::vector<double> off = betas;
        std::vector<double> ritz = tridiagonal_eigenvalues(alphas, off);
        out.theta_min = ritz.front();
        out.theta_max = ritz.back();
        if (j >= 1) {
            double scale_min = std::max(std::abs(out.theta_min), 1e-300);
            double scale_max = std::max(std::abs(out.theta_max), 1e-300);
            min_streak = std::abs(out.theta_min - prev_min) <= tol * scale_min ? min_streak + 1 : 0;
            max_streak = std::abs(out.theta_max - prev_max) <= tol * scale_max ? max_streak + 1 : 0;
        }
        out.min_converged = min_streak >= 2;
        out.max_converged = max_streak >= 2;
        prev_min = out.theta_min;
        prev_max = out.theta_max;
        if (out.min_converged && out.max_converged) return out;

        double beta = norm2(w);
        double anorm = 0.0;
        for (double x : alphas) anorm = std::max(anorm, std::abs(x));
        for (double x : betas) anorm = std::max(anorm, std::abs(x));
        if (beta <= 1e-14 * std::max(anorm, 1e-300) || j + 1 == n) {
            // Krylov space exhausted: the Ritz values are exact on it.
            out.min_converged = true;
            out.max_converged = true;
            return out;
        }
        for (double& x : w) x /= beta;
        betas.push_back(beta);
        v_prev = basis.back();
        basis.push_back(std::move(w));
        beta_prev = beta;
    }
    return out;
}

/// Plain conjugate gradients to relative residual `tol`; used as the inner
/// solver of the shift-and-invert refinement. Returns the best iterate when
/// the cap is hit (the outer Lanczos reorthogonalization tolerates a slightly
/// inexact inverse).
std::vector<double> cg_solve(const CsrMatrix& a, std::span<const double> b, double tol,
                             index_t max_iters) {
    const index_t n = a.n_rows;
    std::vector<double> x(std::size_t(n), 0.0);
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    double rr = dot(r, r);
    const double stop = tol * tol * rr;
    if (rr == 0.0) return x;
    for (index_t it = 0; it < max_iters && rr > stop; ++it) {
        std::vector<double> ap = spmv(a, p);
        double pap = dot(p, ap);
        if (!(pap > 0.0))
            throw std::runtime_error("cg_solve: operator not positive definite (p^T A p = " +
                                     std::to_string(pap) + ")");
        double alpha = rr / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        double rr_next = dot(r, r);
        double beta = rr_next / rr;
        rr = rr_next;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    return x;
}

void check_symmetric(const CsrMatrix& a, const char* who) {
    if (a.n_rows != a.n_cols) throw std::invalid_argument(std::string(who) + ": matrix not square");
    double scale = 0.0;
    for (double v : a.values) scale = std::max(scale, std::abs(v));
    if (symmetry_gap(a) > 1e-10 * std::max(scale, 1e-300))
        throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

/// Explicit deflation of the singular Neumann operator: the raw (unpinned)
/// matrix annihilates constants, so add a rank-one shift (c/n) * 1 1^T with
/// c = max diagonal. That moves the kernel mode to c (inside the upper band,
/// since c <= lambda_max) and leaves every other eigenpair untouched, making
/// the smallest reported eigenvalue the physically meaningful smallest
/// nonzero one. Pinning a node instead would inject an artificial weakly
/// constrained mode that dominates the small end at order-one epsilon.
CsrMatrix deflate_constants(const CsrMatrix& raw) {
    const index_t n = raw.n_rows;
    double c = 0.0;
    for (index_t i = 0; i < n; ++i) c = std::max(c, raw.at(i, i));
    TripletBuilder shifted{n, n};
    const double w = c / double(n);
    for (index_t i = 0; i < n; ++i) {
        for (index_t k = raw.row_offsets[i]; k < raw.row_offsets[i + 1]; ++k)
            shifted.add(i, raw.col_indices[k], raw.values[k]);
        for (index_t j = 0; j < n; ++j) shifted.add(i, j, w);
    }
    return shifted.finalize();
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    if (den == 0.0) throw std::invalid_argument("fit_slope: abscissae coincide");
    return num / den;
}

}  // namespace

std::string to_string(BcVariant bc) {
    return bc == BcVariant::Neumann ? "neumann" : "dirichlet_top";
}

ExtremeEigenvalues extreme_eigenvalues(const CsrMatrix& a, double tol, index_t max_iters) {
    check_symmetric(a, "extreme_eigenvalues");
    const index_t n = a.n_rows;
    if (n == 0) throw std::invalid_argument("extreme_eigenvalues: empty matrix");
    if (!(tol > 0.0)) throw std::invalid_argument("extreme_eigenvalues: tol must be positive");
    if (n == 1) return {a.at(0, 0), a.at(0, 0)};

    Rng rng(0x6c616e63u);  // fixed seed keeps reports reproducible
    auto apply_a = [&a](const std::vector<double>& x) { return spmv(a, x); };
    LanczosOutcome plain = lanczos_extremes(n, apply_a, tol, max_iters, rng);
    double lambda_min = plain.theta_min;
    double lambda_max = plain.theta_max;
    bool min_ok = plain.min_converged;

    // The small end of a badly conditioned spectrum is unreliable from plain
    // Lanczos even when the successive-change test passes (it sits in a
    // rounding-dominated cluster), so refine it on the inverted operator,
    // where it becomes the dominant end.
    bool min_suspect = !plain.min_converged || !(plain.theta_min > 0.0) ||
                       plain.theta_max > 1e4 * plain.theta_min;
    if (min_suspect) {
        LanczosOutcome inverted;
        if (n <= 2000) {
            CholeskyFactor chol(a);  // exact inverse: cheap at this size
            auto apply_inv = [&chol](const std::vector<double>& x) { return chol.solve(x); };
            inverted = lanczos_extremes(n, apply_inv, tol, max_iters, rng);
        } else {
            const index_t inner_cap = 20 * n + 2000;
            auto apply_inv = [&](const std::vector<double>& x) {
                return cg_solve(a, x, 1e-10, inner_cap);
            };
            inverted = lanczos_extremes(n, apply_inv, tol, max_iters, rng);
        }
        if (inverted.theta_max > 0.0) lambda_min = 1.0 / inverted.theta_max;
        min_ok = inverted.max_converged;
    }
    if (!min_ok || !plain.max_converged)
        throw EigenvalueError("extreme_eigenvalues: no convergence in " +
                                  std::to_string(max_iters) + " iterations",
                              std::min(lambda_min, lambda_max), lambda_max);
    return {lambda_min, lambda_max};
}

std::vector<double> full_spectrum_dense(const CsrMatrix& a) {
    check_symmetric(a, "full_spectrum_dense");
    if (a.n_rows > 2000)
        throw std::invalid_argument("full_spectrum_dense: n = " + std::to_string(a.n_rows) +
                                    " exceeds the dense limit of 2000");
    if (a.n_rows == 0) return {};
    Dense<double> d = dense_from_csr<double>(a);
    if (a.n_rows == 1) return {d(0, 0)};
    std::vector<double> diag, off;
    householder_tridiagonalize(d, diag, off);
    return tridiagonal_eigenvalues(std::move(diag), std::move(off));
}

GapCensus spectral_gap_census(const std::vector<double>& spectrum, index_t surface_dof_count) {
    if (spectrum.size() < 2)
        throw std::invalid_argument("spectral_gap_census: need at least two eigenvalues");
    GapCensus census;
    census.surface_dof_count = surface_dof_count;
    census.gap_ratio = 0.0;
    census.below_gap_count = 1;
    for (std::size_t i = 0; i + 1 < spectrum.size(); ++i) {
        double lo = spectrum[i], hi = spectrum[i + 1];
        double ratio;
        if (lo > 0.0)
            ratio = hi / lo;
        else if (hi > 0.0)
            ratio = std::numeric_limits<double>::infinity();
        else
            ratio = 1.0;
        if (ratio > census.gap_ratio) {
            census.gap_ratio = ratio;
            census.below_gap_count = index_t(i) + 1;
        }
    }
    census.matches_surface_modes = census.below_gap_count == surface_dof_count;
    return census;
}

ScalingSweepResult scaling_sweep(const TetMesh& mesh, const std::vector<double>& epsilons,
                                 BcVariant bc) {
    if (epsilons.empty()) throw std::invalid_argument("scaling_sweep: empty epsilon list");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0))
            throw std::invalid_argument("scaling_sweep: epsilons must be positive");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
            throw std::invalid_argument("scaling_sweep: epsilons must be strictly descending");
    }

    ScalingSweepResult result;
    for (double eps : epsilons) {
        AssembledSystem sys = assemble(mesh, eps);
        CsrMatrix op;
        if (bc == BcVariant::Neumann) {
            // Spectral reports describe the singular Neumann operator with its
            // constant kernel deflated, not the node-pinned solver system.
            if (sys.n() > 2000)
                throw std::invalid_argument(
                    "scaling_sweep: Neumann deflation is explicit and limited to n <= 2000; "
                    "n = " + std::to_string(sys.n()));
            op = deflate_constants(
                add_scaled(sys.a_vertical, eps * eps, sys.a_horizontal));
        } else {
            BlockDecomposition blocks = decompose(sys);
            op = std::move(blocks.interior);
        }
        SpectrumReport report;
        report.epsilon = eps;
        report.bc_variant = bc;
        ExtremeEigenvalues ext = extreme_eigenvalues(op, 1e-9, 1000);
        report.lambda_min = ext.lambda_min;
        report.lambda_max = ext.lambda_max;
        report.cond = ext.lambda_max / ext.lambda_min;
        if (op.n_rows <= 500) report.full_spectrum = full_spectrum_dense(op);
        result.reports.push_back(std::move(report));
    }

    if (bc == BcVariant::Neumann && result.reports.size() >= 2) {
        std::vector<double> lx, ly;
        for (const SpectrumReport& r : result.reports) {
            lx.push_back(std::log(r.epsilon));
            ly.push_back(std::log(r.cond));
        }
        result.fitted_slope = fit_slope(lx, ly);
    }
    if (bc == BcVariant::DirichletTop) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const SpectrumReport& r : result.reports) {
            lo = std::min(lo, r.cond);
            hi = std::max(hi, r.cond);
        }
        result.cond_ratio = hi / lo;
    }
    return result;
}

ExtremeEigenvalues preconditioned_extremes(const CsrMatrix& a, const Preconditioner& m,
                                           index_t steps, std::uint64_t seed) {
    if (a.n_rows != a.n_cols)
        throw std::invalid_argument("preconditioned_extremes: matrix not square");
    if (steps < 1) throw std::invalid_argument("preconditioned_extremes: steps must be >= 1");
    const index_t n = a.n_rows;

    Rng rng(seed);
    std::vector<double> r(static_cast<std::size_t>(n));
    for (double& x : r) x = rng.uniform(-1.0, 1.0);

    std::vector<double> z = m.apply(r);
    double rz = dot(r, z);
    if (!(rz > 0.0))
        throw std::runtime_error(
            "preconditioned_extremes: preconditioner not positive on the probe vector");
    std::vector<double> p = z;

    std::vector<double> alphas, betas;
    for (index_t k = 0; k < steps; ++k) {
        const std::vector<double> ap = spmv(a, p);
        const double pap = dot(p, ap);
        if (!(pap > 0.0))
            throw std::runtime_error("preconditioned_extremes: curvature p'Ap = " +
                                     std::to_string(pap) + " at step " + std::to_string(k + 1) +
                                     " (matrix not positive definite)");
        const double alpha = rz / pap;
        alphas.push_back(alpha);
        axpy(-alpha, ap, r);
        z = m.apply(r);
        const double rz_next = dot(r, z);
        if (!(rz_next > 0.0)) break;  // converged on the probe: stop extending the basis
        const double beta = rz_next / rz;
        betas.push_back(beta);
        rz = rz_next;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
        FlopCounter::add(2 * p.size());
    }

    // The CG coefficients assemble the Lanczos tridiagonal of M^{-1}A in the
    // M-inner product; its extreme eigenvalues estimate the preconditioned
    // spectrum from inside.
    const std::size_t kk = alphas.size();
    std::vector<double> diag(kk), off(kk - 1);
    diag[0] = 1.0 / alphas[0];
    for (std::size_t j = 1; j < kk; ++j) {
        diag[j] = 1.0 / alphas[j] + betas[j - 1] / alphas[j - 1];
        off[j - 1] = std::sqrt(betas[j - 1]) / alphas[j - 1];
    }
    const std::vector<double> eigs = tridiagonal_eigenvalues(std::move(diag), std::move(off));
    return ExtremeEigenvalues{eigs.front(), eigs.back()};
}

}  // namespace vlump
