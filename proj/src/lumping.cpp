#include "vlump/lumping.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vlump {
namespace {

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

struct Located {
    index_t triangle = -1;
    std::array<double, 3> weights{};
};

/// Barycentric weights of the point of triangle (a, b, c) closest to q,
/// plus the squared distance to it. Voronoi-region case analysis; the
/// weights are convex by construction.
std::pair<double, std::array<double, 3>> closest_point(const std::array<double, 2>& a,
                                                       const std::array<double, 2>& b,
                                                       const std::array<double, 2>& c, double qx,
                                                       double qy) {
    const double abx = b[0] - a[0], aby = b[1] - a[1];
    const double acx = c[0] - a[0], acy = c[1] - a[1];
    auto finish = [&](double w0, double w1, double w2) {
        const double px = w0 * a[0] + w1 * b[0] + w2 * c[0];
        const double py = w0 * a[1] + w1 * b[1] + w2 * c[1];
        const double dx = qx - px, dy = qy - py;
        return std::make_pair(dx * dx + dy * dy, std::array<double, 3>{w0, w1, w2});
    };

    const double d1 = abx * (qx - a[0]) + aby * (qy - a[1]);
    const double d2 = acx * (qx - a[0]) + acy * (qy - a[1]);
    if (d1 <= 0.0 && d2 <= 0.0) return finish(1.0, 0.0, 0.0);

    const double d3 = abx * (qx - b[0]) + aby * (qy - b[1]);
    const double d4 = acx * (qx - b[0]) + acy * (qy - b[1]);
    if (d3 >= 0.0 && d4 <= d3) return finish(0.0, 1.0, 0.0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish(1.0 - v, v, 0.0);
    }

    const double d5 = abx * (qx - c[0]) + aby * (qy - c[1]);
    const double d6 = acx * (qx - c[0]) + acy * (qy - c[1]);
    if (d6 >= 0.0 && d5 <= d6) return finish(0.0, 0.0, 1.0);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish(1.0 - w, 0.0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(0.0, 1.0 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return finish(1.0 - v - w, v, w);
}

/// Uniform background grid over the footprint bounding box. Every cell
/// lists (ascending) the triangles whose bounding box overlaps it; lookups
/// test exact containment first, then snap to a near-miss triangle, then
/// fall back to the globally nearest one.
class PointLocator {
public:
    explicit PointLocator(const SurfaceMesh& surface) : surface_(&surface) {
        if (surface.triangles.empty())
            throw std::invalid_argument("build_extrapolation: surface has no triangles");
        xmin_ = ymin_ = std::numeric_limits<double>::infinity();
        xmax_ = ymax_ = -std::numeric_limits<double>::infinity();
        for (const auto& p : surface.coords) {
            xmin_ = std::min(xmin_, p[0]);
            xmax_ = std::max(xmax_, p[0]);
            ymin_ = std::min(ymin_, p[1]);
            ymax_ = std::max(ymax_, p[1]);
        }
        diameter_ = std::hypot(xmax_ - xmin_, ymax_ - ymin_);
        if (!(diameter_ > 0.0))
            throw std::invalid_argument("build_extrapolation: surface footprint is degenerate");
        n_side_ = std::max<index_t>(1, index_t(std::sqrt(double(surface.triangles.size()))));
        cells_.assign(std::size_t(n_side_) * n_side_, {});
        for (index_t t = 0; t < index_t(surface.triangles.size()); ++t) {
            const auto& tri = surface.triangles[t];
            const auto& a = surface.coords[tri[0]];
            const auto& b = surface.coords[tri[1]];
            const auto& c = surface.coords[tri[2]];
            const index_t ix0 = cell_x(std::min({a[0], b[0], c[0]}));
            const index_t ix1 = cell_x(std::max({a[0], b[0], c[0]}));
            const index_t iy0 = cell_y(std::min({a[1], b[1], c[1]}));
            const index_t iy1 = cell_y(std::max({a[1], b[1], c[1]}));
            for (index_t iy = iy0; iy <= iy1; ++iy)
                for (index_t ix = ix0; ix <= ix1; ++ix)
                    cells_[std::size_t(iy) * n_side_ + ix].push_back(t);
        }
    }

    double diameter() const { return diameter_; }

    std::optional<Located> locate(double x, double y) const {
        const auto& cell = cells_[std::size_t(cell_y(y)) * n_side_ + cell_x(x)];
        // Exact containment, lowest triangle id first (deterministic on
        // shared edges; either incident triangle yields the same weights).
        for (index_t t : cell) {
            auto w = contains(t, x, y);
            if (w) return Located{t, normalized(*w)};
        }
        // Near misses: snap to the first triangle within 1e-9 x diameter.
        const double snap = 1e-9 * diameter_;
        for (index_t t : cell) {
            auto [d2, w] = closest_point_to(t, x, y);
            if (d2 <= snap * snap) return Located{t, normalized(w)};
        }
        // Nearest triangle over the whole surface, within 1e-6 x diameter.
        const double fallback = 1e-6 * diameter_;
        double best_d2 = std::numeric_limits<double>::infinity();
        Located best;
        for (index_t t = 0; t < index_t(surface_->triangles.size()); ++t) {
            auto [d2, w] = closest_point_to(t, x, y);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = Located{t, w};
            }
        }
        if (best_d2 <= fallback * fallback) {
            best.weights = normalized(best.weights);
            return best;
        }
        return std::nullopt;
    }

private:
    index_t cell_x(double x) const {
        if (!(xmax_ > xmin_)) return 0;
        const double f = (x - xmin_) / (xmax_ - xmin_) * double(n_side_);
        return std::clamp<index_t>(index_t(std::floor(f)), 0, n_side_ - 1);
    }
    index_t cell_y(double y) const {
        if (!(ymax_ > ymin_)) return 0;
        const double f = (y - ymin_) / (ymax_ - ymin_) * double(n_side_);
        return std::clamp<index_t>(index_t(std::floor(f)), 0, n_side_ - 1);
    }

    /// Signed-area barycentric test; degenerate triangles contain nothing.
    std::optional<std::array<double, 3>> contains(index_t t, double x, double y) const {
        const auto& tri = surface_->triangles[t];
        const auto& a = surface_->coords[tri[0]];
        const auto& b = surface_->coords[tri[1]];
        const auto& c = surface_->coords[tri[2]];
        const double area = cross2(b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1]);
        if (area == 0.0) return std::nullopt;
        const double s = area > 0.0 ? 1.0 : -1.0;
        const double w0 = s * cross2(b[0] - x, b[1] - y, c[0] - x, c[1] - y);
        const double w1 = s * cross2(c[0] - x, c[1] - y, a[0] - x, a[1] - y);
        const double w2 = s * cross2(a[0] - x, a[1] - y, b[0] - x, b[1] - y);
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) return std::nullopt;
        return std::array<double, 3>{w0, w1, w2};
    }

    std::pair<double, std::array<double, 3>> closest_point_to(index_t t, double x,
                                                              double y) const {
        const auto& tri = surface_->triangles[t];
        return closest_point(surface_->coords[tri[0]], surface_->coords[tri[1]],
                             surface_->coords[tri[2]], x, y);
    }

    static std::array<double, 3> normalized(std::array<double, 3> w) {
        const double s = w[0] + w[1] + w[2];
        if (s > 0.0 && s != 1.0) {
            w[0] /= s;
            w[1] /= s;
            w[2] /= s;
        }
        return w;
    }

    const SurfaceMesh* surface_;
    double xmin_ = 0.0, xmax_ = 0.0, ymin_ = 0.0, ymax_ = 0.0, diameter_ = 0.0;
    index_t n_side_ = 1;
    std::vector<std::vector<index_t>> cells_;
};

}  // namespace

ExtrapolationOperator build_extrapolation(const TetMesh& mesh, const SurfaceMesh& surface,
                                          const AssembledSystem& system) {
    const index_t n = system.n();
    if (mesh.n_nodes() != n)
        throw std::invalid_argument("build_extrapolation: mesh has " +
                                    std::to_string(mesh.n_nodes()) + " nodes but the system has " +
                                    std::to_string(n) + " rows");
    const index_t m = index_t(system.surface_dofs.size());

    std::vector<index_t> column(std::size_t(n), -1);
    for (index_t c = 0; c < m; ++c) column[system.surface_dofs[c]] = c;
    for (index_t id : surface.node_ids)
        if (id < 0 || id >= n)
            throw std::invalid_argument("build_extrapolation: surface node " + std::to_string(id) +
                                        " is out of range");

    PointLocator locator(surface);
    TripletBuilder builder(n, m);
    std::vector<index_t> pinned;
    for (index_t i = 0; i < n; ++i) {
        if (i == system.constrained_node) {
            pinned.push_back(i);  // its identity column does not exist
            continue;
        }
        if (column[i] >= 0) {
            builder.add(i, column[i], 1.0);
            continue;
        }
        const Vec3& p = mesh.nodes[i];
        auto hit = locator.locate(p.x, p.y);
        if (!hit)
            throw std::runtime_error("build_extrapolation: node " + std::to_string(i) + " at (" +
                                     std::to_string(p.x) + ", " + std::to_string(p.y) +
                                     ") projects outside the top surface");
        const auto& tri = surface.triangles[hit->triangle];
        bool lost_weight = false;
        for (int k = 0; k < 3; ++k) {
            const double w = hit->weights[std::size_t(k)];
            if (w == 0.0) continue;
            const index_t node = surface.node_ids[tri[std::size_t(k)]];
            if (node == system.constrained_node) {
                lost_weight = true;
                continue;
            }
            if (column[node] < 0)
                throw std::invalid_argument("build_extrapolation: surface node " +
                                            std::to_string(node) +
                                            " is not a surface DOF of the system");
            builder.add(i, column[node], w);
        }
        if (lost_weight) pinned.push_back(i);
    }

    ExtrapolationOperator e;
    e.matrix = builder.finalize();
    e.surface_dofs = system.surface_dofs;
    e.interior_dofs = system.interior_dofs;
    e.pinned_rows = std::move(pinned);
    return e;
}

Dense<double> exact_extrapolation(const AssembledSystem& system) {
    const index_t n = system.n();
    if (n > 500)
        throw std::invalid_argument("exact_extrapolation: n = " + std::to_string(n) +
                                    " exceeds the dense cap of 500");
    const BlockDecomposition blocks = decompose(system);
    const index_t m = blocks.surface_block.n_rows;
    const index_t ni = blocks.interior.n_rows;

    Dense<quad> abar = dense_from_csr<quad>(blocks.interior);
    std::vector<index_t> piv;
    lu_factor(abar, piv);

    Dense<double> e(n, m);
    std::vector<quad> rhs(static_cast<std::size_t>(ni));
    for (index_t c = 0; c < m; ++c) {
        std::fill(rhs.begin(), rhs.end(), quad(0));
        // Column c of -C^T is -(row c of C).
        for (index_t k = blocks.coupling.row_offsets[c]; k < blocks.coupling.row_offsets[c + 1];
             ++k)
            rhs[std::size_t(blocks.coupling.col_indices[k])] = quad(-blocks.coupling.values[k]);
        lu_solve(abar, piv, rhs);
        e(system.surface_dofs[c], c) = 1.0;
        for (index_t k = 0; k < ni; ++k)
            e(system.interior_dofs[k], c) = double(rhs[std::size_t(k)]);
    }
    return e;  // the constrained node's row stays zero
}

std::string to_string(VlumpVariant variant) {
    switch (variant) {
        case VlumpVariant::Sor:
            return "vl-sor";
        case VlumpVariant::AdditiveAmg:
            return "vl-add";
    }
    throw std::logic_error("to_string: unknown VlumpVariant");
}

VlumpPreconditioner::VlumpPreconditioner(const AssembledSystem& system,
                                         ExtrapolationOperator e_tilde, VlumpConfig config)
    : system_(&system), e_tilde_(std::move(e_tilde)), config_(config) {
    if (e_tilde_.matrix.n_rows != system.n())
        throw std::invalid_argument("VlumpPreconditioner: extrapolation has " +
                                    std::to_string(e_tilde_.matrix.n_rows) +
                                    " rows but the system has " + std::to_string(system.n()));
    if (e_tilde_.matrix.n_cols != index_t(system.surface_dofs.size()))
        throw std::invalid_argument("VlumpPreconditioner: extrapolation has " +
                                    std::to_string(e_tilde_.matrix.n_cols) + " columns but " +
                                    std::to_string(system.surface_dofs.size()) +
                                    " surface DOFs exist");
    const CsrMatrix coarse_operator = triple_product(e_tilde_.matrix, system.a_eps);
    if (config_.planar_coarse_candidates) {
        CandidateBlock candidates(system.surface_dofs.size());
        for (std::size_t k = 0; k < system.surface_dofs.size(); ++k) {
            const Vec3& p = system.node_coords[std::size_t(system.surface_dofs[k])];
            candidates[k] = {1.0, p.x, p.y};
        }
        coarse_ = build_hierarchy(coarse_operator, candidates, config_.strength_threshold,
                                  config_.prolongator_omega, config_.coarsest_cap,
                                  config_.max_levels);
    } else {
        coarse_ = build_hierarchy(coarse_operator, config_.strength_threshold,
                                  config_.prolongator_omega, config_.coarsest_cap,
                                  config_.max_levels);
    }
    if (config_.variant == VlumpVariant::AdditiveAmg)
        interior_ = build_hierarchy(decompose(system).interior, config_.strength_threshold,
                                    config_.prolongator_omega, config_.coarsest_cap,
                                    config_.max_levels);
}

const AmgHierarchy& VlumpPreconditioner::interior_hierarchy() const {
    if (!interior_)
        throw std::logic_error("VlumpPreconditioner: the SOR variant has no interior hierarchy");
    return *interior_;
}

std::vector<double> VlumpPreconditioner::apply(std::span<const double> r) const {
    const CsrMatrix& a = system_->a_eps;
    if (index_t(r.size()) != a.n_rows)
        throw std::invalid_argument("VlumpPreconditioner::apply: residual length " +
                                    std::to_string(r.size()) + " does not match system size " +
                                    std::to_string(a.n_rows));
    const CsrMatrix& et = e_tilde_.matrix;

    std::vector<double> x(r.size(), 0.0);
    sor_sweep(a, x, r, config_.sor_omega, SweepDirection::Forward);
    std::vector<double> res(r.begin(), r.end());
    const std::vector<double> ax = spmv(a, x);
    axpy(-1.0, ax, res);
    const std::vector<double> coarse_x = vcycle(coarse_, spmv_transpose(et, res));
    const std::vector<double> correction = spmv(et, coarse_x);
    axpy(1.0, correction, x);
    sor_sweep(a, x, r, config_.sor_omega, SweepDirection::Backward);
    if (config_.variant == VlumpVariant::Sor) return x;

    const double scale = config_.additive_scale;
    const std::vector<index_t>& interior = system_->interior_dofs;
    std::vector<double> r_int(interior.size());
    for (std::size_t k = 0; k < interior.size(); ++k) r_int[k] = r[std::size_t(interior[k])];
    const std::vector<double> z_int = vcycle(*interior_, r_int);
    for (std::size_t k = 0; k < interior.size(); ++k)
        x[std::size_t(interior[k])] += scale * z_int[k];
    x[std::size_t(system_->constrained_node)] +=
        scale * r[std::size_t(system_->constrained_node)];
    FlopCounter::add(2 * interior.size() + 2);
    return x;
}

std::string VlumpPreconditioner::build_report_csv() const {
    const CsrMatrix& coarse_op = coarse_.levels.front().a;
    std::ostringstream out;
    out << "variant,n,coarse_rows,coarse_nnz,coarse_levels,interior_levels\n";
    out << name() << ',' << system_->n() << ',' << coarse_op.n_rows << ',' << coarse_op.nnz()
        << ',' << coarse_.depth() << ',' << (interior_ ? interior_->depth() : 0) << '\n';
    return out.str();
}

std::vector<double> schur_solve_reference(const AssembledSystem& system,
                                          std::span<const double> b) {
    const index_t n = system.n();
    if (n > 500)
        throw std::invalid_argument("schur_solve_reference: n = " + std::to_string(n) +
                                    " exceeds the dense cap of 500");
    if (index_t(b.size()) != n)
        throw std::invalid_argument("schur_solve_reference: right-hand side length " +
                                    std::to_string(b.size()) + " does not match system size " +
                                    std::to_string(n));
    const BlockDecomposition blocks = decompose(system);
    const index_t m = blocks.surface_block.n_rows;
    const index_t ni = blocks.interior.n_rows;

    Dense<quad> abar = dense_from_csr<quad>(blocks.interior);
    std::vector<index_t> piv;
    lu_factor(abar, piv);

    // Y = Abar^{-1} C^T, one interior solve per surface DOF.
    Dense<quad> y(ni, m);
    std::vector<quad> work(static_cast<std::size_t>(ni));
    for (index_t c = 0; c < m; ++c) {
        std::fill(work.begin(), work.end(), quad(0));
        for (index_t k = blocks.coupling.row_offsets[c]; k < blocks.coupling.row_offsets[c + 1];
             ++k)
            work[std::size_t(blocks.coupling.col_indices[k])] = quad(blocks.coupling.values[k]);
        lu_solve(abar, piv, work);
        for (index_t i = 0; i < ni; ++i) y(i, c) = work[std::size_t(i)];
    }

    // Schur complement S = B - C Y.
    Dense<quad> s = dense_from_csr<quad>(blocks.surface_block);
    for (index_t i = 0; i < m; ++i)
        for (index_t k = blocks.coupling.row_offsets[i]; k < blocks.coupling.row_offsets[i + 1];
             ++k) {
            const quad cik = quad(blocks.coupling.values[k]);
            const index_t kk = blocks.coupling.col_indices[k];
            for (index_t j = 0; j < m; ++j) s(i, j) -= cik * y(kk, j);
        }

    // Surface right-hand side b' - C Abar^{-1} bbar.
    std::vector<quad> bbar(static_cast<std::size_t>(ni));
    for (index_t k = 0; k < ni; ++k) bbar[std::size_t(k)] = quad(b[std::size_t(system.interior_dofs[k])]);
    std::vector<quad> abar_inv_bbar = bbar;
    lu_solve(abar, piv, abar_inv_bbar);
    std::vector<quad> rhs(static_cast<std::size_t>(m));
    for (index_t c = 0; c < m; ++c) {
        quad v = quad(b[std::size_t(system.surface_dofs[c])]);
        for (index_t k = blocks.coupling.row_offsets[c]; k < blocks.coupling.row_offsets[c + 1];
             ++k)
            v -= quad(blocks.coupling.values[k]) *
                 abar_inv_bbar[std::size_t(blocks.coupling.col_indices[k])];
        rhs[std::size_t(c)] = v;
    }

    std::vector<quad> phi_s = dense_solve(std::move(s), std::move(rhs));

    // Reconstruction: Abar phibar = bbar - C^T phi'.
    std::vector<quad> interior_rhs = bbar;
    for (index_t c = 0; c < m; ++c)
        for (index_t k = blocks.coupling.row_offsets[c]; k < blocks.coupling.row_offsets[c + 1];
             ++k)
            interior_rhs[std::size_t(blocks.coupling.col_indices[k])] -=
                quad(blocks.coupling.values[k]) * phi_s[std::size_t(c)];
    lu_solve(abar, piv, interior_rhs);

    std::vector<double> x(std::size_t(n), 0.0);
    for (index_t c = 0; c < m; ++c) x[std::size_t(system.surface_dofs[c])] = double(phi_s[std::size_t(c)]);
    for (index_t k = 0; k < ni; ++k)
        x[std::size_t(system.interior_dofs[k])] = double(interior_rhs[std::size_t(k)]);
    x[std::size_t(system.constrained_node)] = b[std::size_t(system.constrained_node)];
    return x;
}

}  // namespace vlump
