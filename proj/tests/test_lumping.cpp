#include "vlump/lumping.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "vlump/amg.hpp"
#include "vlump/dense.hpp"
#include "vlump/fem.hpp"
#include "vlump/mesh.hpp"
#include "vlump/pcg.hpp"
#include "vlump/spectrum.hpp"

using namespace vlump;

namespace {

CsrMatrix identity_csr(index_t n) {
    TripletBuilder b(n, n);
    for (index_t i = 0; i < n; ++i) b.add(i, i, 1.0);
    return b.finalize();
}

Dense<double> csr_to_dense(const CsrMatrix& m) {
    Dense<double> d(m.n_rows, m.n_cols);
    for (index_t i = 0; i < m.n_rows; ++i)
        for (index_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
            d(i, m.col_indices[k]) = m.values[k];
    return d;
}

VlumpPreconditioner make_vl(const TetMesh& mesh, const SurfaceMesh& surf,
                            const AssembledSystem& sys, VlumpVariant variant) {
    VlumpConfig cfg;
    cfg.variant = variant;
    return VlumpPreconditioner(sys, build_extrapolation(mesh, surf, sys), cfg);
}

/// Four flat-top surface vertices (node 0 is the reference corner at the
/// lexicographically smallest (x, y)) over two triangles, plus hand-placed
/// interior nodes whose projections have pen-and-paper barycentric weights.
struct HandProjection {
    TetMesh mesh;
    SurfaceMesh surf;
    AssembledSystem sys;

    explicit HandProjection(std::vector<Vec3> interior_nodes) {
        mesh.nodes = {Vec3{-1.0, 0.0, 1.0}, Vec3{0.0, 0.0, 1.0}, Vec3{1.0, 0.0, 1.0},
                      Vec3{0.0, 1.0, 1.0}};
        for (const Vec3& p : interior_nodes) mesh.nodes.push_back(p);
        surf.node_ids = {0, 1, 2, 3};
        surf.coords = {{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
        surf.triangles = {{1, 2, 3}, {0, 1, 3}};
        const index_t n = index_t(mesh.nodes.size());
        sys.a_eps = identity_csr(n);
        sys.constrained_node = 0;
        sys.surface_dofs = {1, 2, 3};
        for (index_t i = 4; i < n; ++i) sys.interior_dofs.push_back(i);
        sys.node_coords = mesh.nodes;
    }
};

std::vector<std::pair<index_t, double>> row_entries(const CsrMatrix& m, index_t i) {
    std::vector<std::pair<index_t, double>> out;
    for (index_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
        out.emplace_back(m.col_indices[k], m.values[k]);
    return out;
}

}  // namespace

TEST_CASE("projection rows carry hand-computed barycentric weights") {
    // Interior nodes: one at the centroid-side point (0.25, 0.25), one
    // directly beneath a surface vertex, one inside the triangle that touches
    // the reference corner.
    HandProjection h({Vec3{0.25, 0.25, 0.5}, Vec3{1.0, 0.0, 0.3}, Vec3{-0.5, 0.25, 0.2}});
    ExtrapolationOperator e = build_extrapolation(h.mesh, h.surf, h.sys);

    CHECK(e.matrix.n_rows == 7);
    CHECK(e.matrix.n_cols == 3);
    CHECK(e.surface_dofs == h.sys.surface_dofs);
    CHECK(e.interior_dofs == h.sys.interior_dofs);

    // The reference node's row is empty (its column does not exist).
    CHECK(row_entries(e.matrix, 0).empty());

    // Surface rows are identity.
    for (index_t c = 0; c < 3; ++c) {
        auto row = row_entries(e.matrix, h.sys.surface_dofs[std::size_t(c)]);
        REQUIRE(row.size() == 1);
        CHECK(row[0].first == c);
        CHECK(row[0].second == 1.0);
    }

    // (0.25, 0.25) inside triangle (0,0)-(1,0)-(0,1): weights 1/2, 1/4, 1/4.
    auto mid = row_entries(e.matrix, 4);
    REQUIRE(mid.size() == 3);
    CHECK(mid[0] == std::pair<index_t, double>(0, 0.5));
    CHECK(mid[1] == std::pair<index_t, double>(1, 0.25));
    CHECK(mid[2] == std::pair<index_t, double>(2, 0.25));

    // Directly beneath the vertex at (1, 0): a single unit weight.
    auto under = row_entries(e.matrix, 5);
    REQUIRE(under.size() == 1);
    CHECK(under[0] == std::pair<index_t, double>(1, 1.0));

    // (-0.5, 0.25) lands in the triangle holding the reference corner with
    // weights (1/2, 1/4, 1/4); the corner's 1/2 is dropped and the row is
    // reported as pinned.
    auto pinned_row = row_entries(e.matrix, 6);
    REQUIRE(pinned_row.size() == 2);
    CHECK(pinned_row[0] == std::pair<index_t, double>(0, 0.25));
    CHECK(pinned_row[1] == std::pair<index_t, double>(2, 0.25));
    CHECK(e.pinned_rows == std::vector<index_t>{0, 6});
}

TEST_CASE("projection snaps near misses and falls back to the nearest triangle") {
    // Footprint diameter is hypot(2, 1), so the snap band is ~2.24e-9 and the
    // nearest-triangle band ~2.24e-6.
    SUBCASE("within the snap band") {
        HandProjection h({Vec3{0.5, -1e-12, 0.4}});
        ExtrapolationOperator e = build_extrapolation(h.mesh, h.surf, h.sys);
        auto row = row_entries(e.matrix, 4);
        REQUIRE(row.size() == 2);
        CHECK(row[0].first == 0);
        CHECK(row[0].second == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(row[1].first == 1);
        CHECK(row[1].second == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("within the nearest-triangle band") {
        HandProjection h({Vec3{0.5, -1e-6, 0.4}});
        ExtrapolationOperator e = build_extrapolation(h.mesh, h.surf, h.sys);
        auto row = row_entries(e.matrix, 4);
        REQUIRE(row.size() == 2);
        CHECK(row[0].second + row[1].second == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("beyond the fallback band names the node") {
        HandProjection h({Vec3{0.5, -0.01, 0.4}});
        CHECK_THROWS_WITH_AS(build_extrapolation(h.mesh, h.surf, h.sys),
                             doctest::Contains("node 4"), std::runtime_error);
    }
}

TEST_CASE("build_extrapolation validates its inputs") {
    HandProjection h({Vec3{0.25, 0.25, 0.5}});

    SUBCASE("mesh and system sizes must agree") {
        TetMesh short_mesh = h.mesh;
        short_mesh.nodes.pop_back();
        CHECK_THROWS_AS(build_extrapolation(short_mesh, h.surf, h.sys), std::invalid_argument);
    }
    SUBCASE("empty surface triangulation") {
        SurfaceMesh empty;
        CHECK_THROWS_AS(build_extrapolation(h.mesh, empty, h.sys), std::invalid_argument);
    }
    SUBCASE("surface node ids must be in range") {
        SurfaceMesh bad = h.surf;
        bad.node_ids[2] = 99;
        CHECK_THROWS_AS(build_extrapolation(h.mesh, bad, h.sys), std::invalid_argument);
    }
}

TEST_CASE("layered box rows reproduce surface fields exactly") {
    // Every node sits directly beneath a lattice surface node, so all weights
    // are exact unit entries and applying the operator to surface samples of
    // g(x, y) returns g at every node.
    TetMesh mesh = generate_layered_box(4, 4, 4);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);
    ExtrapolationOperator e = build_extrapolation(mesh, surf, sys);

    // The pinned rows are exactly the vertical column under the reference
    // node: its own row plus the four nodes below it.
    REQUIRE(e.pinned_rows.size() == 5);
    const Vec3& x0 = sys.node_coords[std::size_t(sys.constrained_node)];
    std::vector<bool> pinned(std::size_t(sys.n()), false);
    for (index_t i : e.pinned_rows) {
        pinned[std::size_t(i)] = true;
        const Vec3& p = sys.node_coords[std::size_t(i)];
        CHECK(p.x == x0.x);
        CHECK(p.y == x0.y);
    }

    std::vector<double> g(sys.surface_dofs.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
        const Vec3& q = sys.node_coords[std::size_t(sys.surface_dofs[c])];
        g[c] = 0.25 + q.x - 0.5 * q.y + q.x * q.y;
    }
    std::vector<double> full = spmv(e.matrix, g);
    for (index_t i = 0; i < sys.n(); ++i) {
        if (pinned[std::size_t(i)]) continue;
        const Vec3& p = sys.node_coords[std::size_t(i)];
        CHECK(full[std::size_t(i)] == 0.25 + p.x - 0.5 * p.y + p.x * p.y);
    }

    // Row sums are exactly one away from the pinned column.
    std::vector<double> ones(sys.surface_dofs.size(), 1.0);
    std::vector<double> extended = spmv(e.matrix, ones);
    for (index_t i = 0; i < sys.n(); ++i)
        if (!pinned[std::size_t(i)]) CHECK(extended[std::size_t(i)] == 1.0);
}

TEST_CASE("approximate operator approaches the exact one as epsilon shrinks") {
    TetMesh mesh = generate_layered_box(6, 6, 6);
    SurfaceMesh surf = extract_top_surface(mesh);

    auto max_gap = [&](double eps) {
        AssembledSystem sys = assemble(mesh, eps);
        ExtrapolationOperator et = build_extrapolation(mesh, surf, sys);
        Dense<double> exact = exact_extrapolation(sys);
        Dense<double> approx = csr_to_dense(et.matrix);
        double gap = 0.0;
        for (index_t i = 0; i < exact.rows; ++i)
            for (index_t j = 0; j < exact.cols; ++j)
                gap = std::max(gap, std::abs(approx(i, j) - exact(i, j)));
        return gap;
    };

    const double at_one = max_gap(1.0);
    const double at_hundredth = max_gap(1e-2);
    CHECK(at_one == doctest::Approx(0.9931162).epsilon(1e-5));
    CHECK(at_hundredth == doctest::Approx(1.068715e-2).epsilon(1e-4));
    CHECK(at_hundredth <= 0.1 * at_one);
}

TEST_CASE("exact extrapolation is z-independent in the vertical limit") {
    // At epsilon = 0 the energy minimizer with given surface values is the
    // constant-in-z extension, so each column of E is the indicator of the
    // surface node directly above (and zero beneath the reference node).
    TetMesh mesh = generate_layered_box(6, 6, 6);
    AssembledSystem sys = assemble(mesh, 0.0);
    Dense<double> e = exact_extrapolation(sys);

    double dev = 0.0;
    for (index_t i = 0; i < sys.n(); ++i) {
        const Vec3& p = sys.node_coords[std::size_t(i)];
        index_t above = -1;
        for (index_t c = 0; c < index_t(sys.surface_dofs.size()); ++c) {
            const Vec3& q = sys.node_coords[std::size_t(sys.surface_dofs[std::size_t(c)])];
            if (q.x == p.x && q.y == p.y) {
                above = c;
                break;
            }
        }
        for (index_t c = 0; c < e.cols; ++c) {
            const double expected = (c == above) ? 1.0 : 0.0;
            dev = std::max(dev, std::abs(e(i, c) - expected));
        }
    }
    CHECK(dev <= 1e-10);
}

TEST_CASE("exact operators compose to the dense inverse") {
    // E (E'AE)^{-1} E' + Z Abar^{-1} Z' + e0 e0' is exactly A^{-1}: the
    // whole preconditioner family approximates this identity.
    TetMesh mesh = generate_layered_box(6, 6, 6);
    AssembledSystem sys = assemble(mesh, 1e-2);
    const index_t n = sys.n();
    Dense<double> e = exact_extrapolation(sys);
    Dense<double> a = dense_from_csr<double>(sys.a_eps);
    const index_t m = e.cols;

    Dense<double> ae(n, m);
    for (index_t i = 0; i < n; ++i)
        for (index_t k = 0; k < n; ++k) {
            if (a(i, k) == 0.0) continue;
            for (index_t j = 0; j < m; ++j) ae(i, j) += a(i, k) * e(k, j);
        }
    Dense<double> s(m, m);
    for (index_t i = 0; i < m; ++i)
        for (index_t k = 0; k < n; ++k) {
            if (e(k, i) == 0.0) continue;
            for (index_t j = 0; j < m; ++j) s(i, j) += e(k, i) * ae(k, j);
        }
    std::vector<index_t> spiv;
    lu_factor(s, spiv);
    BlockDecomposition blocks = decompose(sys);
    Dense<double> abar = dense_from_csr<double>(blocks.interior);
    std::vector<index_t> apiv;
    lu_factor(abar, apiv);

    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> r = oracle::random_vector(rng, n);

        std::vector<double> etr(static_cast<std::size_t>(m), 0.0);
        for (index_t k = 0; k < n; ++k)
            for (index_t j = 0; j < m; ++j) etr[std::size_t(j)] += e(k, j) * r[std::size_t(k)];
        lu_solve(s, spiv, etr);
        std::vector<double> z(static_cast<std::size_t>(n), 0.0);
        for (index_t i = 0; i < n; ++i)
            for (index_t j = 0; j < m; ++j) z[std::size_t(i)] += e(i, j) * etr[std::size_t(j)];

        std::vector<double> ri(sys.interior_dofs.size());
        for (std::size_t k = 0; k < ri.size(); ++k)
            ri[k] = r[std::size_t(sys.interior_dofs[k])];
        lu_solve(abar, apiv, ri);
        for (std::size_t k = 0; k < ri.size(); ++k)
            z[std::size_t(sys.interior_dofs[k])] += ri[k];

        z[std::size_t(sys.constrained_node)] += r[std::size_t(sys.constrained_node)];

        std::vector<double> x = dense_solve(dense_from_csr<double>(sys.a_eps), r);
        double gap = 0.0, scale = 0.0;
        for (index_t i = 0; i < n; ++i) {
            gap = std::max(gap, std::abs(z[std::size_t(i)] - x[std::size_t(i)]));
            scale = std::max(scale, std::abs(x[std::size_t(i)]));
        }
        CHECK(gap <= 1e-10 * scale);
    }
}

TEST_CASE("dense oracles enforce their size caps") {
    TetMesh mesh = generate_layered_box(8, 8, 8);  // 729 nodes > 500
    AssembledSystem sys = assemble(mesh, 1e-2);
    CHECK_THROWS_AS(exact_extrapolation(sys), std::invalid_argument);
    std::vector<double> b(static_cast<std::size_t>(sys.n()), 1.0);
    CHECK_THROWS_AS(schur_solve_reference(sys, b), std::invalid_argument);

    TetMesh small = generate_layered_box(2, 2, 2);
    AssembledSystem ssmall = assemble(small, 1e-2);
    std::vector<double> wrong(static_cast<std::size_t>(ssmall.n()) - 1, 1.0);
    CHECK_THROWS_AS(schur_solve_reference(ssmall, wrong), std::invalid_argument);
}

TEST_CASE("schur reference matches dense solves") {
    SUBCASE("single tetrahedron") {
        TetMesh tet;
        tet.nodes = {Vec3{0.0, 0.0, 1.0}, Vec3{1.0, 0.0, 1.0}, Vec3{0.0, 1.0, 1.0},
                     Vec3{0.25, 0.25, 0.0}};
        tet.tets = {{1, 0, 2, 3}};
        tet.boundary_faces = {{{0, 1, 2}, FaceTag::Top}};
        AssembledSystem sys = assemble(tet, 0.5);
        REQUIRE(sys.surface_dofs.size() == 2);
        REQUIRE(sys.interior_dofs.size() == 1);

        std::vector<double> b = {0.1, 0.3, -0.7, 0.4};
        std::vector<double> x = schur_solve_reference(sys, b);
        std::vector<double> xd = dense_solve(dense_from_csr<double>(sys.a_eps), b);
        for (int i = 0; i < 4; ++i)
            CHECK(x[std::size_t(i)] == doctest::Approx(xd[std::size_t(i)]).epsilon(1e-12));
    }
    SUBCASE("consistency: b = A x recovers x") {
        TetMesh mesh = generate_layered_box(3, 3, 3);
        AssembledSystem sys = assemble(mesh, 1e-2);
        Rng rng(23);
        std::vector<double> want = oracle::random_vector(rng, sys.n());
        want[std::size_t(sys.constrained_node)] = 0.0;
        std::vector<double> b = spmv(sys.a_eps, want);
        b[std::size_t(sys.constrained_node)] = 0.0;
        std::vector<double> x = schur_solve_reference(sys, b);
        double gap = 0.0;
        for (index_t i = 0; i < sys.n(); ++i)
            gap = std::max(gap, std::abs(x[std::size_t(i)] - want[std::size_t(i)]));
        CHECK(gap <= 1e-10);
    }
    SUBCASE("surface-supported data extrapolates into the interior") {
        TetMesh mesh = generate_layered_box(3, 3, 3);
        AssembledSystem sys = assemble(mesh, 1e-1);
        Rng rng(29);
        std::vector<double> b(static_cast<std::size_t>(sys.n()), 0.0);
        for (index_t s : sys.surface_dofs) b[std::size_t(s)] = rng.uniform(-1.0, 1.0);

        std::vector<double> x = schur_solve_reference(sys, b);
        std::vector<double> xd = dense_solve(dense_from_csr<double>(sys.a_eps), b);
        double gap = 0.0;
        for (index_t i = 0; i < sys.n(); ++i)
            gap = std::max(gap, std::abs(x[std::size_t(i)] - xd[std::size_t(i)]));
        CHECK(gap <= 1e-10);

        // With no interior load the interior part is the exact extrapolation
        // of the surface part.
        Dense<double> e = exact_extrapolation(sys);
        std::vector<double> phi(sys.surface_dofs.size());
        for (std::size_t c = 0; c < phi.size(); ++c)
            phi[c] = x[std::size_t(sys.surface_dofs[c])];
        double egap = 0.0;
        for (std::size_t k = 0; k < sys.interior_dofs.size(); ++k) {
            const index_t i = sys.interior_dofs[k];
            double extended = 0.0;
            for (index_t c = 0; c < e.cols; ++c) extended += e(i, c) * phi[std::size_t(c)];
            egap = std::max(egap, std::abs(extended - x[std::size_t(i)]));
        }
        CHECK(egap <= 1e-10);
    }
}

TEST_CASE("preconditioner applications are linear symmetric positive") {
    TetMesh mesh = generate_layered_box(6, 6, 6);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);
    VlumpPreconditioner sor = make_vl(mesh, surf, sys, VlumpVariant::Sor);
    VlumpPreconditioner add = make_vl(mesh, surf, sys, VlumpVariant::AdditiveAmg);
    const index_t n = sys.n();

    // Zero in, zero out.
    std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
    for (double v : sor.apply(zero)) CHECK(v == 0.0);
    for (double v : add.apply(zero)) CHECK(v == 0.0);

    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss;
    for (const VlumpPreconditioner* pc : {&sor, &add}) {
        CAPTURE(pc->name());
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> r1(static_cast<std::size_t>(n));
            std::vector<double> r2(static_cast<std::size_t>(n));
            for (double& v : r1) v = gauss(rng);
            for (double& v : r2) v = gauss(rng);
            std::vector<double> m1 = pc->apply(r1);
            std::vector<double> m2 = pc->apply(r2);

            // Symmetry: r2' M r1 == r1' M r2, relative to the pairing scale.
            double s12 = 0.0, s21 = 0.0, p11 = 0.0;
            for (index_t i = 0; i < n; ++i) {
                s12 += r2[std::size_t(i)] * m1[std::size_t(i)];
                s21 += r1[std::size_t(i)] * m2[std::size_t(i)];
                p11 += r1[std::size_t(i)] * m1[std::size_t(i)];
            }
            CHECK(std::abs(s12 - s21) <= 1e-10 * std::max(std::abs(s12), std::abs(s21)));
            CHECK(p11 > 0.0);

            // Linearity.
            const double alpha = 1.25, beta = -0.75;
            std::vector<double> combo(static_cast<std::size_t>(n));
            for (index_t i = 0; i < n; ++i)
                combo[std::size_t(i)] = alpha * r1[std::size_t(i)] + beta * r2[std::size_t(i)];
            std::vector<double> mc = pc->apply(combo);
            double gap = 0.0, scale = 0.0;
            for (index_t i = 0; i < n; ++i) {
                const double expected = alpha * m1[std::size_t(i)] + beta * m2[std::size_t(i)];
                gap = std::max(gap, std::abs(mc[std::size_t(i)] - expected));
                scale = std::max(scale, std::abs(expected));
            }
            CHECK(gap <= 1e-12 * std::max(scale, 1.0));
        }
    }
}

TEST_CASE("preconditioner structure and validation") {
    TetMesh mesh = generate_layered_box(4, 4, 4);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);
    ExtrapolationOperator e = build_extrapolation(mesh, surf, sys);

    SUBCASE("coarse hierarchy sits on the lumped operator") {
        VlumpPreconditioner sor(sys, e);
        const CsrMatrix expected = triple_product(e.matrix, sys.a_eps);
        const CsrMatrix& got = sor.coarse_hierarchy().levels.front().a;
        CHECK(got.row_offsets == expected.row_offsets);
        CHECK(got.col_indices == expected.col_indices);
        CHECK(got.values == expected.values);
        CHECK(sor.name() == "vl-sor");
        CHECK(!sor.has_interior_hierarchy());
        CHECK_THROWS_AS(sor.interior_hierarchy(), std::logic_error);
    }
    SUBCASE("additive variant builds the interior hierarchy") {
        VlumpConfig cfg;
        cfg.variant = VlumpVariant::AdditiveAmg;
        VlumpPreconditioner add(sys, e, cfg);
        CHECK(add.name() == "vl-add");
        REQUIRE(add.has_interior_hierarchy());
        CHECK(add.interior_hierarchy().levels.front().a.n_rows ==
              index_t(sys.interior_dofs.size()));
    }
    SUBCASE("extrapolation shape must match the system") {
        ExtrapolationOperator bad = e;
        TripletBuilder b(sys.n() - 1, index_t(sys.surface_dofs.size()));
        bad.matrix = b.finalize();
        CHECK_THROWS_AS(VlumpPreconditioner(sys, bad), std::invalid_argument);

        ExtrapolationOperator narrow = e;
        TripletBuilder b2(sys.n(), index_t(sys.surface_dofs.size()) - 1);
        narrow.matrix = b2.finalize();
        CHECK_THROWS_AS(VlumpPreconditioner(sys, narrow), std::invalid_argument);
    }
    SUBCASE("apply validates the residual length") {
        VlumpPreconditioner sor(sys, e);
        std::vector<double> wrong(static_cast<std::size_t>(sys.n()) + 1, 0.0);
        CHECK_THROWS_AS(sor.apply(wrong), std::invalid_argument);
    }
    SUBCASE("variant names round-trip") {
        CHECK(to_string(VlumpVariant::Sor) == "vl-sor");
        CHECK(to_string(VlumpVariant::AdditiveAmg) == "vl-add");
    }
}

TEST_CASE("build report pins coarse and interior sizes") {
    TetMesh mesh = generate_layered_box(6, 6, 6);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);
    VlumpPreconditioner sor = make_vl(mesh, surf, sys, VlumpVariant::Sor);
    VlumpPreconditioner add = make_vl(mesh, surf, sys, VlumpVariant::AdditiveAmg);
    CHECK(sor.build_report_csv() ==
          "variant,n,coarse_rows,coarse_nnz,coarse_levels,interior_levels\n"
          "vl-sor,343,48,282,1,0\n");
    CHECK(add.build_report_csv() ==
          "variant,n,coarse_rows,coarse_nnz,coarse_levels,interior_levels\n"
          "vl-add,343,48,282,1,3\n");
}

TEST_CASE("iteration counts on the layered box track epsilon") {
    TetMesh mesh = generate_layered_box(6, 6, 6);
    SurfaceMesh surf = extract_top_surface(mesh);

    struct Expect {
        double eps;
        index_t ssor, amg, vl_sor, vl_add;
        bool ssor_floors;
    };
    const Expect table[] = {
        {1.0, 19, 7, 13, 13, false},
        {1e-1, 59, 16, 13, 10, false},
        {1e-2, 105, 6, 10, 10, false},
        {1e-3, 57, 6, 9, 9, true},
    };

    index_t vl_min = 1000, vl_max = 0;
    for (const Expect& row : table) {
        CAPTURE(row.eps);
        AssembledSystem sys = assemble(mesh, row.eps);
        ManufacturedProblem prob = manufactured_rhs(sys, RhsField::SmoothCosine, 123);
        SsorPreconditioner ssor(sys.a_eps, 1.0);
        AmgPreconditioner amg(build_hierarchy(sys.a_eps));
        VlumpPreconditioner vl_sor = make_vl(mesh, surf, sys, VlumpVariant::Sor);
        VlumpPreconditioner vl_add = make_vl(mesh, surf, sys, VlumpVariant::AdditiveAmg);

        auto run = [&](const Preconditioner& pc) {
            return pcg(sys.a_eps, prob.b, &pc, &prob.x_exact, 1e-6, 2000).trace;
        };
        ConvergenceTrace t_ssor = run(ssor);
        ConvergenceTrace t_amg = run(amg);
        ConvergenceTrace t_sor = run(vl_sor);
        ConvergenceTrace t_add = run(vl_add);

        CHECK(t_ssor.iterations() == row.ssor);
        CHECK(t_amg.iterations() == row.amg);
        CHECK(t_sor.iterations() == row.vl_sor);
        CHECK(t_add.iterations() == row.vl_add);
        CHECK(t_ssor.stop_reason ==
              (row.ssor_floors ? StopReason::Floor : StopReason::ExactError));
        if (row.ssor_floors) CHECK(t_ssor.floor_value.has_value());
        CHECK(t_amg.stop_reason == StopReason::ExactError);
        CHECK(t_sor.stop_reason == StopReason::ExactError);
        CHECK(t_add.stop_reason == StopReason::ExactError);

        // The lumped variants never trail plain SSOR.
        CHECK(t_sor.iterations() <= t_ssor.iterations());
        CHECK(t_add.iterations() <= t_sor.iterations());
        vl_min = std::min(vl_min, t_sor.iterations());
        vl_max = std::max(vl_max, t_sor.iterations());
    }
    // Epsilon-uniformity of the lumped cycle across four decades.
    CHECK(double(vl_max) <= 1.5 * double(vl_min));
}

TEST_CASE("lumped cycle conditioning dwarfs plain SSOR on the layered box") {
    TetMesh mesh = generate_layered_box(6, 6, 6);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);

    SsorPreconditioner ssor(sys.a_eps, 1.0);
    ExtremeEigenvalues es = preconditioned_extremes(sys.a_eps, ssor, 80, 3);
    const double cond_ssor = es.lambda_max / es.lambda_min;
    CHECK(es.lambda_max == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cond_ssor == doctest::Approx(380736.05).epsilon(1e-3));

    VlumpPreconditioner sor = make_vl(mesh, surf, sys, VlumpVariant::Sor);
    ExtremeEigenvalues ev = preconditioned_extremes(sys.a_eps, sor, 80, 3);
    const double cond_vl = ev.lambda_max / ev.lambda_min;
    CHECK(cond_vl == doctest::Approx(9.4534).epsilon(1e-3));
    CHECK(cond_vl <= cond_ssor / 1000.0);
}

TEST_CASE("conditioning estimate is epsilon-uniform on the layered box") {
    TetMesh mesh = generate_layered_box(16, 16, 16);
    SurfaceMesh surf = extract_top_surface(mesh);
    double conds[2];
    const double eps_values[2] = {1e-2, 1e-3};
    for (int k = 0; k < 2; ++k) {
        AssembledSystem sys = assemble(mesh, eps_values[k]);
        VlumpPreconditioner sor = make_vl(mesh, surf, sys, VlumpVariant::Sor);
        ExtremeEigenvalues ee = preconditioned_extremes(sys.a_eps, sor, 80, 3);
        conds[k] = ee.lambda_max / ee.lambda_min;
    }
    CHECK(conds[0] == doctest::Approx(55.8473).epsilon(1e-4));
    CHECK(conds[1] == doctest::Approx(56.1476).epsilon(1e-4));
    CHECK(conds[1] <= 2.0 * conds[0]);
}

TEST_CASE("unstructured box: row structure, conditioning, and coarse candidates") {
    TetMesh mesh = generate_unstructured_box(4913, 42);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-3);
    ExtrapolationOperator e = build_extrapolation(mesh, surf, sys);

    // Row structure: surface rows identity; interior rows are convex
    // combinations of at most three surface values; rows that touched the
    // reference node are reported pinned and sum below one.
    REQUIRE(sys.surface_dofs.size() == 288);
    CHECK(e.pinned_rows.size() == 17);
    std::vector<bool> pinned(std::size_t(sys.n()), false);
    for (index_t i : e.pinned_rows) pinned[std::size_t(i)] = true;
    std::vector<bool> is_surface(std::size_t(sys.n()), false);
    for (index_t s : sys.surface_dofs) is_surface[std::size_t(s)] = true;

    const CsrMatrix& m = e.matrix;
    for (index_t i = 0; i < m.n_rows; ++i) {
        const index_t nnz = m.row_offsets[i + 1] - m.row_offsets[i];
        double sum = 0.0;
        for (index_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
            REQUIRE(m.values[k] >= 0.0);
            sum += m.values[k];
        }
        if (is_surface[std::size_t(i)]) {
            REQUIRE(nnz == 1);
            REQUIRE(m.values[m.row_offsets[i]] == 1.0);
        } else if (pinned[std::size_t(i)]) {
            REQUIRE(sum < 1.0);
        } else {
            REQUIRE(nnz <= 3);
            REQUIRE(std::abs(sum - 1.0) <= 1e-12);
        }
    }

    // Conditioning invariant: the estimate at eps = 1e-3 stays within 2x of
    // its value at eps = 1e-2.
    AssembledSystem sys2 = assemble(mesh, 1e-2);
    VlumpPreconditioner sor2 = make_vl(mesh, surf, sys2, VlumpVariant::Sor);
    ExtremeEigenvalues e2 = preconditioned_extremes(sys2.a_eps, sor2, 80, 3);
    const double cond2 = e2.lambda_max / e2.lambda_min;

    VlumpPreconditioner sor3(sys, e);
    ExtremeEigenvalues e3 = preconditioned_extremes(sys.a_eps, sor3, 80, 3);
    const double cond3 = e3.lambda_max / e3.lambda_min;

    CHECK(cond2 == doctest::Approx(140.9567).epsilon(1e-4));
    CHECK(cond3 == doctest::Approx(141.1763).epsilon(1e-4));
    CHECK(cond3 <= 2.0 * cond2);

    // Why the coarse hierarchy needs the planar candidates: interpolating a
    // surface field back into a vertically unstructured volume leaves an
    // O(h^2) vertical energy that vanishes only on linear fields, so at small
    // epsilon the lumped operator's near-null space is spanned by {x, y} and
    // an indicator-only hierarchy cannot correct it.
    const CsrMatrix s_tilde = triple_product(e.matrix, sys.a_eps);
    AmgPreconditioner plain(build_hierarchy(s_tilde));
    ExtremeEigenvalues ep = preconditioned_extremes(s_tilde, plain, 100, 5);
    const double cond_plain = ep.lambda_max / ep.lambda_min;

    CandidateBlock candidates(sys.surface_dofs.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const Vec3& p = sys.node_coords[std::size_t(sys.surface_dofs[k])];
        candidates[k] = {1.0, p.x, p.y};
    }
    AmgPreconditioner planar(build_hierarchy(s_tilde, candidates));
    ExtremeEigenvalues eq = preconditioned_extremes(s_tilde, planar, 100, 5);
    const double cond_planar = eq.lambda_max / eq.lambda_min;

    CHECK(cond_planar == doctest::Approx(31.2).epsilon(0.05));
    CHECK(cond_plain >= 1000.0 * cond_planar);
}

TEST_CASE("extrapolation round-trips through matrix market files") {
    TetMesh mesh = generate_layered_box(3, 3, 3);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);
    ExtrapolationOperator e = build_extrapolation(mesh, surf, sys);

    auto path = std::filesystem::temp_directory_path() / "vlump_extrapolation.mtx";
    mm_write(path.string(), e.matrix, false);
    CsrMatrix back = mm_read(path.string());
    std::filesystem::remove(path);

    CHECK(back.n_rows == e.matrix.n_rows);
    CHECK(back.n_cols == e.matrix.n_cols);
    CHECK(back.row_offsets == e.matrix.row_offsets);
    CHECK(back.col_indices == e.matrix.col_indices);
    CHECK(back.values == e.matrix.values);
}

TEST_CASE("construction and application are deterministic") {
    TetMesh mesh = generate_layered_box(5, 5, 5);
    SurfaceMesh surf = extract_top_surface(mesh);
    AssembledSystem sys = assemble(mesh, 1e-2);

    ExtrapolationOperator e1 = build_extrapolation(mesh, surf, sys);
    ExtrapolationOperator e2 = build_extrapolation(mesh, surf, sys);
    CHECK(e1.matrix.row_offsets == e2.matrix.row_offsets);
    CHECK(e1.matrix.col_indices == e2.matrix.col_indices);
    CHECK(e1.matrix.values == e2.matrix.values);
    CHECK(e1.pinned_rows == e2.pinned_rows);

    VlumpPreconditioner p1(sys, e1);
    VlumpPreconditioner p2(sys, e2);
    Rng rng(31);
    std::vector<double> r = oracle::random_vector(rng, sys.n());
    CHECK(p1.apply(r) == p1.apply(r));
    CHECK(p1.apply(r) == p2.apply(r));
}

TEST_CASE("preconditioned spectrum probe checks its inputs") {
    // Identity system, identity-acting smoother: both ends of the spectrum
    // are exactly one.
    CsrMatrix ident = identity_csr(10);
    SsorPreconditioner ssor(ident, 1.0);
    ExtremeEigenvalues ee = preconditioned_extremes(ident, ssor, 5, 1);
    CHECK(ee.lambda_min == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ee.lambda_max == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS_AS(preconditioned_extremes(ident, ssor, 0, 1), std::invalid_argument);
    TripletBuilder rect(3, 4);
    rect.add(0, 0, 1.0);
    CHECK_THROWS_AS(preconditioned_extremes(rect.finalize(), ssor, 5, 1), std::invalid_argument);
}
