#include "vlump/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vlump {
namespace {

struct Gradients {
    double g[4][3];
    double volume;
};

Gradients p1_gradients(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    // Columns of J are the edge vectors from a; barycentric gradients for
    // vertices 1..3 are the rows of J^-1, and vertex 0 carries minus their sum.
    double j[3][3] = {{b.x - a.x, c.x - a.x, d.x - a.x},
                      {b.y - a.y, c.y - a.y, d.y - a.y},
                      {b.z - a.z, c.z - a.z, d.z - a.z}};
    double det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                 j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                 j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    Gradients out;
    out.volume = det / 6.0;
    double inv[3][3] = {
        {(j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det, (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det,
         (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det},
        {(j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det, (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det,
         (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det},
        {(j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det, (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det,
         (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det}};
    for (int k = 0; k < 3; ++k)
        for (int c2 = 0; c2 < 3; ++c2) out.g[k + 1][c2] = inv[k][c2];
    for (int c2 = 0; c2 < 3; ++c2) out.g[0][c2] = -(out.g[1][c2] + out.g[2][c2] + out.g[3][c2]);
    return out;
}

double longest_edge(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3* p[4] = {&a, &b, &c, &d};
    double best = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            double dx = p[i]->x - p[j]->x, dy = p[i]->y - p[j]->y, dz = p[i]->z - p[j]->z;
            best = std::max(best, std::sqrt(dx * dx + dy * dy + dz * dz));
        }
    return best;
}

}  // namespace

ElementMatrices element_matrices(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    double scale = longest_edge(a, b, c, d);
    Gradients gr = p1_gradients(a, b, c, d);
    if (!(gr.volume > 1e-14 * scale * scale * scale))
        throw std::invalid_argument("element_matrices: degenerate tet");
    ElementMatrices em;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            em.vertical[i][j] = gr.volume * gr.g[i][2] * gr.g[j][2];
            em.horizontal[i][j] = gr.volume * (gr.g[i][0] * gr.g[j][0] + gr.g[i][1] * gr.g[j][1]);
            em.mass[i][j] = gr.volume / 20.0 * (i == j ? 2.0 : 1.0);
        }
    }
    return em;
}

AssembledSystem assemble(const TetMesh& mesh, double epsilon) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("assemble: epsilon must be non-negative");
    if (mesh.n_tets() == 0) throw std::invalid_argument("assemble: empty mesh");

    index_t n = mesh.n_nodes();
    TripletBuilder vert{n, n}, horiz{n, n}, mass{n, n};
    for (index_t t = 0; t < mesh.n_tets(); ++t) {
        const auto& v = mesh.tets[static_cast<std::size_t>(t)];
        ElementMatrices em;
        try {
            em = element_matrices(mesh.nodes[v[0]], mesh.nodes[v[1]], mesh.nodes[v[2]], mesh.nodes[v[3]]);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("assemble: degenerate tet " + std::to_string(t));
        }
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                vert.add(v[i], v[j], em.vertical[i][j]);
                horiz.add(v[i], v[j], em.horizontal[i][j]);
                mass.add(v[i], v[j], em.mass[i][j]);
            }
        }
    }

    AssembledSystem sys;
    sys.epsilon = epsilon;
    sys.a_vertical = vert.finalize();
    sys.a_horizontal = horiz.finalize();
    sys.mass = mass.finalize();
    sys.node_coords = mesh.nodes;

    SurfaceMesh surf = extract_top_surface(mesh);
    index_t x0 = surf.node_ids[0];
    for (index_t id : surf.node_ids) {
        const Vec3& p = mesh.nodes[id];
        const Vec3& q = mesh.nodes[x0];
        if (p.x < q.x || (p.x == q.x && p.y < q.y)) x0 = id;
    }
    sys.constrained_node = x0;
    std::vector<char> on_surface(static_cast<std::size_t>(n), 0);
    for (index_t id : surf.node_ids) on_surface[static_cast<std::size_t>(id)] = 1;
    for (index_t i = 0; i < n; ++i) {
        if (i == x0) continue;
        (on_surface[static_cast<std::size_t>(i)] ? sys.surface_dofs : sys.interior_dofs).push_back(i);
    }

    // A_eps = A_0 + eps^2 A_H, then eliminate the reference node
    // symmetrically: clear its row and column, unit diagonal.
    CsrMatrix raw = add_scaled(sys.a_vertical, epsilon * epsilon, sys.a_horizontal);
    TripletBuilder pinned{n, n};
    for (index_t i = 0; i < n; ++i) {
        for (index_t k = raw.row_offsets[i]; k < raw.row_offsets[i + 1]; ++k) {
            index_t j = raw.col_indices[static_cast<std::size_t>(k)];
            if (i == x0 || j == x0) continue;
            pinned.add(i, j, raw.values[static_cast<std::size_t>(k)]);
        }
    }
    pinned.add(x0, x0, 1.0);
    sys.a_eps = pinned.finalize();
    return sys;
}

BlockDecomposition decompose(const AssembledSystem& system) {
    if (system.surface_dofs.empty() || system.interior_dofs.empty())
        throw std::invalid_argument("decompose: empty surface or interior index set");
    BlockDecomposition blocks;
    blocks.surface_block = extract_submatrix(system.a_eps, system.surface_dofs, system.surface_dofs);
    blocks.coupling = extract_submatrix(system.a_eps, system.surface_dofs, system.interior_dofs);
    blocks.interior = extract_submatrix(system.a_eps, system.interior_dofs, system.interior_dofs);
    return blocks;
}

ManufacturedProblem manufactured_rhs(const AssembledSystem& system, RhsField field, std::uint64_t seed) {
    if (system.node_coords.size() != static_cast<std::size_t>(system.n()))
        throw std::invalid_argument("manufactured_rhs: system has no node coordinates");
    index_t n = system.n();
    ManufacturedProblem prob;
    prob.x_exact.resize(static_cast<std::size_t>(n));
    if (field == RhsField::SmoothCosine) {
        constexpr double pi = 3.14159265358979323846;
        auto eval = [&](const Vec3& p) { return std::cos(pi * p.x) * std::cos(pi * p.y) * std::cos(pi * p.z); };
        double shift = eval(system.node_coords[static_cast<std::size_t>(system.constrained_node)]);
        for (index_t i = 0; i < n; ++i)
            prob.x_exact[static_cast<std::size_t>(i)] = eval(system.node_coords[static_cast<std::size_t>(i)]) - shift;
    } else {
        Rng rng(seed);
        for (auto& v : prob.x_exact) v = rng.uniform(-1.0, 1.0);
        prob.x_exact[static_cast<std::size_t>(system.constrained_node)] = 0.0;
    }
    prob.b.assign(static_cast<std::size_t>(n), 0.0);
    spmv(system.a_eps, prob.x_exact, prob.b);
    return prob;
}

std::vector<double> subtract_mean(const AssembledSystem& system, const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(system.mass.n_rows))
        throw std::invalid_argument("subtract_mean: length mismatch");
    std::vector<double> mx(x.size(), 0.0);
    spmv(system.mass, x, mx);
    double num = 0.0, den = 0.0;
    std::vector<double> ones(x.size(), 1.0), mones(x.size(), 0.0);
    spmv(system.mass, ones, mones);
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += mx[i];
        den += mones[i];
    }
    std::vector<double> out(x.size());
    double mean = num / den;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
    return out;
}

}  // namespace vlump
