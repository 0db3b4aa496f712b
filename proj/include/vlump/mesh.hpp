/// @file mesh.hpp
/// @brief Tetrahedral meshes of box-like domains: generators, Delaunay
/// construction, boundary tagging, top-surface extraction, and file I/O.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vlump/predicates.hpp"
#include "vlump/types.hpp"

namespace vlump {

enum class FaceTag { Top, Floor, Coast };

struct BoundaryFace {
    std::array<index_t, 3> nodes;
    FaceTag tag;
};

/// Conforming tetrahedral mesh. Every tet is stored positively oriented
/// (positive signed volume).
struct TetMesh {
    std::vector<Vec3> nodes;
    std::vector<std::array<index_t, 4>> tets;
    std::vector<BoundaryFace> boundary_faces;

    index_t n_nodes() const { return static_cast<index_t>(nodes.size()); }
    index_t n_tets() const { return static_cast<index_t>(tets.size()); }

    double tet_volume(index_t t) const;
    double total_volume() const;
    double z_min() const;
    double z_max() const;

    /// Shortest and longest edge over all tets.
    std::pair<double, double> edge_length_range() const;
};

/// Triangulated top surface with nodes projected to the (x, y) plane.
/// node_ids maps surface-local indices back to mesh node indices;
/// triangles are in surface-local indices.
struct SurfaceMesh {
    std::vector<index_t> node_ids;
    std::vector<std::array<double, 2>> coords;
    std::vector<std::array<index_t, 3>> triangles;

    index_t n_nodes() const { return static_cast<index_t>(node_ids.size()); }
};

/// Structured box [0,1]^3 with nx*ny*nz cells, each split into six tets
/// around the main diagonal. Nodes are arranged in horizontal layers, and
/// every tet has exactly one edge parallel to the z-axis.
TetMesh generate_layered_box(index_t nx, index_t ny, index_t nz);

/// Delaunay mesh of roughly n_points points in [0,1]^3: a cubic lattice
/// whose interior nodes are jittered by up to 0.3 of the spacing in each
/// coordinate. Boundary nodes stay exactly on the lattice so the box shape
/// is preserved. Deterministic for a fixed (n_points, seed).
TetMesh generate_unstructured_box(index_t n_points, std::uint64_t seed);

/// Variant of generate_unstructured_box that replaces a fraction of the
/// interior nodes with the same number of points packed into a ball of the
/// given radius (in (0, 0.5), kept inside the box) around the box centre,
/// producing edge lengths spanning two or more orders of magnitude.
/// fraction = 0 reproduces generate_unstructured_box exactly.
TetMesh generate_multiscale_box(index_t n_points, double fraction, double radius, std::uint64_t seed);

/// Delaunay tetrahedralization of the given points (all must lie in
/// [0,1]^3 and be distinct after snapping). Points are inserted in a
/// seed-shuffled order; the result is independent of that order up to
/// exact cosphericity ties, which the insertion order resolves
/// deterministically.
TetMesh delaunay_box(std::vector<Vec3> points, std::uint64_t seed);

/// Divide the horizontal coordinates by eps, stretching the domain to
/// [0, 1/eps]^2 x [0, 1]. Connectivity and tags are unchanged.
TetMesh rescale(const TetMesh& mesh, double eps);

/// Collect the faces tagged Top into a 2D triangulation. Throws if the
/// mesh has no top faces.
SurfaceMesh extract_top_surface(const TetMesh& mesh);

/// Physical-group numbers used by the Gmsh reader/writer.
struct GmshTagMap {
    int top = 1;
    int floor = 2;
    int coast = 3;
};

struct GmshImportResult {
    TetMesh mesh;
    index_t skipped_elements = 0;
};

/// Read a Gmsh MSH 2.2 ASCII file. Tetrahedra become mesh cells; triangles
/// whose physical group matches the tag map become tagged boundary faces.
/// Elements of any other type are skipped and counted.
GmshImportResult import_gmsh(const std::string& path, const GmshTagMap& tags);

void export_gmsh(const std::string& path, const TetMesh& mesh, const GmshTagMap& tags);

/// Plain-text mesh snapshot with full double precision; read_mesh_dump
/// restores it bit-for-bit.
void write_mesh_dump(const std::string& path, const TetMesh& mesh);
TetMesh read_mesh_dump(const std::string& path);

}  // namespace vlump
