#include "vlump/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace vlump {
namespace {

// Face f of a tet is opposite vertex f, ordered so that
// orient3d(face[0], face[1], face[2], v[f]) > 0 for a positively
// oriented tet.
constexpr int kFaces[4][3] = {{1, 3, 2}, {0, 2, 3}, {0, 3, 1}, {0, 1, 2}};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    double ax = b.x - a.x, ay = b.y - a.y, az = b.z - a.z;
    double bx = c.x - a.x, by = c.y - a.y, bz = c.z - a.z;
    double cx = d.x - a.x, cy = d.y - a.y, cz = d.z - a.z;
    return (ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)) / 6.0;
}

void orient_positively(TetMesh& mesh) {
    for (auto& t : mesh.tets) {
        double v = signed_volume(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]], mesh.nodes[t[3]]);
        if (v == 0.0) throw std::runtime_error("mesh: degenerate tet with zero volume");
        if (v < 0.0) std::swap(t[2], t[3]);
    }
}

std::array<index_t, 3> sorted_face(index_t a, index_t b, index_t c) {
    std::array<index_t, 3> f = {a, b, c};
    std::sort(f.begin(), f.end());
    return f;
}

/// Faces that appear in exactly one tet are boundary faces; they are tagged
/// by which horizontal plane (if any) all three nodes lie on.
void rebuild_boundary_faces(TetMesh& mesh) {
    std::map<std::array<index_t, 3>, int> count;
    for (const auto& t : mesh.tets)
        for (const auto& f : kFaces)
            count[sorted_face(t[f[0]], t[f[1]], t[f[2]])] += 1;

    double zmin = mesh.z_min(), zmax = mesh.z_max();
    const double tol = 1e-12;
    mesh.boundary_faces.clear();
    for (const auto& t : mesh.tets) {
        for (const auto& f : kFaces) {
            std::array<index_t, 3> nodes = {t[f[0]], t[f[1]], t[f[2]]};
            if (count.at(sorted_face(nodes[0], nodes[1], nodes[2])) != 1) continue;
            auto on_plane = [&](double z) {
                return std::abs(mesh.nodes[nodes[0]].z - z) <= tol &&
                       std::abs(mesh.nodes[nodes[1]].z - z) <= tol &&
                       std::abs(mesh.nodes[nodes[2]].z - z) <= tol;
            };
            FaceTag tag = on_plane(zmax) ? FaceTag::Top : (on_plane(zmin) ? FaceTag::Floor : FaceTag::Coast);
            mesh.boundary_faces.push_back({nodes, tag});
        }
    }
}

const char* tag_name(FaceTag tag) {
    switch (tag) {
        case FaceTag::Top: return "top";
        case FaceTag::Floor: return "floor";
        case FaceTag::Coast: return "coast";
    }
    throw std::logic_error("tag_name: bad tag");
}

FaceTag parse_tag(const std::string& name) {
    if (name == "top") return FaceTag::Top;
    if (name == "floor") return FaceTag::Floor;
    if (name == "coast") return FaceTag::Coast;
    throw std::runtime_error("mesh dump: unknown face tag '" + name + "'");
}

/// Incremental Bowyer-Watson over snapped points inside [0,1]^3, bootstrapped
/// from a super-tet whose vertices are far enough away that no empty
/// circumball of the jittered-lattice point sets we generate can reach them.
/// Exact cosphericity ties count as conflicts, which is the tie-breaking of a
/// regular triangulation whose weights are perturbed downward by an amount
/// growing with insertion rank: the newest point's term dominates every tie.
class DelaunayBuilder {
public:
    explicit DelaunayBuilder(std::vector<Vec3> points) : pts_(std::move(points)) {
        n_real_ = static_cast<index_t>(pts_.size());
        pts_.push_back({-4.0, -4.0, -4.0});
        pts_.push_back({12.0, -4.0, -4.0});
        pts_.push_back({-4.0, 12.0, -4.0});
        pts_.push_back({-4.0, -4.0, 12.0});
        Tet root;
        root.v = {n_real_, n_real_ + 1, n_real_ + 2, n_real_ + 3};
        root.nb = {-1, -1, -1, -1};
        root.alive = true;
        tets_.push_back(root);
        hint_ = 0;
    }

    void insert(index_t p) {
        const Vec3 q = pts_[p];
        index_t t0 = locate(q);
        for (index_t v : tets_[t0].v)
            if (pts_[v] == q)
                throw std::runtime_error("delaunay: duplicate point at node " + std::to_string(p));

        ++stamp_;
        conflict_.clear();
        cavity_.clear();
        tets_[t0].stamp = stamp_;
        tets_[t0].state = kConflict;
        conflict_.push_back(t0);
        for (std::size_t head = 0; head < conflict_.size(); ++head) {
            index_t c = conflict_[head];
            for (int f = 0; f < 4; ++f) {
                index_t o = tets_[c].nb[f];
                if (o == -1) {
                    cavity_.push_back({c, f});
                    continue;
                }
                if (tets_[o].stamp == stamp_) {
                    if (tets_[o].state == kBoundary) cavity_.push_back({c, f});
                    continue;
                }
                tets_[o].stamp = stamp_;
                if (in_conflict(o, q)) {
                    tets_[o].state = kConflict;
                    conflict_.push_back(o);
                } else {
                    tets_[o].state = kBoundary;
                    cavity_.push_back({c, f});
                }
            }
        }

        edge_map_.clear();
        index_t last_new = -1;
        for (auto [c, f] : cavity_) {
            std::array<index_t, 3> fv = {tets_[c].v[kFaces[f][0]], tets_[c].v[kFaces[f][1]],
                                         tets_[c].v[kFaces[f][2]]};
            if (geom::orient3d(pts_[fv[0]], pts_[fv[1]], pts_[fv[2]], q) <= 0)
                throw std::logic_error("delaunay: cavity face not visible from new point");
            index_t outside = tets_[c].nb[f];
            index_t nt = alloc_tet();
            tets_[nt].v = {fv[0], fv[1], fv[2], p};
            tets_[nt].nb = {-1, -1, -1, outside};
            if (outside != -1) {
                for (int g = 0; g < 4; ++g)
                    if (tets_[outside].nb[g] == c) {
                        tets_[outside].nb[g] = nt;
                        break;
                    }
            }
            // Side face k of the new tet meets its cavity neighbour across
            // the boundary edge skipping fv[k].
            for (int k = 0; k < 3; ++k) {
                index_t e0 = fv[(k + 1) % 3], e1 = fv[(k + 2) % 3];
                std::uint64_t key = edge_key(e0, e1);
                auto it = edge_map_.find(key);
                if (it == edge_map_.end()) {
                    edge_map_.emplace(key, std::pair<index_t, int>(nt, k));
                } else {
                    auto [ot, og] = it->second;
                    tets_[nt].nb[k] = ot;
                    tets_[ot].nb[og] = nt;
                    edge_map_.erase(it);
                }
            }
            last_new = nt;
        }
        if (!edge_map_.empty()) throw std::logic_error("delaunay: cavity surface is not closed");
        for (index_t c : conflict_) {
            tets_[c].alive = false;
            free_.push_back(c);
        }
        hint_ = last_new;
    }

    TetMesh extract() const {
        TetMesh mesh;
        mesh.nodes.assign(pts_.begin(), pts_.begin() + n_real_);
        std::vector<char> used(static_cast<std::size_t>(n_real_), 0);
        for (const Tet& t : tets_) {
            if (!t.alive) continue;
            if (t.v[0] >= n_real_ || t.v[1] >= n_real_ || t.v[2] >= n_real_ || t.v[3] >= n_real_) continue;
            mesh.tets.push_back(t.v);
            for (index_t v : t.v) used[static_cast<std::size_t>(v)] = 1;
        }
        for (index_t i = 0; i < n_real_; ++i)
            if (!used[static_cast<std::size_t>(i)])
                throw std::runtime_error("delaunay: node " + std::to_string(i) + " missing from final mesh");
        orient_positively(mesh);
        rebuild_boundary_faces(mesh);
        return mesh;
    }

private:
    static constexpr std::uint8_t kConflict = 1;
    static constexpr std::uint8_t kBoundary = 2;

    struct Tet {
        std::array<index_t, 4> v;
        std::array<index_t, 4> nb;
        std::uint32_t stamp = 0;
        std::uint8_t state = 0;
        bool alive = false;
    };

    static std::uint64_t edge_key(index_t a, index_t b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint64_t>(static_cast<std::uint32_t>(b));
    }

    bool in_conflict(index_t t, const Vec3& q) const {
        const Tet& T = tets_[t];
        return geom::insphere(pts_[T.v[0]], pts_[T.v[1]], pts_[T.v[2]], pts_[T.v[3]], q) >= 0;
    }

    index_t locate(const Vec3& q) const {
        index_t t = hint_;
        std::uint64_t cap = 4 * tets_.size() + 64;
        for (std::uint64_t step = 1; step <= cap; ++step) {
            bool moved = false;
            for (int k = 0; k < 4; ++k) {
                int f = static_cast<int>((static_cast<std::uint64_t>(k) + step) & 3);
                const Tet& T = tets_[t];
                int s = geom::orient3d(pts_[T.v[kFaces[f][0]]], pts_[T.v[kFaces[f][1]]],
                                       pts_[T.v[kFaces[f][2]]], q);
                if (s < 0) {
                    index_t nxt = T.nb[f];
                    if (nxt == -1) throw std::logic_error("delaunay: walk left the bounding simplex");
                    t = nxt;
                    moved = true;
                    break;
                }
            }
            if (!moved) return t;
        }
        throw std::logic_error("delaunay: point location did not terminate");
    }

    index_t alloc_tet() {
        if (!free_.empty()) {
            index_t id = free_.back();
            free_.pop_back();
            tets_[static_cast<std::size_t>(id)] = Tet{};
            tets_[static_cast<std::size_t>(id)].alive = true;
            return id;
        }
        tets_.push_back(Tet{});
        tets_.back().alive = true;
        return static_cast<index_t>(tets_.size() - 1);
    }

    std::vector<Vec3> pts_;
    index_t n_real_ = 0;
    std::vector<Tet> tets_;
    std::vector<index_t> free_;
    std::vector<index_t> conflict_;
    std::vector<std::pair<index_t, int>> cavity_;
    std::unordered_map<std::uint64_t, std::pair<index_t, int>> edge_map_;
    std::uint32_t stamp_ = 0;
    index_t hint_ = 0;
};

}  // namespace

double TetMesh::tet_volume(index_t t) const {
    const auto& v = tets[static_cast<std::size_t>(t)];
    return signed_volume(nodes[v[0]], nodes[v[1]], nodes[v[2]], nodes[v[3]]);
}

double TetMesh::total_volume() const {
    double sum = 0.0;
    for (index_t t = 0; t < n_tets(); ++t) sum += tet_volume(t);
    return sum;
}

double TetMesh::z_min() const {
    if (nodes.empty()) throw std::runtime_error("z_min: empty mesh");
    double z = nodes[0].z;
    for (const auto& p : nodes) z = std::min(z, p.z);
    return z;
}

double TetMesh::z_max() const {
    if (nodes.empty()) throw std::runtime_error("z_max: empty mesh");
    double z = nodes[0].z;
    for (const auto& p : nodes) z = std::max(z, p.z);
    return z;
}

std::pair<double, double> TetMesh::edge_length_range() const {
    if (tets.empty()) throw std::runtime_error("edge_length_range: empty mesh");
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& t : tets) {
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                const Vec3& p = nodes[t[a]];
                const Vec3& q = nodes[t[b]];
                double len = std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                       (p.z - q.z) * (p.z - q.z));
                if (first) {
                    lo = hi = len;
                    first = false;
                } else {
                    lo = std::min(lo, len);
                    hi = std::max(hi, len);
                }
            }
        }
    }
    return {lo, hi};
}

TetMesh generate_layered_box(index_t nx, index_t ny, index_t nz) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw std::invalid_argument("generate_layered_box: cell counts must be positive");
    TetMesh mesh;
    auto nid = [&](index_t i, index_t j, index_t k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
    for (index_t k = 0; k <= nz; ++k)
        for (index_t j = 0; j <= ny; ++j)
            for (index_t i = 0; i <= nx; ++i)
                mesh.nodes.push_back({static_cast<double>(i) / nx, static_cast<double>(j) / ny,
                                      static_cast<double>(k) / nz});

    // Six tets per cell around the main diagonal; one per axis permutation.
    // Every tet picks up exactly one z step, i.e. exactly one vertical edge.
    constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (index_t k = 0; k < nz; ++k) {
        for (index_t j = 0; j < ny; ++j) {
            for (index_t i = 0; i < nx; ++i) {
                for (const auto& perm : kPerm) {
                    index_t d[3] = {0, 0, 0};
                    std::array<index_t, 4> t;
                    t[0] = nid(i, j, k);
                    for (int s = 0; s < 3; ++s) {
                        d[perm[s]] = 1;
                        t[s + 1] = nid(i + d[0], j + d[1], k + d[2]);
                    }
                    mesh.tets.push_back(t);
                }
            }
        }
    }
    orient_positively(mesh);
    rebuild_boundary_faces(mesh);
    return mesh;
}

TetMesh delaunay_box(std::vector<Vec3> points, std::uint64_t seed) {
    if (points.empty()) throw std::invalid_argument("delaunay_box: no points");
    for (auto& p : points) {
        p.x = geom::snap(p.x);
        p.y = geom::snap(p.y);
        p.z = geom::snap(p.z);
        if (p.x < 0.0 || p.x > 1.0 || p.y < 0.0 || p.y > 1.0 || p.z < 0.0 || p.z > 1.0)
            throw std::invalid_argument("delaunay_box: point outside the unit box");
    }
    std::vector<index_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<index_t>(i);
    Rng rng(seed);
    rng.shuffle(order);

    DelaunayBuilder builder(std::move(points));
    for (index_t p : order) builder.insert(p);
    return builder.extract();
}

TetMesh generate_multiscale_box(index_t n_points, double fraction, double radius, std::uint64_t seed) {
    if (n_points < 8) throw std::invalid_argument("generate_multiscale_box: need at least 8 points");
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("generate_multiscale_box: fraction must be in [0, 1]");
    if (!(radius > 0.0 && radius < 0.5))
        throw std::invalid_argument("generate_multiscale_box: radius must be in (0, 0.5)");

    auto m = static_cast<index_t>(std::llround(std::cbrt(static_cast<double>(n_points))));
    if (m < 2) m = 2;
    double h = 1.0 / (m - 1);
    Rng rng(seed);
    std::vector<Vec3> pts;
    std::vector<index_t> interior_ids;
    for (index_t k = 0; k < m; ++k) {
        for (index_t j = 0; j < m; ++j) {
            for (index_t i = 0; i < m; ++i) {
                Vec3 p{static_cast<double>(i) / (m - 1), static_cast<double>(j) / (m - 1),
                       static_cast<double>(k) / (m - 1)};
                bool interior =
                    i > 0 && i < m - 1 && j > 0 && j < m - 1 && k > 0 && k < m - 1;
                if (interior) {
                    p.x += rng.uniform(-0.3 * h, 0.3 * h);
                    p.y += rng.uniform(-0.3 * h, 0.3 * h);
                    p.z += rng.uniform(-0.3 * h, 0.3 * h);
                    interior_ids.push_back(static_cast<index_t>(pts.size()));
                }
                pts.push_back({geom::snap(p.x), geom::snap(p.y), geom::snap(p.z)});
            }
        }
    }

    auto n_cluster = static_cast<index_t>(std::llround(fraction * static_cast<double>(interior_ids.size())));
    if (n_cluster > 0) {
        // Separate stream so fraction = 0 stays byte-identical to the plain
        // unstructured generator.
        Rng cluster_rng(seed ^ 0x636c7573746572ULL);
        std::vector<index_t> victims = interior_ids;
        cluster_rng.shuffle(victims);
        victims.resize(static_cast<std::size_t>(n_cluster));
        std::vector<char> drop(pts.size(), 0);
        for (index_t id : victims) drop[static_cast<std::size_t>(id)] = 1;
        std::vector<Vec3> kept;
        kept.reserve(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (!drop[i]) kept.push_back(pts[i]);
        pts = std::move(kept);

        index_t added = 0;
        while (added < n_cluster) {
            double dx = cluster_rng.uniform(-radius, radius);
            double dy = cluster_rng.uniform(-radius, radius);
            double dz = cluster_rng.uniform(-radius, radius);
            if (dx * dx + dy * dy + dz * dz > radius * radius) continue;
            pts.push_back({geom::snap(0.5 + dx), geom::snap(0.5 + dy), geom::snap(0.5 + dz)});
            ++added;
        }
    }
    return delaunay_box(std::move(pts), seed ^ 0x6f72646572ULL);
}

TetMesh generate_unstructured_box(index_t n_points, std::uint64_t seed) {
    return generate_multiscale_box(n_points, 0.0, 0.05, seed);
}

TetMesh rescale(const TetMesh& mesh, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("rescale: eps must be positive");
    TetMesh out = mesh;
    for (auto& p : out.nodes) {
        p.x /= eps;
        p.y /= eps;
    }
    return out;
}

SurfaceMesh extract_top_surface(const TetMesh& mesh) {
    std::vector<index_t> ids;
    for (const auto& f : mesh.boundary_faces)
        if (f.tag == FaceTag::Top)
            for (index_t v : f.nodes) ids.push_back(v);
    if (ids.empty()) throw std::runtime_error("extract_top_surface: mesh has no top faces");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::unordered_map<index_t, index_t> local;
    local.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) local[ids[i]] = static_cast<index_t>(i);

    SurfaceMesh surf;
    surf.node_ids = ids;
    surf.coords.reserve(ids.size());
    for (index_t id : ids) surf.coords.push_back({mesh.nodes[id].x, mesh.nodes[id].y});
    for (const auto& f : mesh.boundary_faces)
        if (f.tag == FaceTag::Top)
            surf.triangles.push_back({local.at(f.nodes[0]), local.at(f.nodes[1]), local.at(f.nodes[2])});
    return surf;
}

namespace {

std::string clean_line(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
}

}  // namespace

GmshImportResult import_gmsh(const std::string& path, const GmshTagMap& tags) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import_gmsh: cannot open " + path);

    GmshImportResult res;
    std::unordered_map<long long, index_t> id_map;
    std::string line;
    auto need_line = [&](const char* where) {
        if (!std::getline(in, line))
            throw std::runtime_error(std::string("import_gmsh: truncated file in ") + where);
        line = clean_line(line);
    };

    bool saw_nodes = false, saw_elements = false;
    while (std::getline(in, line)) {
        line = clean_line(line);
        if (line == "$MeshFormat") {
            need_line("$MeshFormat");
            std::istringstream ss(line);
            double version = 0.0;
            int file_type = -1, data_size = 0;
            ss >> version >> file_type >> data_size;
            if (!ss || file_type != 0 || version < 2.0 || version >= 3.0)
                throw std::runtime_error("import_gmsh: only ASCII MSH 2.2 files are supported");
            need_line("$MeshFormat");
            if (line != "$EndMeshFormat") throw std::runtime_error("import_gmsh: missing $EndMeshFormat");
        } else if (line == "$Nodes") {
            need_line("$Nodes");
            long long count = std::stoll(line);
            for (long long i = 0; i < count; ++i) {
                need_line("$Nodes");
                std::istringstream ss(line);
                long long id;
                double x, y, z;
                if (!(ss >> id >> x >> y >> z))
                    throw std::runtime_error("import_gmsh: malformed node line: " + line);
                if (!id_map.emplace(id, static_cast<index_t>(res.mesh.nodes.size())).second)
                    throw std::runtime_error("import_gmsh: duplicate node id " + std::to_string(id));
                res.mesh.nodes.push_back({x, y, z});
            }
            need_line("$Nodes");
            if (line != "$EndNodes") throw std::runtime_error("import_gmsh: missing $EndNodes");
            saw_nodes = true;
        } else if (line == "$Elements") {
            need_line("$Elements");
            long long count = std::stoll(line);
            for (long long i = 0; i < count; ++i) {
                need_line("$Elements");
                std::istringstream ss(line);
                long long id;
                int type = 0, n_tags = 0;
                if (!(ss >> id >> type >> n_tags))
                    throw std::runtime_error("import_gmsh: malformed element line: " + line);
                std::vector<int> etags(static_cast<std::size_t>(n_tags));
                for (int& t : etags)
                    if (!(ss >> t)) throw std::runtime_error("import_gmsh: malformed element tags: " + line);
                auto read_node = [&]() {
                    long long nid;
                    if (!(ss >> nid)) throw std::runtime_error("import_gmsh: malformed element nodes: " + line);
                    auto it = id_map.find(nid);
                    if (it == id_map.end())
                        throw std::runtime_error("import_gmsh: element references unknown node " +
                                                 std::to_string(nid));
                    return it->second;
                };
                if (type == 4) {
                    std::array<index_t, 4> t;
                    for (auto& v : t) v = read_node();
                    res.mesh.tets.push_back(t);
                } else if (type == 2) {
                    std::array<index_t, 3> f;
                    for (auto& v : f) v = read_node();
                    if (etags.empty())
                        throw std::runtime_error("import_gmsh: boundary triangle without a physical tag");
                    int phys = etags[0];
                    FaceTag tag;
                    if (phys == tags.top) tag = FaceTag::Top;
                    else if (phys == tags.floor) tag = FaceTag::Floor;
                    else if (phys == tags.coast) tag = FaceTag::Coast;
                    else
                        throw std::runtime_error("import_gmsh: triangle with unmapped physical tag " +
                                                 std::to_string(phys));
                    res.mesh.boundary_faces.push_back({f, tag});
                } else {
                    res.skipped_elements += 1;
                }
            }
            need_line("$Elements");
            if (line != "$EndElements") throw std::runtime_error("import_gmsh: missing $EndElements");
            saw_elements = true;
        } else if (!line.empty() && line[0] == '$') {
            std::string section = line;
            while (std::getline(in, line)) {
                line = clean_line(line);
                if (line.size() > 4 && line.compare(0, 4, "$End") == 0) break;
            }
        }
    }
    if (!saw_nodes || !saw_elements)
        throw std::runtime_error("import_gmsh: file has no $Nodes or no $Elements section");
    if (res.mesh.tets.empty()) throw std::runtime_error("import_gmsh: file contains no tetrahedra");
    orient_positively(res.mesh);
    return res;
}

void export_gmsh(const std::string& path, const TetMesh& mesh, const GmshTagMap& tags) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw std::runtime_error("export_gmsh: cannot open " + path);
    std::fprintf(out, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    std::fprintf(out, "$Nodes\n%zu\n", mesh.nodes.size());
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
        std::fprintf(out, "%zu %.17g %.17g %.17g\n", i + 1, mesh.nodes[i].x, mesh.nodes[i].y,
                     mesh.nodes[i].z);
    std::fprintf(out, "$EndNodes\n$Elements\n%zu\n", mesh.boundary_faces.size() + mesh.tets.size());
    std::size_t eid = 1;
    for (const auto& f : mesh.boundary_faces) {
        int phys = f.tag == FaceTag::Top ? tags.top : (f.tag == FaceTag::Floor ? tags.floor : tags.coast);
        std::fprintf(out, "%zu 2 2 %d %d %d %d %d\n", eid++, phys, phys, f.nodes[0] + 1, f.nodes[1] + 1,
                     f.nodes[2] + 1);
    }
    for (const auto& t : mesh.tets)
        std::fprintf(out, "%zu 4 2 0 0 %d %d %d %d\n", eid++, t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
    std::fprintf(out, "$EndElements\n");
    if (std::fclose(out) != 0) throw std::runtime_error("export_gmsh: write failed for " + path);
}

void write_mesh_dump(const std::string& path, const TetMesh& mesh) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw std::runtime_error("write_mesh_dump: cannot open " + path);
    std::fprintf(out, "vlump mesh 1\n");
    std::fprintf(out, "nodes %zu\n", mesh.nodes.size());
    for (const auto& p : mesh.nodes) std::fprintf(out, "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    std::fprintf(out, "tets %zu\n", mesh.tets.size());
    for (const auto& t : mesh.tets) std::fprintf(out, "%d %d %d %d\n", t[0], t[1], t[2], t[3]);
    std::fprintf(out, "faces %zu\n", mesh.boundary_faces.size());
    for (const auto& f : mesh.boundary_faces)
        std::fprintf(out, "%d %d %d %s\n", f.nodes[0], f.nodes[1], f.nodes[2], tag_name(f.tag));
    if (std::fclose(out) != 0) throw std::runtime_error("write_mesh_dump: write failed for " + path);
}

TetMesh read_mesh_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_mesh_dump: cannot open " + path);
    std::string w0, w1;
    int version = 0;
    if (!(in >> w0 >> w1 >> version) || w0 != "vlump" || w1 != "mesh" || version != 1)
        throw std::runtime_error("read_mesh_dump: bad header in " + path);

    TetMesh mesh;
    std::string section;
    std::size_t count = 0;
    if (!(in >> section >> count) || section != "nodes")
        throw std::runtime_error("read_mesh_dump: expected nodes section");
    mesh.nodes.resize(count);
    for (auto& p : mesh.nodes)
        if (!(in >> p.x >> p.y >> p.z)) throw std::runtime_error("read_mesh_dump: truncated nodes");

    if (!(in >> section >> count) || section != "tets")
        throw std::runtime_error("read_mesh_dump: expected tets section");
    mesh.tets.resize(count);
    for (auto& t : mesh.tets) {
        if (!(in >> t[0] >> t[1] >> t[2] >> t[3])) throw std::runtime_error("read_mesh_dump: truncated tets");
        for (index_t v : t)
            if (v < 0 || v >= mesh.n_nodes()) throw std::runtime_error("read_mesh_dump: tet node out of range");
    }

    if (!(in >> section >> count) || section != "faces")
        throw std::runtime_error("read_mesh_dump: expected faces section");
    mesh.boundary_faces.resize(count);
    for (auto& f : mesh.boundary_faces) {
        std::string tag;
        if (!(in >> f.nodes[0] >> f.nodes[1] >> f.nodes[2] >> tag))
            throw std::runtime_error("read_mesh_dump: truncated faces");
        for (index_t v : f.nodes)
            if (v < 0 || v >= mesh.n_nodes())
                throw std::runtime_error("read_mesh_dump: face node out of range");
        f.tag = parse_tag(tag);
    }
    orient_positively(mesh);
    return mesh;
}

}  // namespace vlump
