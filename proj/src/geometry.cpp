#include "h2mul/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace h2mul {

void TriangleMesh::update_geometry() {
    areas.resize(triangles.size());
    midpoints.resize(triangles.size());
    const auto nv = static_cast<Index>(vertices.size());
    for (std::size_t i = 0; i < triangles.size(); ++i) {
        const auto& tri = triangles[i];
        for (Index v : tri)
            if (v < 0 || v >= nv) throw std::out_of_range("triangle references a missing vertex");
        const Vec3& a = vertices[tri[0]];
        const Vec3& b = vertices[tri[1]];
        const Vec3& c = vertices[tri[2]];
        areas[i] = 0.5 * (b - a).cross(c - a).norm();
        midpoints[i] = (a + b + c) / 3.0;
    }
}

TriangleMesh build_sphere_mesh(int level) {
    if (level < 0) throw std::invalid_argument("refinement level must be non-negative");

    TriangleMesh mesh;
    mesh.vertices = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                     Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
    // counter-clockwise seen from outside
    mesh.triangles = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                      {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<Index, Index>, Index> edge_midpoint;
        auto midpoint = [&](Index a, Index b) {
            const auto key = std::minmax(a, b);
            auto it = edge_midpoint.find(key);
            if (it != edge_midpoint.end()) return it->second;
            const Index id = static_cast<Index>(mesh.vertices.size());
            mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
            edge_midpoint.emplace(key, id);
            return id;
        };

        std::vector<std::array<Index, 3>> refined;
        refined.reserve(4 * mesh.triangles.size());
        for (const auto& [a, b, c] : mesh.triangles) {
            const Index ab = midpoint(a, b);
            const Index bc = midpoint(b, c);
            const Index ca = midpoint(c, a);
            refined.push_back({a, ab, ca});
            refined.push_back({ab, b, bc});
            refined.push_back({ca, bc, c});
            refined.push_back({ab, bc, ca});
        }
        mesh.triangles = std::move(refined);
    }

    mesh.update_geometry();
    return mesh;
}

TriangleMesh build_latlong_sphere_mesh(int segments, int rings) {
    if (segments < 3 || rings < 2) throw std::invalid_argument("latitude-longitude sphere needs >= 3 segments and >= 2 rings");

    TriangleMesh mesh;
    mesh.vertices.push_back(Vec3(0, 0, 1));
    for (int i = 1; i < rings; ++i) {
        const double theta = std::numbers::pi * i / rings;
        for (int j = 0; j < segments; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / segments;
            mesh.vertices.push_back(Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)));
        }
    }
    const Index south = static_cast<Index>(mesh.vertices.size());
    mesh.vertices.push_back(Vec3(0, 0, -1));

    auto at = [&](int ring, int j) -> Index { return 1 + Index(ring - 1) * segments + (j % segments); };
    for (int j = 0; j < segments; ++j) mesh.triangles.push_back({0, at(1, j), at(1, j + 1)});
    for (int i = 1; i + 1 < rings; ++i)
        for (int j = 0; j < segments; ++j) {
            mesh.triangles.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            mesh.triangles.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    for (int j = 0; j < segments; ++j) mesh.triangles.push_back({at(rings - 1, j), south, at(rings - 1, j + 1)});

    mesh.update_geometry();
    return mesh;
}

void write_mesh(std::ostream& out, const TriangleMesh& mesh) {
    out.precision(17);
    out << mesh.vertices.size() << ' ' << mesh.triangles.size() << '\n';
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

TriangleMesh read_mesh(std::istream& in) {
    std::size_t nv = 0, nt = 0;
    if (!(in >> nv >> nt)) throw std::runtime_error("mesh: missing header");
    TriangleMesh mesh;
    mesh.vertices.resize(nv);
    mesh.triangles.resize(nt);
    for (auto& v : mesh.vertices)
        if (!(in >> v.x() >> v.y() >> v.z())) throw std::runtime_error("mesh: truncated vertex list");
    for (auto& t : mesh.triangles)
        if (!(in >> t[0] >> t[1] >> t[2])) throw std::runtime_error("mesh: truncated triangle list");
    mesh.update_geometry();
    return mesh;
}

void write_mesh(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_mesh(out, mesh);
}

TriangleMesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_mesh(in);
}

//
// BoundingBox
//

BoundingBox BoundingBox::of_points(std::span<const Vec3> points) {
    if (points.empty()) throw std::invalid_argument("bounding box of an empty point set");
    BoundingBox box{points.front(), points.front()};
    for (const auto& p : points) {
        box.lower = box.lower.cwiseMin(p);
        box.upper = box.upper.cwiseMax(p);
    }
    return box;
}

double BoundingBox::distance(const BoundingBox& other) const {
    const Vec3 gap = (other.lower - upper).cwiseMax(lower - other.upper).cwiseMax(0.0);
    return gap.norm();
}

bool BoundingBox::contains(const BoundingBox& other, double slack) const {
    return (other.lower.array() >= lower.array() - slack).all() &&
           (other.upper.array() <= upper.array() + slack).all();
}

bool admissible(const BoundingBox& box_t, const BoundingBox& box_s, double eta) {
    const double dist = box_t.distance(box_s);
    return dist > 0.0 && std::max(box_t.diameter(), box_s.diameter()) <= 2.0 * eta * dist;
}

//
// ClusterTree
//

int ClusterTree::child_slot(int child) const {
    const auto& siblings = clusters[clusters[child].parent].children;
    return static_cast<int>(std::find(siblings.begin(), siblings.end(), child) - siblings.begin());
}

Vector ClusterTree::to_tree_order(const Vector& original) const {
    Vector out(original.size());
    for (Index pos = 0; pos < out.size(); ++pos) out[pos] = original[index_at[pos]];
    return out;
}

Vector ClusterTree::to_original_order(const Vector& tree_ordered) const {
    Vector out(tree_ordered.size());
    for (Index pos = 0; pos < out.size(); ++pos) out[index_at[pos]] = tree_ordered[pos];
    return out;
}

namespace {

struct ClusterBuilder {
    std::span<const Vec3> points;
    ClusterTree& tree;
    std::vector<Vec3> scratch;

    int build(Index begin, Index end, int level, int parent) {
        const int id = tree.size();
        tree.clusters.emplace_back();
        tree.depth = std::max(tree.depth, level);

        scratch.clear();
        for (Index pos = begin; pos < end; ++pos) scratch.push_back(points[tree.index_at[pos]]);
        {
            auto& c = tree.clusters[id];
            c.begin = begin;
            c.end = end;
            c.level = level;
            c.parent = parent;
            c.box = BoundingBox::of_points(scratch);
        }

        if (end - begin > tree.leaf_size) {
            Index axis = 0;
            (tree.clusters[id].box.upper - tree.clusters[id].box.lower).maxCoeff(&axis);
            auto first = tree.index_at.begin() + begin;
            auto last = tree.index_at.begin() + end;
            std::sort(first, last, [&](Index a, Index b) {
                const double ca = points[a][axis], cb = points[b][axis];
                return ca < cb || (ca == cb && a < b);
            });
            const Index mid = begin + (end - begin) / 2;
            const int left = build(begin, mid, level + 1, id);
            const int right = build(mid, end, level + 1, id);
            tree.clusters[id].children = {left, right};
        }
        tree.clusters[id].subtree_end = tree.size();
        return id;
    }
};

}  // namespace

ClusterTree build_cluster_tree(std::span<const Vec3> points, Index leaf_size) {
    if (points.empty()) throw std::invalid_argument("cannot cluster an empty point set");
    if (leaf_size < 1) throw std::invalid_argument("leaf size must be positive");

    ClusterTree tree;
    tree.leaf_size = leaf_size;
    const auto n = static_cast<Index>(points.size());
    tree.index_at.resize(n);
    std::iota(tree.index_at.begin(), tree.index_at.end(), Index{0});

    ClusterBuilder builder{points, tree, {}};
    builder.build(0, n, 0, -1);

    tree.position_of.resize(n);
    for (Index pos = 0; pos < n; ++pos) tree.position_of[tree.index_at[pos]] = pos;
    return tree;
}

ClusterTree build_cluster_tree(const TriangleMesh& mesh, Index leaf_size) {
    if (mesh.triangles.empty()) throw std::invalid_argument("cannot cluster an empty mesh");
    return build_cluster_tree(std::span<const Vec3>(mesh.midpoints), leaf_size);
}

//
// BlockTree
//

int BlockTree::append(int row, int col, int parent, BlockKind kind) {
    const int id = size();
    blocks.push_back(Block{row, col, kind, parent, {}});
    if (parent >= 0) blocks[parent].children.push_back(id);
    return id;
}

std::vector<int> BlockTree::leaves() const {
    std::vector<int> out;
    for (int b = 0; b < size(); ++b)
        if (blocks[b].is_leaf()) out.push_back(b);
    return out;
}

Index BlockTree::count(BlockKind kind) const {
    return std::count_if(blocks.begin(), blocks.end(), [&](const Block& b) { return b.kind == kind; });
}

std::vector<std::pair<int, int>> block_children(const ClusterTree& rows, const ClusterTree& cols,
                                                int t, int s) {
    const auto& ct = rows[t].children;
    const auto& cs = cols[s].children;
    std::vector<std::pair<int, int>> out;
    if (ct.empty()) {
        for (int s1 : cs) out.emplace_back(t, s1);
    } else if (cs.empty()) {
        for (int t1 : ct) out.emplace_back(t1, s);
    } else {
        for (int t1 : ct)
            for (int s1 : cs) out.emplace_back(t1, s1);
    }
    return out;
}

namespace {

void refine(BlockTree& tree, int t, int s, int parent) {
    const auto& rows = *tree.row_tree;
    const auto& cols = *tree.col_tree;
    const int id = tree.append(t, s, parent);
    if (admissible(rows[t].box, cols[s].box, tree.eta)) {
        tree.blocks[id].kind = BlockKind::admissible;
    } else if (rows[t].is_leaf() && cols[s].is_leaf()) {
        tree.blocks[id].kind = BlockKind::inadmissible;
    } else {
        for (auto [t1, s1] : block_children(rows, cols, t, s)) refine(tree, t1, s1, id);
    }
}

}  // namespace

std::shared_ptr<const BlockTree> build_block_tree(std::shared_ptr<const ClusterTree> rows,
                                                  std::shared_ptr<const ClusterTree> cols,
                                                  double eta) {
    if (!rows || !cols || rows->clusters.empty() || cols->clusters.empty())
        throw std::invalid_argument("block tree needs two non-empty cluster trees");
    if (!(eta > 0.0)) throw std::invalid_argument("admissibility parameter must be positive");
    auto tree = std::make_shared<BlockTree>();
    tree->row_tree = std::move(rows);
    tree->col_tree = std::move(cols);
    tree->eta = eta;
    refine(*tree, 0, 0, -1);
    return tree;
}

}  // namespace h2mul
