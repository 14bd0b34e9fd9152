#ifndef H2MUL_GEOMETRY_HPP
#define H2MUL_GEOMETRY_HPP

#include "h2mul/types.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace h2mul {

//
// triangulated surfaces
//

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<Index, 3>> triangles;
    std::vector<double> areas;
    std::vector<Vec3> midpoints;

    Index size() const { return static_cast<Index>(triangles.size()); }

    // recomputes areas and centroids from vertices/triangles
    void update_geometry();
};

/// Unit sphere from an octahedron refined `level` times (8 * 4^level triangles).
TriangleMesh build_sphere_mesh(int level);

/// Unit sphere from a latitude-longitude grid: 2 * segments * (rings - 1) triangles.
TriangleMesh build_latlong_sphere_mesh(int segments, int rings);

// Text format: "<vertex count> <triangle count>", then one "x y z" line per
// vertex and one "a b c" line per triangle (zero-based vertex indices).
void write_mesh(std::ostream& out, const TriangleMesh& mesh);
TriangleMesh read_mesh(std::istream& in);
void write_mesh(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_mesh(const std::string& path);

//
// bounding boxes and admissibility
//

struct BoundingBox {
    Vec3 lower = Vec3::Zero();
    Vec3 upper = Vec3::Zero();

    static BoundingBox of_points(std::span<const Vec3> points);

    double diameter() const { return (upper - lower).norm(); }
    double distance(const BoundingBox& other) const;
    bool contains(const BoundingBox& other, double slack = 0.0) const;
};

/// max(diam t, diam s) <= 2 eta dist(t, s), with strictly separated boxes.
bool admissible(const BoundingBox& box_t, const BoundingBox& box_s, double eta);

//
// cluster trees
//

struct Cluster {
    Index begin = 0;  // first position in tree order
    Index end = 0;    // one past the last position
    BoundingBox box;
    int level = 0;
    int parent = -1;
    std::vector<int> children;
    int subtree_end = 0;  // clusters are numbered in preorder; desc(t) = [id, subtree_end)

    Index size() const { return end - begin; }
    bool is_leaf() const { return children.empty(); }
};

struct ClusterTree {
    std::vector<Cluster> clusters;   // clusters[0] is the root
    std::vector<Index> index_at;     // tree position -> original index
    std::vector<Index> position_of;  // original index -> tree position
    Index leaf_size = 0;
    int depth = 0;                   // maximal cluster level

    const Cluster& operator[](int id) const { return clusters[id]; }
    const Cluster& root() const { return clusters.front(); }
    int size() const { return static_cast<int>(clusters.size()); }
    Index dimension() const { return root().size(); }

    /// Child index of `child` within its parent's child list.
    int child_slot(int child) const;

    Vector to_tree_order(const Vector& original) const;
    Vector to_original_order(const Vector& tree_ordered) const;
};

/// Binary tree by longest-axis median splits of the given points.
ClusterTree build_cluster_tree(std::span<const Vec3> points, Index leaf_size);
ClusterTree build_cluster_tree(const TriangleMesh& mesh, Index leaf_size);

//
// block trees
//

enum class BlockKind { admissible, inadmissible, subdivided };

struct Block {
    int row = 0;
    int col = 0;
    BlockKind kind = BlockKind::subdivided;
    int parent = -1;
    std::vector<int> children;

    bool is_leaf() const { return kind != BlockKind::subdivided; }
};

struct BlockTree {
    std::shared_ptr<const ClusterTree> row_tree;
    std::shared_ptr<const ClusterTree> col_tree;
    std::vector<Block> blocks;  // blocks[0] is the root
    double eta = 0.0;

    const Block& operator[](int id) const { return blocks[id]; }
    int size() const { return static_cast<int>(blocks.size()); }

    // appends a block and links it to its parent
    int append(int row, int col, int parent, BlockKind kind = BlockKind::subdivided);

    std::vector<int> leaves() const;
    Index count(BlockKind kind) const;
};

/// Children of (t, s) following the one-sided/two-sided refinement rule.
std::vector<std::pair<int, int>> block_children(const ClusterTree& rows, const ClusterTree& cols,
                                                int t, int s);

std::shared_ptr<const BlockTree> build_block_tree(std::shared_ptr<const ClusterTree> rows,
                                                  std::shared_ptr<const ClusterTree> cols,
                                                  double eta);

}  // namespace h2mul

#endif
