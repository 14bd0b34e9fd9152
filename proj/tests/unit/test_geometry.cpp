#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace h2mul;

TEST_CASE("sphere mesh sizes and total area") {
    for (int level = 0; level <= 4; ++level) {
        const auto mesh = build_sphere_mesh(level);
        CHECK(mesh.size() == 8 * (Index{1} << (2 * level)));
        double area = 0.0;
        for (double a : mesh.areas) area += a;
        CHECK(area < 4.0 * std::numbers::pi);
        if (level == 4) CHECK(area > 0.98 * 4.0 * std::numbers::pi);
        for (const auto& v : mesh.vertices) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("latitude-longitude sphere") {
    const auto mesh = build_latlong_sphere_mesh(16, 9);
    CHECK(mesh.size() == 256);
    double area = 0.0;
    for (double a : mesh.areas) {
        CHECK(a > 0.0);
        area += a;
    }
    CHECK(area < 4.0 * std::numbers::pi);
    CHECK(area > 0.9 * 4.0 * std::numbers::pi);
    for (const auto& v : mesh.vertices) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-14));
    // outward orientation
    for (Index i = 0; i < mesh.size(); ++i) {
        const auto& t = mesh.triangles[i];
        const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        CHECK(n.dot(mesh.midpoints[i]) > 0.0);
    }
    CHECK_THROWS(build_latlong_sphere_mesh(2, 4));
}

TEST_CASE("mesh text round trip") {
    const auto mesh = build_sphere_mesh(2);
    std::stringstream buffer;
    write_mesh(buffer, mesh);
    const auto back = read_mesh(buffer);
    REQUIRE(back.size() == mesh.size());
    for (Index i = 0; i < mesh.size(); ++i) {
        CHECK(back.triangles[i] == mesh.triangles[i]);
        CHECK((back.midpoints[i] - mesh.midpoints[i]).norm() < 1e-15);
    }
    std::stringstream broken("6 8\n1 0 0\n");
    CHECK_THROWS(read_mesh(broken));
}

TEST_CASE("cluster tree is a partition in preorder") {
    const auto mesh = build_sphere_mesh(3);
    const auto tree = build_cluster_tree(mesh, 16);
    CHECK(tree.root().begin == 0);
    CHECK(tree.root().end == mesh.size());

    std::set<Index> seen(tree.index_at.begin(), tree.index_at.end());
    CHECK(static_cast<Index>(seen.size()) == mesh.size());

    for (int c = 0; c < tree.size(); ++c) {
        const auto& cl = tree[c];
        if (cl.is_leaf()) {
            CHECK(cl.size() <= 16);
            CHECK(cl.subtree_end == c + 1);
            continue;
        }
        CHECK(cl.size() > 16);
        REQUIRE(cl.children.size() == 2);
        const auto& a = tree[cl.children[0]];
        const auto& b = tree[cl.children[1]];
        CHECK(cl.children[0] == c + 1);
        CHECK(a.begin == cl.begin);
        CHECK(a.end == b.begin);
        CHECK(b.end == cl.end);
        CHECK(a.level == cl.level + 1);
        CHECK(cl.subtree_end == b.subtree_end);
        CHECK(cl.box.contains(a.box, 0.0));
        CHECK(cl.box.contains(b.box, 0.0));
        // longest-axis median split: children do not overlap along the split axis by more than a point
        CHECK(std::abs(a.size() - b.size()) <= 1);
    }
    for (Index p = 0; p < mesh.size(); ++p) CHECK(tree.position_of[tree.index_at[p]] == p);
}

TEST_CASE("box distance and admissibility") {
    BoundingBox a{Vec3(0, 0, 0), Vec3(1, 1, 1)};
    BoundingBox b{Vec3(3, 0, 0), Vec3(4, 1, 1)};
    CHECK(a.distance(b) == doctest::Approx(2.0));
    CHECK(b.distance(a) == doctest::Approx(2.0));
    BoundingBox c{Vec3(2, 3, 0), Vec3(3, 4, 1)};
    CHECK(a.distance(c) == doctest::Approx(std::sqrt(5.0)));
    CHECK(a.distance(a) == 0.0);

    // diam = sqrt(3), dist = 2
    CHECK(admissible(a, b, 0.5));
    CHECK_FALSE(admissible(a, b, 0.4));
    BoundingBox point{Vec3(1, 1, 1), Vec3(1, 1, 1)};
    CHECK_FALSE(admissible(point, point, 10.0));
}

TEST_CASE("block tree leaves partition the index square") {
    for (double eta : {0.5, 1.0, 2.0}) {
        const auto mesh = build_sphere_mesh(3);
        auto tree = std::make_shared<ClusterTree>(build_cluster_tree(mesh, 16));
        const auto bt = build_block_tree(tree, tree, eta);
        const Index n = mesh.size();
        std::vector<int> covered(n * n, 0);
        for (int b : bt->leaves()) {
            const auto& blk = (*bt)[b];
            const auto& t = (*tree)[blk.row];
            const auto& s = (*tree)[blk.col];
            if (blk.kind == BlockKind::admissible) CHECK(admissible(t.box, s.box, eta));
            else CHECK((t.is_leaf() && s.is_leaf()));
            for (Index i = t.begin; i < t.end; ++i)
                for (Index j = s.begin; j < s.end; ++j) ++covered[i * n + j];
        }
        for (int v : covered) REQUIRE(v == 1);
        // children of every subdivided block follow the product rule
        for (int b = 0; b < bt->size(); ++b) {
            const auto& blk = (*bt)[b];
            if (blk.kind != BlockKind::subdivided) continue;
            const auto expected = block_children(*tree, *tree, blk.row, blk.col);
            REQUIRE(expected.size() == blk.children.size());
            for (std::size_t k = 0; k < expected.size(); ++k) {
                CHECK((*bt)[blk.children[k]].row == expected[k].first);
                CHECK((*bt)[blk.children[k]].col == expected[k].second);
            }
        }
    }
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS(build_sphere_mesh(-1));
    const auto mesh = build_sphere_mesh(1);
    CHECK_THROWS(build_cluster_tree(mesh, 0));
    auto tree = std::make_shared<ClusterTree>(build_cluster_tree(mesh, 4));
    CHECK_THROWS(build_block_tree(tree, tree, 0.0));
    CHECK_THROWS(build_block_tree(nullptr, tree, 1.0));
}
